#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace floodforensics {

enum class ValueDomain { unit, normalized };

/// H x W x 3 image stored row-major, channels interleaved (RGB).
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, float fill = 0.0f, ValueDomain domain = ValueDomain::unit);
  ImageTensor(int height, int width, std::vector<float> data, ValueDomain domain = ValueDomain::unit);

  static constexpr int kChannels = 3;

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  ValueDomain domain() const noexcept { return domain_; }
  void set_domain(ValueDomain d) noexcept { domain_ = d; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  /// Clamp every value to [0,1]; only meaningful in the unit domain.
  void clamp_unit();

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int height_ = 0;
  int width_ = 0;
  ValueDomain domain_ = ValueDomain::unit;
  std::vector<float> data_;
};

/// H x W binary grid; 1 marks manipulated (flooded) pixels.
class FloodMask {
 public:
  FloodMask() = default;
  FloodMask(int height, int width, std::uint8_t fill = 0);
  FloodMask(int height, int width, std::vector<std::uint8_t> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  std::size_t count_ones() const noexcept;

  friend bool operator==(const FloodMask&, const FloodMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Bilinear resize with half-pixel centres (no antialiasing).
ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width);

/// Nearest-neighbour resize; keeps the mask binary.
FloodMask resize_nearest(const FloodMask& mask, int out_height, int out_width);

/// Threshold a probability map (row-major H x W) at `threshold` (value >= threshold -> 1).
FloodMask binarize(std::span<const float> probabilities, int height, int width, float threshold = 0.5f);

// Codec helpers. Images decode to the unit domain; masks map {0,255} (any
// nonzero) to {0,1}. All of them throw DecodeError on failure.
ImageTensor decode_image(const std::filesystem::path& path);
ImageTensor decode_image_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& origin);
FloodMask decode_mask(const std::filesystem::path& path);

/// Quantizes to 8 bits per channel.
std::vector<std::uint8_t> to_rgb8(const ImageTensor& image);
ImageTensor from_rgb8(std::span<const std::uint8_t> rgb, int height, int width);

void write_png(const std::filesystem::path& path, const ImageTensor& image);
void write_png(const std::filesystem::path& path, const FloodMask& mask);
void write_png_rgb8(const std::filesystem::path& path, std::span<const std::uint8_t> rgb, int height, int width);

/// True for the file extensions accepted as dataset images.
bool is_image_file(const std::filesystem::path& path);

}  // namespace floodforensics
