#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "floodforensics/image.hpp"

namespace floodforensics {

enum class AttackName { none, jpeg, resize_down, median, gaussian_blur, gaussian_noise };

std::string_view to_string(AttackName a);
AttackName parse_attack_name(std::string_view name);

/// One image-processing operator with its parameters. Missing parameters take
/// the defaults: jpeg.quality=50, resize_down.factor=0.5, median.window=3,
/// gaussian_blur.window=3 (sigma 0.8), gaussian_noise.mean=0, variance=0.003.
struct AttackSpec {
  AttackName name = AttackName::none;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;

  /// Fills in defaults and rejects unknown or out-of-range parameters.
  AttackSpec resolved() const;

  static AttackSpec none() { return {}; }
  static AttackSpec jpeg(int quality = 50);
  static AttackSpec resize_down(double factor = 0.5);
  static AttackSpec median(int window = 3);
  static AttackSpec gaussian_blur(int window = 3, double sigma = 0.8);
  static AttackSpec gaussian_noise(double mean = 0.0, double variance = 0.003, std::uint64_t seed = 0);
};

nlohmann::json to_json(const AttackSpec& spec);
AttackSpec attack_spec_from_json(const nlohmann::json& j);

/// Quantize to 8 bits, baseline JPEG (4:2:0 chroma) round trip, back to [0,1].
ImageTensor jpeg_compress(const ImageTensor& image, int quality);

/// Bilinear downsample to (floor(f*H), floor(f*W)).
ImageTensor resize_down(const ImageTensor& image, double factor);

/// Per-channel median over a window x window neighbourhood, reflect padding
/// (mirror without repeating the edge sample).
ImageTensor median_filter(const ImageTensor& image, int window);

/// Normalized 1-D Gaussian taps of odd length `window`.
std::vector<double> gaussian_kernel(int window, double sigma);

/// Separable Gaussian convolution, reflect padding.
ImageTensor gaussian_blur(const ImageTensor& image, int window, double sigma = 0.8);

/// `count` i.i.d. N(mean, variance) draws; the raw field used by gaussian_noise.
std::vector<double> gaussian_noise_field(std::size_t count, double mean, double variance, std::uint64_t seed);

/// Additive Gaussian noise, clamped to [0,1].
ImageTensor gaussian_noise(const ImageTensor& image, double mean, double variance, std::uint64_t seed);

/// Dispatch. `image_index` decorrelates noise across the images of a dataset.
ImageTensor apply_attack(const AttackSpec& spec, const ImageTensor& image, std::uint64_t image_index = 0);

/// Peak signal-to-noise ratio for unit-range images, in dB (infinity when identical).
double psnr(const ImageTensor& a, const ImageTensor& b);

/// Sum of absolute differences between horizontally and vertically adjacent values.
double total_variation(const ImageTensor& image);

}  // namespace floodforensics
