#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "floodforensics/image.hpp"
#include "floodforensics/random.hpp"

namespace fft {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ff") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline floodforensics::ImageTensor random_image(int h, int w, std::uint64_t seed) {
  floodforensics::Rng rng(seed);
  floodforensics::ImageTensor img(h, w);
  for (float& v : img.data()) v = static_cast<float>(floodforensics::uniform01(rng));
  return img;
}

inline floodforensics::FloodMask random_mask(int h, int w, std::uint64_t seed, double p = 0.5) {
  floodforensics::Rng rng(seed);
  floodforensics::FloodMask m(h, w);
  for (auto& v : m.data()) v = floodforensics::uniform01(rng) < p ? 1 : 0;
  return m;
}

inline floodforensics::ImageTensor constant_image(int h, int w, float r, float g, float b) {
  floodforensics::ImageTensor img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  return img;
}

/// Smooth test image with edges: gradients plus a disc, in [0,1].
inline floodforensics::ImageTensor scene_image(int h, int w) {
  floodforensics::ImageTensor img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float fx = static_cast<float>(x) / w, fy = static_cast<float>(y) / h;
      const float dx = fx - 0.6f, dy = fy - 0.4f;
      const bool disc = dx * dx + dy * dy < 0.04f;
      img.at(y, x, 0) = disc ? 0.9f : 0.2f + 0.6f * fx;
      img.at(y, x, 1) = disc ? 0.3f : 0.5f + 0.3f * fy * fx;
      img.at(y, x, 2) = disc ? 0.1f : 0.8f - 0.5f * fy;
    }
  return img;
}

/// Parameters as (name, tensor) pairs, usable with structured bindings.
inline std::vector<std::pair<std::string, torch::Tensor>> named_params(const torch::nn::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : m.named_parameters()) out.emplace_back(item.key(), item.value());
  return out;
}

}  // namespace fft
