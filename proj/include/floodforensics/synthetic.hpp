#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "floodforensics/data_pipeline.hpp"

namespace floodforensics {

/// Desk-scale stand-in for the flood datasets. Real samples are pure random
/// texture with an all-zero mask; fake samples carry a planted flat-coloured
/// rectangle, which is both the manipulation and the mask. Rectangle edges
/// are aligned to `grid` pixels.
LabeledImage make_synthetic_sample(int label, int size, std::uint64_t seed, int grid = 4);

std::vector<LabeledImage> make_synthetic_set(int n_real, int n_fake, int size, std::uint64_t seed, int grid = 4);

struct SyntheticLayout {
  std::filesystem::path real_images;
  std::filesystem::path real_masks;
  std::filesystem::path fake_images;
  std::filesystem::path fake_masks;
};

/// Writes PNG images and masks under `root/{real,fake}/{images,masks}`.
SyntheticLayout write_synthetic_dataset(const std::filesystem::path& root, int n_real, int n_fake, int size,
                                        std::uint64_t seed);

}  // namespace floodforensics
