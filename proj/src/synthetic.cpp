#include "floodforensics/synthetic.hpp"

#include <algorithm>
#include <cstdio>

#include "floodforensics/errors.hpp"
#include "floodforensics/random.hpp"

namespace floodforensics {

LabeledImage make_synthetic_sample(int label, int size, std::uint64_t seed, int grid) {
  if (size < 4 * grid || size % grid != 0) throw InvalidConfig("synthetic size must be a multiple of grid, >= 4*grid");
  Rng rng(seed);
  LabeledImage s;
  s.label = label;
  s.image = ImageTensor(size, size);
  s.mask = FloodMask(size, size);

  // Textured background: a random base colour plus strong per-pixel noise.
  std::array<float, 3> base{};
  for (float& b : base) b = static_cast<float>(0.3 + 0.4 * uniform01(rng));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c)
        s.image.at(y, x, c) = std::clamp(base[c] + static_cast<float>(0.5 * (uniform01(rng) - 0.5)), 0.0f, 1.0f);

  if (label == 1) {
    const int cells = size / grid;
    const int h = static_cast<int>(cells / 4 + uniform_index(rng, cells / 4 + 1));
    const int w = static_cast<int>(cells / 4 + uniform_index(rng, cells / 4 + 1));
    const int y0 = static_cast<int>(uniform_index(rng, cells - h + 1));
    const int x0 = static_cast<int>(uniform_index(rng, cells - w + 1));
    const std::array<float, 3> water{0.25f, 0.35f, 0.45f};
    for (int y = y0 * grid; y < (y0 + h) * grid; ++y)
      for (int x = x0 * grid; x < (x0 + w) * grid; ++x) {
        for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = water[c];
        s.mask->at(y, x) = 1;
      }
  }
  return s;
}

std::vector<LabeledImage> make_synthetic_set(int n_real, int n_fake, int size, std::uint64_t seed, int grid) {
  std::vector<LabeledImage> out;
  out.reserve(n_real + n_fake);
  for (int i = 0; i < n_real; ++i) out.push_back(make_synthetic_sample(0, size, derive_seed(seed, 0, i), grid));
  for (int i = 0; i < n_fake; ++i) out.push_back(make_synthetic_sample(1, size, derive_seed(seed, 1, i), grid));
  return out;
}

SyntheticLayout write_synthetic_dataset(const std::filesystem::path& root, int n_real, int n_fake, int size,
                                        std::uint64_t seed) {
  SyntheticLayout layout{root / "real" / "images", root / "real" / "masks", root / "fake" / "images",
                         root / "fake" / "masks"};
  const auto samples = make_synthetic_set(n_real, n_fake, size, seed);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool fake = samples[i].label == 1;
    char name[32];
    std::snprintf(name, sizeof(name), "%s_%04zu.png", fake ? "fake" : "real", i);
    write_png((fake ? layout.fake_images : layout.real_images) / name, samples[i].image);
    write_png((fake ? layout.fake_masks : layout.real_masks) / name, *samples[i].mask);
  }
  return layout;
}

}  // namespace floodforensics
