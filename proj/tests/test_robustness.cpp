#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "floodforensics/errors.hpp"
#include "floodforensics/robustness.hpp"
#include "test_support.hpp"

using namespace floodforensics;

namespace {

// Mirror without repeating the edge sample: -1 -> 1, n -> n-2.
int reflect101(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

ImageTensor median_oracle(const ImageTensor& img, int window) {
  ImageTensor out(img.height(), img.width());
  const int r = window / 2;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        std::vector<float> v;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            v.push_back(img.at(reflect101(y + dy, img.height()), reflect101(x + dx, img.width()), c));
        std::sort(v.begin(), v.end());
        out.at(y, x, c) = v[v.size() / 2];
      }
  return out;
}

}  // namespace

TEST(AttackSpec, DefaultsAndValidation) {
  EXPECT_EQ(AttackSpec{AttackName::jpeg}.resolved().params["quality"], 50);
  EXPECT_EQ(AttackSpec{AttackName::resize_down}.resolved().params["factor"], 0.5);
  EXPECT_EQ(AttackSpec{AttackName::median}.resolved().params["window"], 3);
  const auto blur = AttackSpec{AttackName::gaussian_blur}.resolved();
  EXPECT_EQ(blur.params["window"], 3);
  EXPECT_EQ(blur.params["sigma"], 0.8);
  const auto noise = AttackSpec{AttackName::gaussian_noise}.resolved();
  EXPECT_EQ(noise.params["mean"], 0.0);
  EXPECT_EQ(noise.params["variance"], 0.003);

  EXPECT_THROW(AttackSpec::jpeg(0).resolved(), InvalidConfig);
  EXPECT_THROW(AttackSpec::jpeg(101).resolved(), InvalidConfig);
  EXPECT_THROW(AttackSpec::median(4).resolved(), InvalidConfig);
  EXPECT_THROW(AttackSpec::gaussian_noise(0, -1).resolved(), InvalidConfig);
  EXPECT_THROW(AttackSpec::resize_down(0).resolved(), InvalidConfig);
  EXPECT_THROW((AttackSpec{AttackName::jpeg, {{"qualty", 50}}}.resolved()), InvalidConfig);
  EXPECT_THROW(parse_attack_name("sharpen"), InvalidConfig);
}

TEST(AttackSpec, JsonRoundTrip) {
  const auto j = nlohmann::json::parse(R"({"name": "jpeg", "params": {"quality": 50}, "seed": 0})");
  const AttackSpec s = attack_spec_from_json(j);
  EXPECT_EQ(s.name, AttackName::jpeg);
  EXPECT_EQ(s.params["quality"], 50);
  const AttackSpec back = attack_spec_from_json(to_json(s));
  EXPECT_EQ(back.name, s.name);
  EXPECT_EQ(back.params, s.params);
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_THROW(attack_spec_from_json(nlohmann::json::parse(R"({"name": "jpeg", "extra": 1})")), InvalidConfig);
}

TEST(Jpeg, PsnrMonotoneInQualityAndHighAtHundred) {
  const ImageTensor img = fft::scene_image(64, 96);
  const double p30 = psnr(img, jpeg_compress(img, 30));
  const double p60 = psnr(img, jpeg_compress(img, 60));
  const double p90 = psnr(img, jpeg_compress(img, 90));
  EXPECT_LT(p30, p60);
  EXPECT_LT(p60, p90);
  EXPECT_LT(p90, psnr(img, jpeg_compress(img, 100)));
  // Without chroma edges, subsampling costs nothing and q100 is near lossless.
  ImageTensor gray(64, 96);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 96; ++x)
      for (int c = 0; c < 3; ++c) gray.at(y, x, c) = static_cast<float>(x + y) / 160.0f;
  EXPECT_GT(psnr(gray, jpeg_compress(gray, 100)), 40.0);
  const ImageTensor out = jpeg_compress(img, 50);
  EXPECT_EQ(out.height(), 64);
  EXPECT_EQ(out.width(), 96);
  EXPECT_EQ(out, jpeg_compress(img, 50));
  EXPECT_THROW(jpeg_compress(img, 0), InvalidConfig);
}

TEST(ResizeDown, ShapesAndConstants) {
  EXPECT_EQ(resize_down(fft::random_image(20, 30, 1), 1.0).height(), 20);
  const ImageTensor half = resize_down(fft::random_image(512, 512, 1), 0.5);
  EXPECT_EQ(half.height(), 256);
  EXPECT_EQ(half.width(), 256);
  const ImageTensor odd = resize_down(fft::random_image(15, 9, 1), 0.5);
  EXPECT_EQ(odd.height(), 7);
  EXPECT_EQ(odd.width(), 4);
  const ImageTensor flat = resize_down(fft::constant_image(50, 70, 0.3f, 0.3f, 0.3f), 0.37);
  for (float v : flat.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
  EXPECT_THROW(resize_down(fft::random_image(1, 1, 1), 0.5), InvalidConfig);
}

TEST(Median, MatchesNaiveSortOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImageTensor img = fft::random_image(8, 8, seed);
    EXPECT_EQ(median_filter(img, 3), median_oracle(img, 3)) << seed;
    EXPECT_EQ(median_filter(img, 5), median_oracle(img, 5)) << seed;
  }
}

TEST(Median, ConstantAndSaltPixel) {
  const ImageTensor flat = fft::constant_image(9, 9, 0.4f, 0.4f, 0.4f);
  EXPECT_EQ(median_filter(flat, 3), flat);
  ImageTensor salt = flat;
  for (int c = 0; c < 3; ++c) salt.at(4, 4, c) = 1.0f;
  EXPECT_EQ(median_filter(salt, 3), flat);
  EXPECT_THROW(median_filter(flat, 4), InvalidConfig);
}

TEST(Blur, KernelNormalizedAndConstantPreserved) {
  for (int w : {3, 5, 7})
    for (double s : {0.5, 0.8, 2.0}) {
      const auto k = gaussian_kernel(w, s);
      EXPECT_EQ(static_cast<int>(k.size()), w);
      EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-9);
      EXPECT_EQ(k.front(), k.back());
    }
  const ImageTensor flat = fft::constant_image(10, 12, 0.2f, 0.5f, 0.9f);
  const ImageTensor b = gaussian_blur(flat, 3);
  for (std::size_t i = 0; i < flat.data().size(); ++i) EXPECT_NEAR(b.data()[i], flat.data()[i], 1e-6);
  EXPECT_THROW(gaussian_blur(flat, 2), InvalidConfig);
  EXPECT_THROW(gaussian_blur(flat, 3, 0.0), InvalidConfig);
}

TEST(Blur, DoesNotIncreaseTotalVariation) {
  for (const ImageTensor& img : {fft::scene_image(40, 50), fft::random_image(24, 24, 3)})
    EXPECT_LE(total_variation(gaussian_blur(img, 3, 0.8)), total_variation(img));
}

TEST(Noise, StatisticsOfRawField) {
  const auto field = gaussian_noise_field(1'000'000, 0.0, 0.003, 17);
  double mean = 0;
  for (double v : field) mean += v;
  mean /= field.size();
  double var = 0;
  for (double v : field) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (field.size() - 1));
  EXPECT_LT(std::fabs(sd - std::sqrt(0.003)) / std::sqrt(0.003), 0.02);
  EXPECT_LT(std::fabs(mean), 5e-4);
}

TEST(Noise, IdentityDeterminismAndClamping) {
  const ImageTensor img = fft::random_image(16, 16, 4);
  EXPECT_EQ(gaussian_noise(img, 0.0, 0.0, 1), img);
  EXPECT_EQ(gaussian_noise(img, 0.0, 0.003, 5), gaussian_noise(img, 0.0, 0.003, 5));
  EXPECT_NE(gaussian_noise(img, 0.0, 0.003, 5), gaussian_noise(img, 0.0, 0.003, 6));
  const ImageTensor noisy = gaussian_noise(img, 0.0, 0.5, 2);
  for (float v : noisy.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Noise, ClampingIsRareOnMidGray) {
  const ImageTensor gray = fft::constant_image(200, 200, 0.5f, 0.5f, 0.5f);
  const ImageTensor out = gaussian_noise(gray, 0.0, 0.003, 9);
  std::size_t clamped = 0;
  for (float v : out.data()) clamped += (v == 0.0f || v == 1.0f);
  EXPECT_LT(static_cast<double>(clamped) / out.data().size(), 1e-4);
}

TEST(ApplyAttack, DispatchAndInvariants) {
  const ImageTensor img = fft::scene_image(32, 48);
  EXPECT_EQ(apply_attack(AttackSpec::none(), img), img);
  EXPECT_EQ(apply_attack(AttackSpec::jpeg(50), img), jpeg_compress(img, 50));
  EXPECT_EQ(apply_attack(AttackSpec::median(3), img), median_filter(img, 3));
  EXPECT_EQ(apply_attack(AttackSpec::gaussian_blur(3), img), gaussian_blur(img, 3, 0.8));
  const auto noisy0 = apply_attack(AttackSpec::gaussian_noise(0, 0.003, 4), img, 0);
  EXPECT_NE(noisy0, apply_attack(AttackSpec::gaussian_noise(0, 0.003, 4), img, 1));
  EXPECT_EQ(noisy0, apply_attack(AttackSpec::gaussian_noise(0, 0.003, 4), img, 0));
  for (const AttackSpec& s : {AttackSpec::jpeg(), AttackSpec::median(), AttackSpec::gaussian_blur(),
                              AttackSpec::gaussian_noise(), AttackSpec::resize_down()}) {
    const ImageTensor out = apply_attack(s, img, 3);
    if (s.name != AttackName::resize_down) {
      EXPECT_EQ(out.height(), img.height());
      EXPECT_EQ(out.width(), img.width());
    }
    for (float v : out.data()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  std::vector<ImageTensor> set{img, img, img, img};
  std::vector<ImageTensor> attacked;
  for (std::size_t i = 0; i < set.size(); ++i) attacked.push_back(apply_attack(AttackSpec::gaussian_noise(), set[i], i));
  EXPECT_EQ(attacked.size(), 4u);
}

TEST(Psnr, IdenticalIsInfinite) {
  const ImageTensor img = fft::random_image(4, 4, 1);
  EXPECT_TRUE(std::isinf(psnr(img, img)));
}
