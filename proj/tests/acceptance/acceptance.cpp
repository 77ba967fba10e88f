// Acceptance gate: one PASS/FAIL line per criterion. Exit status is nonzero
// if any required criterion fails. Criterion 8 needs the released datasets and
// GPU-scale training, so it is reported as skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>

#include "floodforensics/losses.hpp"
#include "floodforensics/metrics.hpp"
#include "floodforensics/models.hpp"
#include "floodforensics/robustness.hpp"
#include "floodforensics/synthetic.hpp"
#include "floodforensics/trainer.hpp"
#include "overfit.hpp"
#include "test_support.hpp"

using namespace floodforensics;

namespace {

// Tolerances.
constexpr double kLossTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kFiniteDiffStep = 1e-5;
constexpr double kAucTol = 1e-12;
constexpr double kPixelMetricTol = 1e-12;
constexpr double kNoiseStdRelTol = 0.02;
constexpr double kKernelSumTol = 1e-9;
constexpr double kOverfitLocLoss = 0.1;
constexpr double kOverfitSecondsPerSeed = 300;
constexpr int kOverfitSeeds = 5;
constexpr int kOverfitRequired = 4;
constexpr double kTrajectoryTol = 1e-6;
constexpr int kTrajectorySteps = 10;
constexpr double kMulPlainTol = 1e-6;

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] %d %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
  std::fflush(stdout);
  failures += !v.pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double bce(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbabilityEpsilon, 1 - kProbabilityEpsilon);
    s += t[i] * std::log(q) + (1 - t[i]) * std::log(1 - q);
  }
  return -s / static_cast<double>(p.size());
}

torch::Tensor t64(const std::vector<double>& v) { return torch::tensor(v, torch::kFloat64); }

Verdict loss_correctness() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1), inner(0.01, 0.99);
  double max_loss_err = 0, max_grad_rel = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> p(n), t(n);
    for (int i = 0; i < n; ++i) {
      p[i] = u(rng);
      t[i] = static_cast<double>(rng() % 2);
    }
    max_loss_err = std::max(max_loss_err, std::fabs(detection_loss(t64(p), t64(t)).item<double>() - bce(p, t)));

    // Localization: N x H x W with a triple loop.
    const int N = 1 + trial % 3, H = 2 + trial % 4, W = 3 + trial % 2;
    std::vector<double> m(N * H * W), g(N * H * W);
    for (auto& v : m) v = u(rng);
    for (auto& v : g) v = static_cast<double>(rng() % 2);
    double s = 0;
    for (int a = 0; a < N; ++a)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const std::size_t k = (static_cast<std::size_t>(a) * H + i) * W + j;
          const double q = std::clamp(m[k], kProbabilityEpsilon, 1 - kProbabilityEpsilon);
          s += g[k] * std::log(q) + (1 - g[k]) * std::log(1 - q);
        }
    const double oracle = -s / (N * H * W);
    const double got = localization_loss(t64(m).view({N, H, W}), t64(g).view({N, H, W})).item<double>();
    max_loss_err = std::max(max_loss_err, std::fabs(got - oracle));
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(6), t(6);
    for (int i = 0; i < 6; ++i) {
      p[i] = inner(rng);
      t[i] = static_cast<double>(rng() % 2);
    }
    const auto gd = detection_loss_gradient(t64(p), t64(t));
    const auto gl = localization_loss_gradient(t64(p).view({1, 2, 3}), t64(t).view({1, 2, 3})).flatten();
    auto pt = t64(p).requires_grad_(true);
    detection_loss(pt, t64(t)).backward();
    for (int i = 0; i < 6; ++i) {
      auto hi = p, lo = p;
      hi[i] += kFiniteDiffStep;
      lo[i] -= kFiniteDiffStep;
      const double fd = (bce(hi, t) - bce(lo, t)) / (2 * kFiniteDiffStep);
      for (double analytic : {gd[i].item<double>(), gl[i].item<double>(), pt.grad()[i].item<double>()})
        max_grad_rel = std::max(max_grad_rel, std::fabs(analytic - fd) / std::fabs(fd));
    }
  }
  return {max_loss_err <= kLossTol && max_grad_rel < kGradRelTol,
          fmt("max |loss - oracle| = %.2e (tol %.0e), max gradient rel. error = %.2e (tol %.0e)", max_loss_err,
              kLossTol, max_grad_rel, kGradRelTol)};
}

Verdict metric_oracles() {
  std::mt19937_64 rng(7);
  double auc_err = 0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> pos(200), neg(200);
    for (auto& v : pos) v = static_cast<double>(rng() % 64) / 63.0;
    for (auto& v : neg) v = static_cast<double>(rng() % 48) / 63.0;
    double s = 0;
    for (double a : pos)
      for (double b : neg) s += a > b ? 1.0 : a == b ? 0.5 : 0.0;
    auc_err = std::max(auc_err, std::fabs(auc(pos, neg) - s / (200.0 * 200.0)));
  }

  double bpa_err = 0, iou_err = 0;
  int degenerate = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    FloodMask pred, gt;
    switch (k % 10) {
      case 0: pred = FloodMask(16, 16), gt = FloodMask(16, 16); break;                 // both empty
      case 1: pred = fft::random_mask(16, 16, k, 0.3), gt = FloodMask(16, 16); break;  // gt single class 0
      case 2: pred = fft::random_mask(16, 16, k, 0.3), gt = FloodMask(16, 16, 1); break;  // gt single class 1
      case 3: pred = FloodMask(16, 16), gt = fft::random_mask(16, 16, k + 500, 0.4); break;  // empty prediction
      default: pred = fft::random_mask(16, 16, k, 0.1 + 0.08 * (k % 10)), gt = fft::random_mask(16, 16, k + 500, 0.45);
    }
    degenerate += k % 10 < 4;
    double correct[2] = {0, 0}, total[2] = {0, 0}, inter = 0, uni = 0;
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const int g = gt.at(y, x), p = pred.at(y, x);
        total[g] += 1;
        correct[g] += p == g;
        inter += p && g;
        uni += p || g;
      }
    double acc = 0;
    int present = 0;
    for (int c = 0; c < 2; ++c)
      if (total[c] > 0) acc += correct[c] / total[c], ++present;
    bpa_err = std::max(bpa_err, std::fabs(balanced_pixel_accuracy(pred, gt) - acc / present));
    iou_err = std::max(iou_err, std::fabs(iou(pred, gt) - (uni == 0 ? 1.0 : inter / uni)));
  }
  return {auc_err <= kAucTol && bpa_err <= kPixelMetricTol && iou_err <= kPixelMetricTol,
          fmt("AUC err %.1e (200+200 with ties), bPA err %.1e, IoU err %.1e over 100 pairs (%d degenerate); tol %.0e",
              auc_err, bpa_err, iou_err, degenerate, kPixelMetricTol)};
}

Verdict architecture_flow() {
  torch::manual_seed(3);
  ModelSpec spec;  // residual50 hybrid, head 256
  Detector model(spec);
  model.train();
  const auto out = model.forward(torch::randn({2, 3, 224, 224}));
  const bool shapes = out.features.sizes() == torch::IntArrayRef{2, 2048, 7, 7} &&
                      out.maps.sizes() == torch::IntArrayRef{2, 224, 224} && out.scores.sizes() == torch::IntArrayRef{2};
  const auto l = detection_loss(out.scores, torch::tensor({1.0f, 0.0f})) +
                 localization_loss(out.maps, torch::randint(0, 2, {2, 224, 224}).to(torch::kFloat32));
  l.backward();
  int zero = 0, total = 0;
  std::string first_zero;
  for (const auto& item : model.module().named_parameters()) {
    const auto& name = item.key();
    const auto& p = item.value();
    ++total;
    if (!p.grad().defined() || p.grad().abs().max().item<float>() == 0.0f) {
      if (zero++ == 0) first_zero = name;
    }
  }
  return {shapes && zero == 0,
          fmt("features %ldx%ldx%ld, map %ldx%ld, score per image; %d/%d parameters with nonzero gradient%s%s",
              out.features.size(2), out.features.size(3), out.features.size(1), out.maps.size(1), out.maps.size(2),
              total - zero, total, zero ? "; first zero: " : "", first_zero.c_str())};
}

Verdict overfit_sanity() {
  int passed = 0;
  std::string detail;
  for (int seed = 0; seed < kOverfitSeeds; ++seed) {
    const auto o = fft::run_overfit(static_cast<std::uint64_t>(seed));
    const bool ok = o.first_step_reached.has_value() && o.seconds < kOverfitSecondsPerSeed;
    passed += ok;
    detail += fmt("%sseed %d: %s (final acc %.2f, loc %.3f, %.0fs)", seed ? "; " : "", seed,
                  o.first_step_reached ? fmt("step %d", *o.first_step_reached).c_str() : "not reached", o.accuracy,
                  o.loc_loss, o.seconds);
  }
  return {passed >= kOverfitRequired,
          fmt("%d/%d seeds reach acc 1.0 and loc loss < %.1f within %d steps [", passed, kOverfitSeeds, kOverfitLocLoss,
              fft::kOverfitSteps) +
              detail + "]"};
}

Verdict attack_operators() {
  const auto field = gaussian_noise_field(1'000'000, 0.0, 0.003, 99);
  const double mean = std::accumulate(field.begin(), field.end(), 0.0) / field.size();
  double ss = 0;
  for (double v : field) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (field.size() - 1));
  const double sd_rel = std::fabs(sd - std::sqrt(0.003)) / std::sqrt(0.003);

  int median_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ImageTensor img = fft::random_image(8, 8, seed);
    const ImageTensor got = median_filter(img, 3);
    auto refl = [](int i, int n) { return i < 0 ? -i : i >= n ? 2 * (n - 1) - i : i; };
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c) {
          std::vector<float> w;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) w.push_back(img.at(refl(y + dy, 8), refl(x + dx, 8), c));
          std::sort(w.begin(), w.end());
          median_mismatch += got.at(y, x, c) != w[4];
        }
  }

  const auto k = gaussian_kernel(3, 0.8);
  const double ksum_err = std::fabs(std::accumulate(k.begin(), k.end(), 0.0) - 1.0);

  const ImageTensor scene = fft::scene_image(96, 128);
  const double p30 = psnr(scene, jpeg_compress(scene, 30));
  const double p60 = psnr(scene, jpeg_compress(scene, 60));
  const double p90 = psnr(scene, jpeg_compress(scene, 90));
  const bool monotone = p30 < p60 && p60 < p90;

  return {sd_rel < kNoiseStdRelTol && median_mismatch == 0 && ksum_err <= kKernelSumTol && monotone,
          fmt("noise sd %.6f vs %.6f (rel %.2e, tol %.0e); median mismatches %d; kernel sum err %.1e; "
              "JPEG PSNR q30/q60/q90 = %.2f/%.2f/%.2f dB",
              sd, std::sqrt(0.003), sd_rel, kNoiseStdRelTol, median_mismatch, ksum_err, p30, p60, p90)};
}

Verdict lambda_degeneration() {
  const auto data = make_synthetic_set(8, 8, 32, 77);
  TrainConfig cfg;
  cfg.epochs = kTrajectorySteps;  // 16 samples, batch 16
  cfg.batch_size = 16;
  cfg.seed = 5;
  cfg.selection = Selection::final_epoch;
  cfg.preprocess.target_size = 32;

  ModelSpec hybrid_spec;
  hybrid_spec.backbone = BackboneSpec::residual_tiny(4, 8);
  hybrid_spec.head_channels = 16;
  ModelSpec plain_spec = hybrid_spec;
  plain_spec.kind = ModelKind::plain;

  torch::manual_seed(123);
  Detector hybrid(hybrid_spec);
  hybrid.hybrid()->get()->set_detach_localization(true);
  torch::manual_seed(123);
  Detector plain(plain_spec);

  TrainConfig hcfg = cfg;
  hcfg.loss_weights = {0.4, 0.0};
  const auto hr = train(hybrid, data, data, hcfg);
  const auto pr = train(plain, data, data, cfg);

  double max_diff = 0;
  std::size_t compared = 0;
  const auto hp = hybrid.module().named_parameters();
  for (const auto& item : plain.module().named_parameters()) {
    const auto& p = item.value();
    max_diff = std::max(max_diff, (p - hp[item.key()]).abs().max().item<double>());
    ++compared;
  }
  double loss_diff = 0;
  for (std::size_t i = 0; i < pr.history.step_total_losses.size(); ++i)
    loss_diff = std::max(loss_diff, std::fabs(hr.history.step_total_losses[i] / 0.4 - pr.history.step_total_losses[i]));
  return {max_diff <= kTrajectoryTol && compared > 0 && pr.history.step_total_losses.size() == kTrajectorySteps,
          fmt("after %zu Adam steps (lambda_det 0.4, lambda_loc 0): max |param diff| = %.2e over %zu shared tensors "
              "(tol %.0e); max detection-loss diff %.2e",
              pr.history.step_total_losses.size(), max_diff, compared, kTrajectoryTol, loss_diff)};
}

Verdict mul_equivalence() {
  double worst = 0;
  for (const BackboneSpec& b : {BackboneSpec::residual_tiny(4, 8), BackboneSpec::residual50()}) {
    ModelSpec plain_spec;
    plain_spec.kind = ModelKind::plain;
    plain_spec.backbone = b;
    ModelSpec mul_spec = plain_spec;
    mul_spec.kind = ModelKind::mul;
    torch::manual_seed(11);
    Detector plain(plain_spec);
    torch::manual_seed(99);
    Detector mul(mul_spec);
    copy_matching_parameters(plain.module(), mul.module());
    plain.eval();
    mul.eval();
    torch::NoGradGuard no_grad;
    const auto x = torch::randn({4, 3, 64, 64});
    const auto a = plain.forward(x).scores;
    const auto c = mul.forward(x, torch::ones({4, 64, 64})).scores;
    worst = std::max(worst, (a - c).abs().max().item<double>());
  }
  return {worst <= kMulPlainTol, fmt("max |score diff| = %.2e over residualTiny and residual50 (tol %.0e)", worst,
                                     kMulPlainTol)};
}

}  // namespace

int main() {
  torch::set_num_threads(1);
  report(1, "loss correctness", loss_correctness);
  report(2, "metric oracles", metric_oracles);
  report(3, "architecture shape/flow", architecture_flow);
  report(4, "overfit sanity", overfit_sanity);
  report(5, "attack operators", attack_operators);
  report(6, "lambda degeneration", lambda_degeneration);
  report(7, "MUL/plain equivalence", mul_equivalence);
  std::printf("[SKIP] 8 published-number reproduction: optional; needs the released flood datasets and multi-hour GPU training\n");
  std::printf("%s: %d required criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
