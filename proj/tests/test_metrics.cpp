#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "floodforensics/errors.hpp"
#include "floodforensics/evaluation.hpp"
#include "floodforensics/metrics.hpp"
#include "test_support.hpp"

using namespace floodforensics;

namespace {

double auc_brute(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0;
  for (double p : pos)
    for (double n : neg) s += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return s / (static_cast<double>(pos.size()) * neg.size());
}

double bpa_loop(const FloodMask& pred, const FloodMask& gt) {
  double correct[2] = {0, 0}, total[2] = {0, 0};
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      const int g = gt.at(y, x);
      total[g] += 1;
      if (pred.at(y, x) == g) correct[g] += 1;
    }
  double sum = 0;
  int classes = 0;
  for (int c = 0; c < 2; ++c)
    if (total[c] > 0) {
      sum += correct[c] / total[c];
      ++classes;
    }
  return sum / classes;
}

double iou_loop(const FloodMask& pred, const FloodMask& gt) {
  double inter = 0, uni = 0;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      inter += pred.at(y, x) && gt.at(y, x);
      uni += pred.at(y, x) || gt.at(y, x);
    }
  return uni == 0 ? 1.0 : inter / uni;
}

FloodMask flipped(const FloodMask& m) {
  FloodMask out = m;
  for (auto& v : out.data()) v = 1 - v;
  return out;
}

FloodMask quarter_mask(int n) {
  FloodMask m(n, n);
  for (int y = 0; y < n / 2; ++y)
    for (int x = 0; x < n / 2; ++x) m.at(y, x) = 1;
  return m;
}

}  // namespace

TEST(ThresholdDecision, BoundaryIsInclusive) {
  EXPECT_EQ(threshold_decision(0.5), 1);
  EXPECT_EQ(threshold_decision(0.49), 0);
  EXPECT_EQ(threshold_decision(1.0), 1);
  EXPECT_EQ(threshold_decision(0.3, 0.25), 1);
}

TEST(Confusion, CountsSumToSamples) {
  const std::vector<double> s{0.9, 0.1, 0.6, 0.4, 0.5};
  const std::vector<int> l{1, 0, 0, 1, 0};
  const auto c = confusion(s, l);
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.tn, 1u);
  EXPECT_EQ(c.fp, 2u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.total(), 5u);
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>(5, 0.9), std::vector<double>(7, 0.1)), 1.0);
  EXPECT_EQ(auc(std::vector<double>(5, 0.3), std::vector<double>(7, 0.3)), 0.5);
  EXPECT_EQ(auc(std::vector<double>{0.1}, std::vector<double>{0.9}), 0.0);
  EXPECT_THROW(auc(std::vector<double>{}, std::vector<double>{0.1}), MetricUndefined);
  EXPECT_THROW(auc(std::vector<double>{0.2}, std::vector<double>{}), MetricUndefined);
}

TEST(Auc, MatchesPairwiseBruteForceWithTies) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pos(200), neg(200);
    // Coarse grid so that ties occur within and across classes.
    for (double& v : pos) v = static_cast<double>(rng() % 50) / 49.0;
    for (double& v : neg) v = static_cast<double>(rng() % 40) / 49.0;
    EXPECT_NEAR(auc(pos, neg), auc_brute(pos, neg), 1e-12);
  }
}

TEST(Auc, InvariantUnderStrictlyIncreasingTransform) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> pos(50), neg(60);
  for (double& v : pos) v = std::round(u(rng) * 20) / 20;
  for (double& v : neg) v = std::round(u(rng) * 20) / 20 * 0.9;
  auto transform = [](std::vector<double> v) {
    for (double& x : v) x = std::exp(3 * x) - 7;
    return v;
  };
  EXPECT_EQ(auc(pos, neg), auc(transform(pos), transform(neg)));
}

TEST(Bpa, Examples) {
  const FloodMask gt = fft::random_mask(8, 8, 3);
  EXPECT_EQ(balanced_pixel_accuracy(gt, gt), 1.0);
  FloodMask half(8, 8);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) half.at(y, x) = 1;
  EXPECT_EQ(balanced_pixel_accuracy(FloodMask(8, 8, 1), half), 0.5);
  // Single-class ground truth: only the present class counts.
  EXPECT_EQ(balanced_pixel_accuracy(FloodMask(8, 8, 0), FloodMask(8, 8, 0)), 1.0);
  EXPECT_EQ(balanced_pixel_accuracy(half, FloodMask(8, 8, 0)), 0.5);
  EXPECT_THROW(balanced_pixel_accuracy(FloodMask(8, 8), FloodMask(8, 7)), ShapeError);
}

TEST(Iou, Examples) {
  FloodMask a(8, 8), b(8, 8);
  a.at(0, 0) = 1;
  b.at(7, 7) = 1;
  EXPECT_EQ(iou(a, b), 0.0);
  EXPECT_EQ(iou(FloodMask(8, 8, 1), quarter_mask(8)), 0.25);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(FloodMask(8, 8), FloodMask(8, 8)), 1.0);
  EXPECT_THROW(iou(FloodMask(8, 8), FloodMask(7, 8)), ShapeError);
}

TEST(PixelMetrics, MatchLoopOraclesIncludingDegenerateCases) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    // Every tenth pair is degenerate: empty, full, or single-class ground truth.
    const double pg = seed % 10 == 0 ? 0.0 : seed % 10 == 1 ? 1.0 : (seed % 7) / 7.0 + 0.05;
    const double pp = seed % 10 == 2 ? 0.0 : (seed % 5) / 5.0 + 0.1;
    const FloodMask pred = fft::random_mask(16, 16, 1000 + seed, pp);
    const FloodMask gt = fft::random_mask(16, 16, 2000 + seed, pg);
    EXPECT_NEAR(balanced_pixel_accuracy(pred, gt), bpa_loop(pred, gt), 1e-12) << seed;
    EXPECT_NEAR(iou(pred, gt), iou_loop(pred, gt), 1e-12) << seed;
    const auto pc = pixel_confusion(pred, gt);
    EXPECT_EQ(pc.total(), 256u);
  }
  EXPECT_NEAR(iou(FloodMask(16, 16), FloodMask(16, 16)), iou_loop(FloodMask(16, 16), FloodMask(16, 16)), 1e-12);
}

TEST(PixelMetrics, BpaSwapInvariantIouNot) {
  int iou_changed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FloodMask pred = fft::random_mask(16, 16, seed, 0.3), gt = fft::random_mask(16, 16, seed + 50, 0.4);
    EXPECT_NEAR(balanced_pixel_accuracy(pred, gt), balanced_pixel_accuracy(flipped(pred), flipped(gt)), 1e-15);
    iou_changed += std::fabs(iou(pred, gt) - iou(flipped(pred), flipped(gt))) > 1e-9;
  }
  EXPECT_GT(iou_changed, 15);
}

TEST(PixelMetrics, DatasetValueIsMeanOfPerImageNotPooled) {
  // Image 1: large gt, perfect prediction. Image 2: tiny gt, missed.
  FloodMask gt1(8, 8, 1), pred1(8, 8, 1);
  FloodMask gt2(8, 8), pred2(8, 8);
  gt2.at(0, 0) = 1;
  const std::vector<FloodMask> preds{pred1, pred2}, gts{gt1, gt2};
  EXPECT_DOUBLE_EQ(iou(preds, gts), 0.5);
  const double pooled_iou = 64.0 / 65.0;
  EXPECT_GT(std::fabs(iou(preds, gts) - pooled_iou), 0.4);
  const double mean_bpa = (1.0 + 0.5) / 2;
  EXPECT_DOUBLE_EQ(balanced_pixel_accuracy(preds, gts), mean_bpa);
  const double pooled_bpa = 0.5 * (64.0 / 65.0 + 63.0 / 63.0);
  EXPECT_GT(std::fabs(balanced_pixel_accuracy(preds, gts) - pooled_bpa), 0.2);
}

TEST(PixelMetrics, OutputsInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const FloodMask a = fft::random_mask(5, 9, seed, 0.2), b = fft::random_mask(5, 9, seed + 7, 0.6);
    for (double v : {balanced_pixel_accuracy(a, b), iou(a, b)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Summarize, ToySetMatchesHandComputation) {
  ScoredSet set;
  set.dataset_tag = "toy";
  set.scores = {0.9, 0.4, 0.6, 0.2};
  set.labels = {1, 1, 0, 0};
  set.pred_masks = {quarter_mask(4), FloodMask(4, 4, 1)};
  set.gt_masks = {quarter_mask(4), quarter_mask(4)};
  const EvalReport r = summarize(set, EvalOptions{}, "m");
  EXPECT_EQ(r.n_images, 4u);
  EXPECT_DOUBLE_EQ(*r.tpr, 0.5);  // 0.9 yes, 0.4 no
  EXPECT_DOUBLE_EQ(*r.tnr, 0.5);  // 0.2 yes, 0.6 no
  EXPECT_DOUBLE_EQ(*r.auc, 0.75);  // pairs: (0.9,0.6)(0.9,0.2)(0.4,0.2) won, (0.4,0.6) lost
  EXPECT_DOUBLE_EQ(*r.bpa, (1.0 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(*r.iou, (1.0 + 0.25) / 2);
  EXPECT_FALSE(r.attack.has_value());
}

TEST(Summarize, AllRealSetReportsTnrAndBpaOnly) {
  ScoredSet set;
  set.dataset_tag = "WSOC";
  set.scores = {0.1, 0.2, 0.7};
  set.labels = {0, 0, 0};
  set.pred_masks = {quarter_mask(4)};
  set.gt_masks = {quarter_mask(4)};
  const EvalReport r = summarize(set, EvalOptions{}, "m");
  EXPECT_TRUE(r.tnr.has_value());
  EXPECT_TRUE(r.bpa.has_value());
  EXPECT_FALSE(r.tpr.has_value());
  EXPECT_FALSE(r.auc.has_value());
  const auto j = to_json(r);
  EXPECT_FALSE(j.contains("tpr"));
}

TEST(Summarize, AllFakeSetPairsAucWithRealSet) {
  ScoredSet fake, real;
  fake.dataset_tag = "WebG132";
  fake.scores = {0.9, 0.8};
  fake.labels = {1, 1};
  real.dataset_tag = "WSOC";
  real.scores = {0.1, 0.85};
  real.labels = {0, 0};
  const EvalReport r = summarize(fake, EvalOptions{}, "m", &real);
  EXPECT_DOUBLE_EQ(*r.tpr, 1.0);
  EXPECT_DOUBLE_EQ(*r.auc, 0.75);
  EXPECT_EQ(r.metadata["auc_paired_with"], "WSOC");
  EXPECT_FALSE(summarize(fake, EvalOptions{}, "m").auc.has_value());
}

TEST(Summarize, PerfectDetectorOnMixedSet) {
  ScoredSet set;
  set.scores = {0.99, 0.8, 0.01, 0.3};
  set.labels = {1, 1, 0, 0};
  const EvalReport r = summarize(set, EvalOptions{}, "m");
  EXPECT_EQ(*r.tpr, 1.0);
  EXPECT_EQ(*r.tnr, 1.0);
  EXPECT_EQ(*r.auc, 1.0);
}

TEST(EvalReport, JsonRoundTrip) {
  EvalReport r;
  r.model_tag = "hybrid";
  r.dataset_tag = "StreetG";
  r.attack = AttackTag{"jpeg", {{"quality", 50}}};
  r.tpr = 0.93;
  r.auc = 0.99;
  r.n_images = 132;
  const auto back = eval_report_from_json(to_json(r));
  EXPECT_EQ(back.model_tag, r.model_tag);
  EXPECT_EQ(back.attack->name, "jpeg");
  EXPECT_EQ(back.attack->params["quality"], 50);
  EXPECT_EQ(back.tpr, r.tpr);
  EXPECT_FALSE(back.tnr.has_value());
  EXPECT_EQ(back.n_images, 132u);
}
