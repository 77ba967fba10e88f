#include "floodforensics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "floodforensics/errors.hpp"

namespace floodforensics {

using nlohmann::json;

int threshold_decision(double score, double threshold) { return score >= threshold ? 1 : 0; }

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int decision = threshold_decision(scores[i], threshold);
    if (labels[i] == 1)
      (decision ? c.tp : c.fn) += 1;
    else
      (decision ? c.fp : c.tn) += 1;
  }
  return c;
}

double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) throw MetricUndefined("AUC needs positive and negative scores");
  auto has_nan = [](std::span<const double> v) { return std::any_of(v.begin(), v.end(), [](double s) { return std::isnan(s); }); };
  if (has_nan(pos_scores) || has_nan(neg_scores)) throw MetricUndefined("AUC is undefined for NaN scores");

  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::sort(neg.begin(), neg.end());
  // Twice the Mann-Whitney U statistic, kept integral so the result is exact.
  std::uint64_t twice_u = 0;
  for (double p : pos_scores) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    twice_u += 2 * static_cast<std::uint64_t>(lo - neg.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos_scores.size()) * static_cast<double>(neg.size()));
}

PixelConfusion pixel_confusion(const FloodMask& pred, const FloodMask& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) throw ShapeError("mask shapes differ");
  PixelConfusion c;
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (g[k])
      (p[k] ? c.p11 : c.p10) += 1;
    else
      (p[k] ? c.p01 : c.p00) += 1;
  }
  return c;
}

double balanced_pixel_accuracy(const FloodMask& pred, const FloodMask& gt) {
  const PixelConfusion c = pixel_confusion(pred, gt);
  double sum = 0;
  int classes = 0;
  if (const auto n0 = c.p00 + c.p01; n0 > 0) {
    sum += static_cast<double>(c.p00) / n0;
    ++classes;
  }
  if (const auto n1 = c.p10 + c.p11; n1 > 0) {
    sum += static_cast<double>(c.p11) / n1;
    ++classes;
  }
  return sum / classes;
}

double iou(const FloodMask& pred, const FloodMask& gt) {
  const PixelConfusion c = pixel_confusion(pred, gt);
  const auto uni = c.p11 + c.p01 + c.p10;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.p11) / uni;
}

namespace {

template <typename F>
double mean_over_images(std::span<const FloodMask> preds, std::span<const FloodMask> gts, F per_image) {
  if (preds.size() != gts.size()) throw ShapeError("prediction and ground-truth counts differ");
  if (preds.empty()) throw MetricUndefined("no images to aggregate");
  double sum = 0;
  for (std::size_t t = 0; t < preds.size(); ++t) sum += per_image(preds[t], gts[t]);
  return sum / preds.size();
}

}  // namespace

double balanced_pixel_accuracy(std::span<const FloodMask> preds, std::span<const FloodMask> gts) {
  return mean_over_images(preds, gts, [](const FloodMask& p, const FloodMask& g) { return balanced_pixel_accuracy(p, g); });
}

double iou(std::span<const FloodMask> preds, std::span<const FloodMask> gts) {
  return mean_over_images(preds, gts, [](const FloodMask& p, const FloodMask& g) { return iou(p, g); });
}

json to_json(const EvalReport& r) {
  json j;
  j["model_tag"] = r.model_tag;
  j["dataset_tag"] = r.dataset_tag;
  j["attack"] = r.attack ? json{{"name", r.attack->name}, {"params", r.attack->params}} : json(nullptr);
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("tnr", r.tnr);
  put("tpr", r.tpr);
  put("auc", r.auc);
  put("bpa", r.bpa);
  put("iou", r.iou);
  j["n_images"] = r.n_images;
  j["metadata"] = r.metadata;
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.model_tag = j.at("model_tag").get<std::string>();
  r.dataset_tag = j.at("dataset_tag").get<std::string>();
  if (j.contains("attack") && !j["attack"].is_null()) {
    AttackTag a;
    a.name = j["attack"].at("name").get<std::string>();
    a.params = j["attack"].value("params", json::object());
    if (a.name != "none") r.attack = a;
  }
  auto get = [&](const char* key) -> std::optional<double> {
    if (j.contains(key) && !j[key].is_null()) return j[key].get<double>();
    return std::nullopt;
  };
  r.tnr = get("tnr");
  r.tpr = get("tpr");
  r.auc = get("auc");
  r.bpa = get("bpa");
  r.iou = get("iou");
  r.n_images = j.value("n_images", std::size_t{0});
  r.metadata = j.value("metadata", json::object());
  return r;
}

}  // namespace floodforensics
