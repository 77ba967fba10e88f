#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "floodforensics/image.hpp"

namespace floodforensics {

/// Image-level confusion counts (positive = fake).
struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
};

/// p_ij = pixels of ground-truth class i predicted as class j.
struct PixelConfusion {
  std::uint64_t p00 = 0, p01 = 0, p10 = 0, p11 = 0;
  std::uint64_t total() const { return p00 + p01 + p10 + p11; }
};

/// 1 iff score >= threshold.
int threshold_decision(double score, double threshold = 0.5);

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Mann-Whitney AUC with half credit for ties, computed exactly by sorting.
/// Throws MetricUndefined if either list is empty.
double auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

PixelConfusion pixel_confusion(const FloodMask& pred, const FloodMask& gt);

/// Balanced pixel accuracy of one image: mean per-class accuracy over the
/// classes present in `gt`.
double balanced_pixel_accuracy(const FloodMask& pred, const FloodMask& gt);

/// |pred ∩ gt| / |pred ∪ gt|; 1.0 when both are empty.
double iou(const FloodMask& pred, const FloodMask& gt);

/// Dataset-level forms: the mean of the per-image values.
double balanced_pixel_accuracy(std::span<const FloodMask> preds, std::span<const FloodMask> gts);
double iou(std::span<const FloodMask> preds, std::span<const FloodMask> gts);

struct AttackTag {
  std::string name = "none";
  nlohmann::json params = nlohmann::json::object();
};

struct EvalReport {
  std::string model_tag;
  std::string dataset_tag;
  std::optional<AttackTag> attack;  // nullopt == no attack
  std::optional<double> tnr;
  std::optional<double> tpr;
  std::optional<double> auc;
  std::optional<double> bpa;
  std::optional<double> iou;
  std::size_t n_images = 0;
  nlohmann::json metadata = nlohmann::json::object();

  std::string attack_name() const { return attack ? attack->name : "none"; }
};

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

}  // namespace floodforensics
