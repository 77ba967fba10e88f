#pragma once

#include <optional>
#include <string>
#include <vector>

#include "floodforensics/data_pipeline.hpp"
#include "floodforensics/metrics.hpp"
#include "floodforensics/models.hpp"
#include "floodforensics/robustness.hpp"

namespace floodforensics {

struct EvalOptions {
  PreprocessConfig preprocess{.augment_enabled = false};
  double detection_threshold = 0.5;
  float mask_threshold = 0.5f;
  std::optional<AttackSpec> attack;
  int batch_size = 16;
};

/// Per-image model outputs for one dataset.
struct ScoredSet {
  std::string dataset_tag;
  std::vector<double> scores;
  std::vector<int> labels;
  // Binarized predictions and ground truth, for images that have a ground-truth mask.
  std::vector<FloodMask> pred_masks;
  std::vector<FloodMask> gt_masks;

  std::vector<double> scores_with_label(int label) const;
};

/// Attack (if any) at native resolution, then resize + normalize, then score.
ScoredSet score_samples(Detector& model, const std::vector<LabeledImage>& samples, const EvalOptions& options,
                        std::string dataset_tag = {});
ScoredSet score_records(Detector& model, const std::vector<SampleRecord>& records, const EvalOptions& options);

/// Fill the metrics defined for the set's label composition. For an all-fake
/// set, AUC uses the negatives of `paired_real`.
EvalReport summarize(const ScoredSet& set, const EvalOptions& options, const std::string& model_tag,
                     const ScoredSet* paired_real = nullptr);

EvalReport evaluate(Detector& model, const std::vector<SampleRecord>& records, const EvalOptions& options,
                    const std::string& model_tag, const ScoredSet* paired_real = nullptr);

/// Dataset tag for a record list: the common source name, or "mixed".
std::string dataset_tag_of(const std::vector<SampleRecord>& records);

}  // namespace floodforensics
