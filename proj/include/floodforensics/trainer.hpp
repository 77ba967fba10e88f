#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "floodforensics/checkpoint.hpp"
#include "floodforensics/data_pipeline.hpp"
#include "floodforensics/losses.hpp"
#include "floodforensics/models.hpp"

namespace floodforensics {

enum class Selection { best_validation, final_epoch };

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 1e-4;
  int batch_size = 16;
  std::uint64_t seed = 0;
  LossWeights loss_weights;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  RealMaskMode real_mask_mode = RealMaskMode::water;
  Selection selection = Selection::best_validation;
  bool deterministic = true;
  PreprocessConfig preprocess;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_det_loss = 0;
  double train_loc_loss = 0;  // 0 for detector-only models
  double train_total_loss = 0;
  double val_total_loss = 0;
  double val_det_accuracy = 0;
  double wall_seconds = 0;
};

nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<double> step_total_losses;  // one entry per optimizer step
};

/// Index (0-based) of the epoch with minimum validation total loss; the
/// earliest epoch wins ties. Throws TrainConfigError on an empty history.
std::size_t select_best(const TrainHistory& history);

/// Picks the checkpoint matching select_best. `checkpoints` is indexed like `history.epochs`.
template <typename Checkpoint>
const Checkpoint& select_best(const TrainHistory& history, const std::vector<Checkpoint>& checkpoints) {
  return checkpoints.at(select_best(history));
}

struct TrainResult {
  ParameterState best_state;
  CheckpointMeta best_meta;
  TrainHistory history;
  bool resumed_finished_run = false;
};

struct TrainOptions {
  /// When set, writes history.jsonl, checkpoints/epoch_{k} and best.
  std::optional<std::filesystem::path> run_dir;
  /// Continue from the last completed epoch found in run_dir.
  bool resume = false;
  std::string model_tag;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Mini-batch Adam training. Samples are unit-domain images; they are resized
/// to the preprocess target size if needed. The model's parameters are left at
/// the state of the selected checkpoint.
TrainResult train(Detector& model, const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& val_set,
                  const TrainConfig& cfg, const TrainOptions& options = {});

struct ValidationResult {
  double total_loss = 0;
  double accuracy = 0;  // detection accuracy at threshold 0.5
};

/// Eval-mode validation loss and accuracy, computed exactly as during training.
ValidationResult validation_metrics(Detector& model, const std::vector<LabeledImage>& val_set, const TrainConfig& cfg);

TrainResult train(Detector& model, const std::vector<SampleRecord>& train_records,
                  const std::vector<SampleRecord>& val_records, const TrainConfig& cfg,
                  const TrainOptions& options = {});

}  // namespace floodforensics
