#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "floodforensics/models.hpp"
#include "floodforensics/trainer.hpp"

namespace floodforensics {

/// Unified configuration for a training run. Unknown keys are rejected with
/// an InvalidConfig naming the offending key path (e.g. "train.lr").
struct RunConfig {
  ModelSpec model;
  TrainConfig train;
  double train_fraction = 0.8;
  std::vector<std::filesystem::path> train_manifests;
  std::vector<std::filesystem::path> val_manifests;  // empty: split the training manifests
  std::filesystem::path output_dir;
  std::string model_tag;
};

/// Relative manifest paths resolve against FLOODFORENSICS_DATA_ROOT when set,
/// otherwise against `base_dir`. Referenced manifests must exist.
/// The "model" section alone; omitted keys take the ModelSpec defaults.
ModelSpec parse_model_section(const nlohmann::json& model);

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved document (all defaults spelled out).
nlohmann::json to_json(const RunConfig& cfg);

/// Base directory for relative manifest paths: FLOODFORENSICS_DATA_ROOT or `fallback`.
std::filesystem::path data_root(const std::filesystem::path& fallback);

}  // namespace floodforensics
