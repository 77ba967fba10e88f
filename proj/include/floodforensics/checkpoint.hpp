#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "floodforensics/losses.hpp"
#include "floodforensics/models.hpp"

namespace floodforensics {

struct CheckpointMeta {
  ModelSpec spec;
  LossWeights loss_weights;
  int epoch = 0;
  double val_loss = 0;
  std::string model_tag;
  int input_size = 224;  // square side the model was trained at
};

nlohmann::json to_json(const BackboneSpec& spec);
nlohmann::json to_json(const ModelSpec& spec);
nlohmann::json to_json(const CheckpointMeta& meta);
BackboneSpec backbone_spec_from_json(const nlohmann::json& j);
ModelSpec model_spec_from_json(const nlohmann::json& j);
CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j);

/// Deep copy of every parameter and buffer, keyed by hierarchical name.
using ParameterState = std::vector<std::pair<std::string, torch::Tensor>>;

ParameterState capture_state(const torch::nn::Module& module);
/// Throws CheckpointMismatch when names or shapes disagree.
void restore_state(torch::nn::Module& module, const ParameterState& state);

/// Archive of all parameters/buffers plus a metadata entry; the metadata is
/// also written next to the archive as `<path>.json`.
void save_checkpoint(const std::filesystem::path& path, const ParameterState& state, const CheckpointMeta& meta);
void save_checkpoint(const std::filesystem::path& path, const Detector& model, const CheckpointMeta& meta);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);
ParameterState read_checkpoint_state(const std::filesystem::path& path);

struct LoadedCheckpoint {
  Detector model;
  CheckpointMeta meta;
};

/// Rebuilds the architecture from the stored metadata and loads the weights.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Loads weights into an existing model; the stored spec must match `model.spec()`.
CheckpointMeta load_checkpoint_into(const std::filesystem::path& path, Detector& model);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace floodforensics
