#include "floodforensics/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "floodforensics/errors.hpp"

namespace floodforensics {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr const char* kMetadataKey = "__metadata__";

// Archive keys may not contain '.', so hierarchical names are stored with '/'.
std::string encode_key(std::string name) {
  std::replace(name.begin(), name.end(), '.', '/');
  return name;
}

std::string decode_key(std::string key) {
  std::replace(key.begin(), key.end(), '/', '.');
  return key;
}
}  // namespace

json to_json(const BackboneSpec& spec) {
  return {{"family", std::string(to_string(spec.family))},
          {"output_stride", spec.output_stride},
          {"feature_channels", spec.feature_channels}};
}

json to_json(const ModelSpec& spec) {
  return {{"kind", std::string(to_string(spec.kind))},
          {"backbone", to_json(spec.backbone)},
          {"head_channels", spec.head_channels},
          {"channel_mean", spec.channel_mean},
          {"channel_std", spec.channel_std}};
}

json to_json(const CheckpointMeta& meta) {
  return {{"model", to_json(meta.spec)},
          {"lambda_det", meta.loss_weights.lambda_det},
          {"lambda_loc", meta.loss_weights.lambda_loc},
          {"epoch", meta.epoch},
          {"val_loss", meta.val_loss},
          {"model_tag", meta.model_tag},
          {"input_size", meta.input_size}};
}

BackboneSpec backbone_spec_from_json(const json& j) {
  BackboneSpec s;
  s.family = parse_backbone_family(j.at("family").get<std::string>());
  s.output_stride = j.value("output_stride", s.family == BackboneFamily::residual50 ? 32 : 4);
  s.feature_channels = j.value("feature_channels", s.family == BackboneFamily::residual50 ? 2048 : 8);
  return s;
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  s.backbone = backbone_spec_from_json(j.at("backbone"));
  s.head_channels = j.value("head_channels", 256);
  if (j.contains("channel_mean")) s.channel_mean = j["channel_mean"].get<std::array<float, 3>>();
  if (j.contains("channel_std")) s.channel_std = j["channel_std"].get<std::array<float, 3>>();
  return s;
}

CheckpointMeta checkpoint_meta_from_json(const json& j) {
  CheckpointMeta m;
  m.spec = model_spec_from_json(j.at("model"));
  m.loss_weights.lambda_det = j.value("lambda_det", 0.4);
  m.loss_weights.lambda_loc = j.value("lambda_loc", 0.6);
  m.epoch = j.value("epoch", 0);
  m.val_loss = j.value("val_loss", 0.0);
  m.model_tag = j.value("model_tag", std::string());
  m.input_size = j.value("input_size", 224);
  return m;
}

ParameterState capture_state(const torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  ParameterState state;
  for (const auto& p : module.named_parameters()) state.emplace_back(p.key(), p.value().detach().clone());
  for (const auto& b : module.named_buffers()) state.emplace_back(b.key(), b.value().detach().clone());
  return state;
}

void restore_state(torch::nn::Module& module, const ParameterState& state) {
  torch::NoGradGuard no_grad;
  std::map<std::string, const torch::Tensor*> by_name;
  for (const auto& [name, t] : state) by_name[name] = &t;
  std::size_t used = 0;
  auto assign = [&](const std::string& name, torch::Tensor& target) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointMismatch("checkpoint is missing tensor '" + name + "'");
    if (it->second->sizes() != target.sizes())
      throw CheckpointMismatch("shape mismatch for tensor '" + name + "'");
    target.copy_(*it->second);
    ++used;
  };
  for (auto& p : module.named_parameters()) assign(p.key(), p.value());
  for (auto& b : module.named_buffers()) assign(b.key(), b.value());
  if (used != by_name.size()) throw CheckpointMismatch("checkpoint holds tensors the model does not have");
}

fs::path sidecar_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".json"); }

void save_checkpoint(const fs::path& path, const ParameterState& state, const CheckpointMeta& meta) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  for (const auto& [name, t] : state) archive.write(encode_key(name), t);
  const std::string meta_text = to_json(meta).dump();
  archive.write(kMetadataKey, c10::IValue(meta_text));
  archive.save_to(path.string());
  std::ofstream side(sidecar_path(path));
  if (!side) throw Error("cannot write checkpoint sidecar for " + path.string());
  side << to_json(meta).dump(2) << '\n';
}

void save_checkpoint(const fs::path& path, const Detector& model, const CheckpointMeta& meta) {
  save_checkpoint(path, capture_state(model.module()), meta);
}

namespace {

torch::serialize::InputArchive open_archive(const fs::path& path) {
  if (!fs::exists(path)) throw CheckpointMismatch("checkpoint not found: " + path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw CheckpointMismatch("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return archive;
}

CheckpointMeta meta_from_archive(torch::serialize::InputArchive& archive, const fs::path& path) {
  c10::IValue value;
  if (!archive.try_read(kMetadataKey, value) || !value.isString())
    throw CheckpointMismatch("checkpoint has no metadata entry: " + path.string());
  try {
    return checkpoint_meta_from_json(json::parse(value.toStringRef()));
  } catch (const json::exception& e) {
    throw CheckpointMismatch(std::string("corrupt checkpoint metadata: ") + e.what());
  }
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const fs::path& path) {
  auto archive = open_archive(path);
  return meta_from_archive(archive, path);
}

ParameterState read_checkpoint_state(const fs::path& path) {
  auto archive = open_archive(path);
  ParameterState state;
  for (const auto& key : archive.keys()) {
    if (key == kMetadataKey) continue;
    torch::Tensor t;
    archive.read(key, t);
    state.emplace_back(decode_key(key), t);
  }
  return state;
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  const CheckpointMeta meta = read_checkpoint_meta(path);
  LoadedCheckpoint out{Detector(meta.spec), meta};
  restore_state(out.model.module(), read_checkpoint_state(path));
  out.model.eval();
  return out;
}

CheckpointMeta load_checkpoint_into(const fs::path& path, Detector& model) {
  const CheckpointMeta meta = read_checkpoint_meta(path);
  if (!(meta.spec == model.spec())) throw CheckpointMismatch("checkpoint architecture does not match the model");
  restore_state(model.module(), read_checkpoint_state(path));
  return meta;
}

}  // namespace floodforensics
