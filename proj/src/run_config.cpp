#include "floodforensics/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "floodforensics/checkpoint.hpp"
#include "floodforensics/errors.hpp"

namespace floodforensics {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidConfig("'" + where + "' must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) throw InvalidConfig("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidConfig("config key '" + where + "." + key + "' has the wrong type");
  }
}

std::vector<fs::path> resolve_manifests(const json& list, const fs::path& base, const std::string& where) {
  if (!list.is_array()) throw InvalidConfig("'" + where + "' must be an array of paths");
  std::vector<fs::path> out;
  for (const auto& item : list) {
    if (!item.is_string()) throw InvalidConfig("'" + where + "' entries must be strings");
    fs::path p(item.get<std::string>());
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw InvalidConfig("manifest listed in '" + where + "' does not exist: " + p.string());
    out.push_back(p.lexically_normal());
  }
  return out;
}

}  // namespace

fs::path data_root(const fs::path& fallback) {
  if (const char* env = std::getenv("FLOODFORENSICS_DATA_ROOT"); env && *env) return fs::path(env);
  return fallback;
}

ModelSpec parse_model_section(const json& m) {
  check_keys(m, {"kind", "backbone", "head_channels"}, "model");
  ModelSpec spec;
  std::string kind = "hybrid";
  read(m, "kind", kind, "model");
  spec.kind = parse_model_kind(kind);
  if (m.contains("backbone")) {
    const json& b = m["backbone"];
    check_keys(b, {"family", "output_stride", "feature_channels"}, "model.backbone");
    std::string family = "residual50";
    read(b, "family", family, "model.backbone");
    spec.backbone.family = parse_backbone_family(family);
    if (spec.backbone.family == BackboneFamily::residualTiny) spec.backbone = BackboneSpec::residual_tiny();
    read(b, "output_stride", spec.backbone.output_stride, "model.backbone");
    read(b, "feature_channels", spec.backbone.feature_channels, "model.backbone");
  }
  read(m, "head_channels", spec.head_channels, "model");
  return spec;
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  check_keys(j, {"model", "train", "preprocess", "data", "output_dir", "model_tag"}, "");
  RunConfig cfg;

  if (j.contains("model")) cfg.model = parse_model_section(j["model"]);

  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t,
               {"epochs", "learning_rate", "batch_size", "seed", "lambda_det", "lambda_loc", "adam_beta1", "adam_beta2",
                "adam_eps", "real_mask_mode", "selection", "deterministic"},
               "train");
    read(t, "epochs", cfg.train.epochs, "train");
    read(t, "learning_rate", cfg.train.learning_rate, "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
    read(t, "seed", cfg.train.seed, "train");
    read(t, "lambda_det", cfg.train.loss_weights.lambda_det, "train");
    read(t, "lambda_loc", cfg.train.loss_weights.lambda_loc, "train");
    read(t, "adam_beta1", cfg.train.adam_beta1, "train");
    read(t, "adam_beta2", cfg.train.adam_beta2, "train");
    read(t, "adam_eps", cfg.train.adam_eps, "train");
    read(t, "deterministic", cfg.train.deterministic, "train");
    std::string mode = "water", selection = "best_validation";
    read(t, "real_mask_mode", mode, "train");
    read(t, "selection", selection, "train");
    cfg.train.real_mask_mode = parse_real_mask_mode(mode);
    if (selection == "best_validation")
      cfg.train.selection = Selection::best_validation;
    else if (selection == "final_epoch")
      cfg.train.selection = Selection::final_epoch;
    else
      throw InvalidConfig("train.selection must be best_validation or final_epoch");
  }

  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    check_keys(p, {"target_size", "channel_mean", "channel_std", "augment_factors", "augment_enabled"}, "preprocess");
    read(p, "target_size", cfg.train.preprocess.target_size, "preprocess");
    read(p, "channel_mean", cfg.train.preprocess.channel_mean, "preprocess");
    read(p, "channel_std", cfg.train.preprocess.channel_std, "preprocess");
    read(p, "augment_factors", cfg.train.preprocess.augment_factors, "preprocess");
    read(p, "augment_enabled", cfg.train.preprocess.augment_enabled, "preprocess");
  }
  cfg.model.channel_mean = cfg.train.preprocess.channel_mean;
  cfg.model.channel_std = cfg.train.preprocess.channel_std;

  const fs::path root = data_root(base_dir);
  if (!j.contains("data")) throw InvalidConfig("config is missing the 'data' section");
  {
    const json& d = j["data"];
    check_keys(d, {"train_manifests", "val_manifests", "train_fraction"}, "data");
    if (!d.contains("train_manifests")) throw InvalidConfig("config is missing 'data.train_manifests'");
    cfg.train_manifests = resolve_manifests(d["train_manifests"], root, "data.train_manifests");
    if (d.contains("val_manifests")) cfg.val_manifests = resolve_manifests(d["val_manifests"], root, "data.val_manifests");
    read(d, "train_fraction", cfg.train_fraction, "data");
    if (!(cfg.train_fraction > 0 && cfg.train_fraction < 1)) throw InvalidConfig("data.train_fraction must lie in (0,1)");
  }

  std::string out = "run";
  read(j, "output_dir", out, "");
  cfg.output_dir = fs::path(out).is_relative() ? base_dir / out : fs::path(out);
  cfg.model_tag = std::string(to_string(cfg.model.kind)) + "_" + std::string(to_string(cfg.model.backbone.family));
  read(j, "model_tag", cfg.model_tag, "");

  try {
    cfg.model.validate();
    cfg.train.validate();
  } catch (const ConfigError& e) {
    throw InvalidConfig(e.what());
  } catch (const TrainConfigError& e) {
    throw InvalidConfig(e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidConfig("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_run_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json to_json(const RunConfig& cfg) {
  json j;
  json model = to_json(cfg.model);
  model.erase("channel_mean");
  model.erase("channel_std");
  j["model"] = model;
  json train = to_json(cfg.train);
  j["preprocess"] = train["preprocess"];
  train.erase("preprocess");
  const json optimizer = train["optimizer"];
  train.erase("optimizer");
  train["adam_beta1"] = optimizer["beta1"];
  train["adam_beta2"] = optimizer["beta2"];
  train["adam_eps"] = optimizer["eps"];
  j["train"] = train;
  json data;
  data["train_fraction"] = cfg.train_fraction;
  data["train_manifests"] = json::array();
  for (const auto& p : cfg.train_manifests) data["train_manifests"].push_back(p.string());
  data["val_manifests"] = json::array();
  for (const auto& p : cfg.val_manifests) data["val_manifests"].push_back(p.string());
  j["data"] = data;
  j["output_dir"] = cfg.output_dir.string();
  j["model_tag"] = cfg.model_tag;
  return j;
}

}  // namespace floodforensics
