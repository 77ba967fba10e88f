#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "floodforensics/errors.hpp"
#include "floodforensics/run_config.hpp"
#include "test_support.hpp"

using namespace floodforensics;
using nlohmann::json;

namespace {

json minimal(const std::string& manifest = "train.jsonl") {
  return {{"data", {{"train_manifests", {manifest}}}}};
}

std::string error_of(const json& j, const std::filesystem::path& base) {
  try {
    parse_run_config(j, base);
  } catch (const InvalidConfig& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfig, DefaultsFollowTheTrainingRecipe) {
  fft::TempDir dir;
  std::ofstream(dir / "train.jsonl") << "";
  const RunConfig cfg = parse_run_config(minimal(), dir.path());
  EXPECT_EQ(cfg.train.epochs, 30);
  EXPECT_EQ(cfg.train.learning_rate, 1e-4);
  EXPECT_EQ(cfg.train.batch_size, 16);
  EXPECT_EQ(cfg.train.loss_weights.lambda_det, 0.4);
  EXPECT_EQ(cfg.train.loss_weights.lambda_loc, 0.6);
  EXPECT_EQ(cfg.train.preprocess.target_size, 224);
  EXPECT_EQ(cfg.train_fraction, 0.8);
  EXPECT_EQ(cfg.model.backbone.family, BackboneFamily::residual50);
  EXPECT_EQ(cfg.model.kind, ModelKind::hybrid);
  ASSERT_EQ(cfg.train_manifests.size(), 1u);
  EXPECT_EQ(cfg.train_manifests[0], (dir / "train.jsonl").lexically_normal());
}

TEST(RunConfig, UnknownKeysAreNamed) {
  fft::TempDir dir;
  std::ofstream(dir / "train.jsonl") << "";
  json j = minimal();
  j["train"] = {{"lr", 0.1}};
  EXPECT_NE(error_of(j, dir.path()).find("train.lr"), std::string::npos);
  j = minimal();
  j["model"] = {{"backbone", {{"famly", "residualTiny"}}}};
  EXPECT_NE(error_of(j, dir.path()).find("model.backbone.famly"), std::string::npos);
  j = minimal();
  j["extra"] = 1;
  EXPECT_NE(error_of(j, dir.path()).find("extra"), std::string::npos);
}

TEST(RunConfig, MissingManifestAndBadValuesRejected) {
  fft::TempDir dir;
  EXPECT_THROW(parse_run_config(minimal("nope.jsonl"), dir.path()), InvalidConfig);
  std::ofstream(dir / "train.jsonl") << "";
  json j = minimal();
  j["train"] = {{"epochs", 0}};
  EXPECT_THROW(parse_run_config(j, dir.path()), InvalidConfig);
  j = minimal();
  j["train"] = {{"epochs", "ten"}};
  EXPECT_THROW(parse_run_config(j, dir.path()), InvalidConfig);
  j = minimal();
  j["model"] = {{"backbone", {{"family", "residual50"}, {"output_stride", 8}}}};
  EXPECT_THROW(parse_run_config(j, dir.path()), InvalidConfig);
}

TEST(RunConfig, DataRootEnvironmentVariable) {
  fft::TempDir base, root;
  std::ofstream(root / "train.jsonl") << "";
  ::setenv("FLOODFORENSICS_DATA_ROOT", root.path().c_str(), 1);
  const RunConfig cfg = parse_run_config(minimal(), base.path());
  ::unsetenv("FLOODFORENSICS_DATA_ROOT");
  EXPECT_EQ(cfg.train_manifests[0], (root / "train.jsonl").lexically_normal());
}

TEST(RunConfig, ResolvedDocumentReparses) {
  fft::TempDir dir;
  std::ofstream(dir / "train.jsonl") << "";
  json j = minimal();
  j["model"] = {{"kind", "plain"}, {"backbone", {{"family", "residualTiny"}, {"output_stride", 8}}}};
  j["train"] = {{"epochs", 3}, {"seed", 11}, {"real_mask_mode", "zeros"}};
  const RunConfig cfg = parse_run_config(j, dir.path());
  const RunConfig again = parse_run_config(to_json(cfg), dir.path());
  EXPECT_EQ(again.model, cfg.model);
  EXPECT_EQ(again.train.epochs, 3);
  EXPECT_EQ(again.train.seed, 11u);
  EXPECT_EQ(again.train.real_mask_mode, RealMaskMode::zeros);
  EXPECT_EQ(again.model_tag, cfg.model_tag);
}
