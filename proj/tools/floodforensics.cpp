// floodforensics: prepare manifests, train, evaluate, report and explain.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "floodforensics/batching.hpp"
#include "floodforensics/checkpoint.hpp"
#include "floodforensics/data_pipeline.hpp"
#include "floodforensics/errors.hpp"
#include "floodforensics/evaluation.hpp"
#include "floodforensics/explain.hpp"
#include "floodforensics/report.hpp"
#include "floodforensics/run_config.hpp"
#include "floodforensics/trainer.hpp"

namespace fs = std::filesystem;
namespace ff = floodforensics;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kInputError = 2, kDiverged = 3, kCheckpointMismatch = 4 };

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

fs::path resolve_input(const fs::path& p) {
  if (p.is_absolute() || fs::exists(p)) return p;
  return ff::data_root(fs::current_path()) / p;
}

std::vector<ff::SampleRecord> read_records(const fs::path& manifest) {
  const fs::path path = resolve_input(manifest);
  if (!fs::exists(path)) throw ff::InvalidConfig("manifest not found: " + manifest.string());
  return ff::read_manifest(path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ff::InvalidConfig("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ff::Error("failed to write " + path.string());
}

// --attack takes inline JSON or a path to a JSON file.
ff::AttackSpec parse_attack_arg(const std::string& arg) {
  json j;
  try {
    const bool inline_json = !arg.empty() && (arg.front() == '{' || arg.front() == '"');
    j = json::parse(inline_json ? arg : read_text(arg));
  } catch (const json::exception& e) {
    throw ff::InvalidConfig("--attack is not valid JSON: " + std::string(e.what()));
  }
  if (j.is_string()) j = json{{"name", j}};
  return ff::attack_spec_from_json(j);
}

std::string attack_slug(const std::optional<ff::AttackSpec>& attack) {
  if (!attack || attack->name == ff::AttackName::none) return "none";
  const ff::AttackSpec a = attack->resolved();
  std::string slug(ff::to_string(a.name));
  for (const auto& [k, v] : a.params.items()) {
    std::string value = v.dump();
    for (char& c : value)
      if (c == '.') c = 'p';
    slug += "_" + k + value;
  }
  return slug;
}

int label_from_string(const std::string& s) {
  if (s == "1" || s == "fake") return 1;
  if (s == "0" || s == "real") return 0;
  throw ff::InvalidConfig("--label must be 0/real or 1/fake");
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string images, masks, label, source = "synthetic", split, out;
};

int cmd_prepare(const PrepareArgs& a) {
  std::optional<fs::path> masks;
  if (!a.masks.empty()) masks = fs::path(a.masks);
  std::optional<ff::Split> split;
  if (!a.split.empty()) split = ff::parse_split(a.split);
  const ff::Manifest m =
      ff::build_manifest(a.images, label_from_string(a.label), masks, ff::parse_source(a.source), split);
  for (const auto& s : m.skipped) warn("skipped " + s.path.string() + ": " + s.reason);
  ff::write_manifest(a.out, m.records);
  std::cout << "wrote " << m.records.size() << " records to " << a.out << '\n';
  return kOk;
}

struct TrainArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  bool resume = false;
};

int cmd_train(const TrainArgs& a) {
  ff::RunConfig cfg = ff::load_run_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (!a.out.empty()) cfg.output_dir = a.out;

  std::vector<ff::SampleRecord> train_records, val_records;
  for (const auto& m : cfg.train_manifests) {
    auto r = ff::read_manifest(m);
    train_records.insert(train_records.end(), r.begin(), r.end());
  }
  if (cfg.val_manifests.empty()) {
    auto [tr, va] = ff::split_manifest(train_records, cfg.train_fraction, cfg.train.seed);
    train_records = std::move(tr);
    val_records = std::move(va);
  } else {
    for (const auto& m : cfg.val_manifests) {
      auto r = ff::read_manifest(m);
      val_records.insert(val_records.end(), r.begin(), r.end());
    }
  }

  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "config.json", ff::to_json(cfg).dump(2) + "\n");

  ff::Detector model(cfg.model);
  ff::TrainOptions opts;
  opts.run_dir = cfg.output_dir;
  opts.resume = a.resume;
  opts.model_tag = cfg.model_tag;
  opts.on_epoch = [&](const ff::EpochRecord& r) {
    std::printf("epoch %3d/%d  det %.5f  loc %.5f  total %.5f  val %.5f  val_acc %.3f\n", r.epoch, cfg.train.epochs,
                r.train_det_loss, r.train_loc_loss, r.train_total_loss, r.val_total_loss, r.val_det_accuracy);
    std::fflush(stdout);
  };
  const ff::TrainResult result = ff::train(model, train_records, val_records, cfg.train, opts);
  if (result.resumed_finished_run) {
    std::cout << "run already complete; nothing to do\n";
    return kOk;
  }
  std::printf("best epoch %d (val loss %.5f): %s\n", result.best_meta.epoch, result.best_meta.val_loss,
              (cfg.output_dir / "best").string().c_str());
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, real_manifest, attack, out = "reports", model_tag;
  std::vector<std::string> manifests;
  std::optional<std::uint64_t> seed;
  int batch_size = 16;
};

int cmd_eval(const EvalArgs& a) {
  ff::LoadedCheckpoint ck = ff::load_checkpoint(a.checkpoint);
  const std::string tag = !a.model_tag.empty()           ? a.model_tag
                          : !ck.meta.model_tag.empty() ? ck.meta.model_tag
                                                       : std::string(ff::to_string(ck.meta.spec.kind));
  ff::EvalOptions opts;
  opts.batch_size = a.batch_size;
  opts.preprocess.channel_mean = ck.meta.spec.channel_mean;
  opts.preprocess.channel_std = ck.meta.spec.channel_std;
  opts.preprocess.target_size = ck.meta.input_size;
  if (!a.attack.empty()) {
    opts.attack = parse_attack_arg(a.attack);
    if (a.seed) opts.attack->seed = *a.seed;
    opts.attack = opts.attack->resolved();
  }

  std::vector<std::vector<ff::SampleRecord>> sets;
  for (const auto& m : a.manifests) sets.push_back(read_records(m));
  std::vector<ff::ScoredSet> scored;
  for (const auto& records : sets) scored.push_back(ff::score_records(ck.model, records, opts));

  // Designated real set for pairing AUC of all-fake manifests.
  std::optional<ff::ScoredSet> real;
  if (!a.real_manifest.empty()) {
    const fs::path rp = resolve_input(a.real_manifest);
    bool found = false;
    for (std::size_t i = 0; i < a.manifests.size(); ++i)
      if (fs::exists(resolve_input(a.manifests[i])) && fs::equivalent(resolve_input(a.manifests[i]), rp)) {
        real = scored[i];
        found = true;
        break;
      }
    if (!found) real = ff::score_records(ck.model, read_records(a.real_manifest), opts);
    if (real->scores_with_label(0).empty()) throw ff::InvalidConfig("--real-manifest contains no real images");
  } else {
    for (const auto& s : scored)
      if (!s.scores_with_label(0).empty() && s.scores_with_label(1).empty()) {
        real = s;
        break;
      }
  }

  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const ff::EvalReport r = ff::summarize(scored[i], opts, tag, real ? &*real : nullptr);
    json j = ff::to_json(r);
    j["metadata"]["manifest"] = fs::path(a.manifests[i]).filename().string();
    const fs::path file =
        out_dir / (tag + "__" + fs::path(a.manifests[i]).stem().string() + "__" + attack_slug(opts.attack) + ".json");
    write_text(file, j.dump(2) + "\n");
    std::cout << file.string() << '\n';
    if (!r.auc && r.tpr && !r.tnr) warn("no real images to pair with " + r.dataset_tag + "; AUC omitted");
  }
  return kOk;
}

struct ReportArgs {
  std::vector<std::string> files;
  std::string format = "markdown", out;
  bool plots = false;
};

int cmd_report(const ReportArgs& a) {
  std::vector<ff::EvalReport> reports;
  for (const auto& f : a.files) {
    try {
      reports.push_back(ff::eval_report_from_json(json::parse(read_text(f))));
    } catch (const json::exception& e) {
      throw ff::InvalidConfig(f + ": " + e.what());
    }
  }
  const std::string table = ff::render_table(reports, ff::parse_report_format(a.format));
  if (a.out.empty())
    std::cout << table;
  else
    write_text(a.out, table);
  if (a.plots) {
    const fs::path dir = a.out.empty() ? fs::current_path() : fs::absolute(a.out).parent_path();
    for (const auto& p : ff::render_bar_charts(reports, dir)) std::cerr << "wrote " << p.string() << '\n';
  }
  return kOk;
}

struct ExplainArgs {
  std::string checkpoint, manifest, out = "panels";
  int n = 3;
};

int cmd_explain(const ExplainArgs& a) {
  if (a.n < 0) throw ff::InvalidConfig("--n must be non-negative");
  ff::LoadedCheckpoint ck = ff::load_checkpoint(a.checkpoint);
  const auto records = read_records(a.manifest);
  if (a.n == 0) return kOk;
  if (static_cast<std::size_t>(a.n) > records.size())
    warn("--n " + std::to_string(a.n) + " exceeds the " + std::to_string(records.size()) +
         " records in the manifest; rendering all of them");
  if (!ck.model.has_localization()) warn("checkpoint has no localization head; panels omit the predicted mask");

  const std::string tag = ck.meta.model_tag.empty() ? std::string(ff::to_string(ck.meta.spec.kind)) : ck.meta.model_tag;
  ff::PreprocessConfig pre;
  pre.augment_enabled = false;
  pre.channel_mean = ck.meta.spec.channel_mean;
  pre.channel_std = ck.meta.spec.channel_std;
  pre.target_size = ck.meta.input_size;
  const bool needs_mask = ck.meta.spec.kind == ff::ModelKind::mul || ck.meta.spec.kind == ff::ModelKind::cat;
  fs::create_directories(a.out);

  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(a.n), records.size());
  for (std::size_t i = 0; i < count; ++i) {
    const ff::LabeledImage s = ff::load_resized(records[i], pre);
    const ff::FloodMask gt = s.mask ? *s.mask : ff::FloodMask(s.image.height(), s.image.width());
    const torch::Tensor batch = ff::to_batch({&s.image}, pre);
    std::optional<torch::Tensor> mask_batch;
    if (needs_mask) {
      if (!s.mask) throw ff::MissingMask(records[i].image_path.string() + " has no mask");
      mask_batch = ff::to_mask_batch({&*s.mask});
    }
    const ff::Heatmap heat = ff::cam_map(ck.model, batch, mask_batch);
    std::optional<ff::FloodMask> pred;
    if (ck.model.has_localization()) {
      torch::NoGradGuard no_grad;
      const auto out = ck.model.forward(batch);
      pred = ff::binarize(ff::to_vector(out.maps[0]), s.image.height(), s.image.width(), 0.5f);
    }
    const fs::path file = fs::path(a.out) / (records[i].image_path.stem().string() + "_" + tag + "_panel.png");
    ff::write_panel(file, ff::render_panel(s.image, gt, pred, heat));
    std::cout << file.string() << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection and localization of GAN-generated flood images"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Scan an image directory into a JSONL manifest");
  prepare->add_option("--images", prep.images, "Image directory")->required();
  prepare->add_option("--masks", prep.masks, "Mask directory (paired by file stem)");
  prepare->add_option("--label", prep.label, "0/real or 1/fake")->required();
  prepare->add_option("--source", prep.source, "RWFI, WSOC, StreetG, WebG132, WebG504 or synthetic");
  prepare->add_option("--split", prep.split, "train, val or test");
  prepare->add_option("--out", prep.out, "Output manifest (.jsonl)")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model from a run configuration");
  train->add_option("--config", tr.config, "Run configuration (JSON)")->required();
  train->add_option("--seed", tr.seed, "Override train.seed");
  train->add_option("--out", tr.out, "Override output_dir");
  train->add_flag("--resume", tr.resume, "Continue an interrupted run");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score manifests and write one report per manifest");
  eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval->add_option("--manifest", ev.manifests, "Manifest to evaluate (repeatable)")->required();
  eval->add_option("--real-manifest", ev.real_manifest, "Real set used to pair AUC for all-fake manifests");
  eval->add_option("--attack", ev.attack, "Attack spec: inline JSON or a JSON file");
  eval->add_option("--seed", ev.seed, "Override the attack seed");
  eval->add_option("--model-tag", ev.model_tag, "Row label in reports");
  eval->add_option("--batch-size", ev.batch_size)->check(CLI::PositiveNumber);
  eval->add_option("--out", ev.out, "Report directory");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Render evaluation reports as a table");
  report->add_option("reports", rep.files, "Report JSON files")->required();
  report->add_option("--format", rep.format, "markdown or csv");
  report->add_option("--out", rep.out, "Table file (default: stdout)");
  report->add_flag("--plots", rep.plots, "Also write grouped bar charts per attack");

  ExplainArgs ex;
  auto* explain = app.add_subcommand("explain", "Render CAM panels for the first n records");
  explain->add_option("--checkpoint", ex.checkpoint, "Checkpoint file")->required();
  explain->add_option("--manifest", ex.manifest, "Manifest")->required();
  explain->add_option("--n", ex.n, "Number of panels");
  explain->add_option("--out", ex.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*prepare) return cmd_prepare(prep);
    if (*train) return cmd_train(tr);
    if (*eval) return cmd_eval(ev);
    if (*report) return cmd_report(rep);
    if (*explain) return cmd_explain(ex);
  } catch (const ff::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const ff::CheckpointMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckpointMismatch;
  } catch (const ff::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
