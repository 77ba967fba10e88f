#include "floodforensics/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "floodforensics/batching.hpp"
#include "floodforensics/errors.hpp"
#include "floodforensics/random.hpp"

namespace floodforensics {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw TrainConfigError("epochs must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw TrainConfigError("learning_rate must be positive");
  if (batch_size < 1) throw TrainConfigError("batch_size must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0))
    throw TrainConfigError("invalid Adam hyperparameters");
  loss_weights.validate();
  preprocess.validate();
}

json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"seed", cfg.seed},
          {"lambda_det", cfg.loss_weights.lambda_det},
          {"lambda_loc", cfg.loss_weights.lambda_loc},
          {"optimizer", {{"name", "adam"}, {"beta1", cfg.adam_beta1}, {"beta2", cfg.adam_beta2}, {"eps", cfg.adam_eps}}},
          {"real_mask_mode", std::string(to_string(cfg.real_mask_mode))},
          {"selection", cfg.selection == Selection::best_validation ? "best_validation" : "final_epoch"},
          {"deterministic", cfg.deterministic},
          {"preprocess",
           {{"target_size", cfg.preprocess.target_size},
            {"channel_mean", cfg.preprocess.channel_mean},
            {"channel_std", cfg.preprocess.channel_std},
            {"augment_factors", cfg.preprocess.augment_factors},
            {"augment_enabled", cfg.preprocess.augment_enabled}}}};
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_det_loss", r.train_det_loss},
          {"train_loc_loss", r.train_loc_loss},
          {"train_total_loss", r.train_total_loss},
          {"val_total_loss", r.val_total_loss},
          {"val_det_accuracy", r.val_det_accuracy},
          {"wall_seconds", r.wall_seconds}};
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.train_det_loss = j.at("train_det_loss").get<double>();
  r.train_loc_loss = j.at("train_loc_loss").get<double>();
  r.train_total_loss = j.at("train_total_loss").get<double>();
  r.val_total_loss = j.at("val_total_loss").get<double>();
  r.val_det_accuracy = j.at("val_det_accuracy").get<double>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

std::size_t select_best(const TrainHistory& history) {
  if (history.epochs.empty()) throw TrainConfigError("cannot select from an empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.epochs.size(); ++i)
    if (history.epochs[i].val_total_loss < history.epochs[best].val_total_loss) best = i;
  return best;
}

namespace {

struct BatchLosses {
  torch::Tensor det;
  torch::Tensor loc;  // undefined for detector-only models
  torch::Tensor total;
  torch::Tensor scores;
};

class Batcher {
 public:
  Batcher(const std::vector<LabeledImage>& samples, const TrainConfig& cfg, bool localization, bool needs_input_mask)
      : samples_(samples), cfg_(cfg), localization_(localization), needs_input_mask_(needs_input_mask) {}

  struct Batch {
    torch::Tensor images;
    torch::Tensor labels;
    std::optional<torch::Tensor> input_masks;
    std::optional<torch::Tensor> targets;
  };

  Batch make(std::span<const std::size_t> indices, std::optional<std::uint64_t> augment_seed) const {
    std::vector<ImageTensor> augmented;
    std::vector<const ImageTensor*> images;
    std::vector<const FloodMask*> input_masks;
    std::vector<FloodMask> targets_storage;
    std::vector<float> labels;
    augmented.reserve(indices.size());
    targets_storage.reserve(indices.size());
    for (std::size_t idx : indices) {
      const LabeledImage& s = samples_[idx];
      if (augment_seed) {
        augmented.push_back(augment(s.image, cfg_.preprocess.augment_factors, derive_seed(*augment_seed, idx)));
        images.push_back(&augmented.back());
      } else {
        images.push_back(&s.image);
      }
      labels.push_back(static_cast<float>(s.label));
      if (needs_input_mask_) input_masks.push_back(&*s.mask);
      if (localization_)
        targets_storage.push_back(
            *localization_target(s.label, s.mask, s.image.height(), s.image.width(), cfg_.real_mask_mode));
    }
    Batch b;
    b.images = to_batch(images, cfg_.preprocess);
    b.labels = torch::tensor(labels);
    if (needs_input_mask_) b.input_masks = to_mask_batch(input_masks);
    if (localization_) {
      std::vector<const FloodMask*> ptrs;
      for (const auto& m : targets_storage) ptrs.push_back(&m);
      b.targets = to_mask_batch(ptrs);
    }
    return b;
  }

 private:
  const std::vector<LabeledImage>& samples_;
  const TrainConfig& cfg_;
  bool localization_;
  bool needs_input_mask_;
};

BatchLosses compute_losses(Detector& model, const Batcher::Batch& b, const TrainConfig& cfg) {
  const auto out = model.forward(b.images, b.input_masks);
  BatchLosses l;
  l.scores = out.scores;
  l.det = detection_loss(out.scores, b.labels);
  if (model.has_localization()) {
    l.loc = localization_loss(out.maps, *b.targets);
    l.total = total_loss(l.det, l.loc, cfg.loss_weights);
  } else {
    l.total = l.det;
  }
  return l;
}

std::vector<LabeledImage> resized(const std::vector<LabeledImage>& samples, const PreprocessConfig& cfg) {
  std::vector<LabeledImage> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.image.height() == cfg.target_size && s.image.width() == cfg.target_size &&
        (!s.mask || (s.mask->height() == cfg.target_size && s.mask->width() == cfg.target_size)))
      out.push_back(s);
    else
      out.push_back(resize_sample(s, cfg));
  }
  return out;
}

void check_samples(const std::vector<LabeledImage>& samples, const Detector& model, const TrainConfig& cfg,
                   const char* which) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.label != 0 && s.label != 1) throw TrainConfigError(std::string(which) + " sample has a non-binary label");
    const bool needs_input_mask = model.spec().kind == ModelKind::mul || model.spec().kind == ModelKind::cat;
    if (needs_input_mask && !s.mask)
      throw TrainConfigError(std::string(which) + " sample " + std::to_string(i) + " has no mask (required by " +
                             std::string(to_string(model.spec().kind)) + ")");
    if (model.has_localization() && !localization_target(s.label, s.mask, 1, 1, cfg.real_mask_mode))
      throw TrainConfigError(std::string(which) + " sample " + std::to_string(i) +
                             " has no localization target (hybrid training needs a mask for every sample)");
  }
}

ValidationResult validate(Detector& model, const Batcher& batcher, std::size_t n, const TrainConfig& cfg) {
  torch::NoGradGuard no_grad;
  model.eval();
  double loss_sum = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t count = std::min<std::size_t>(cfg.batch_size, n - start);
    const auto b = batcher.make(std::span(idx).subspan(start, count), std::nullopt);
    const auto l = compute_losses(model, b, cfg);
    loss_sum += l.total.item<double>() * count;
    const auto predicted = (l.scores >= 0.5).to(torch::kFloat32);
    correct += static_cast<std::size_t>((predicted == b.labels).sum().item<int64_t>());
  }
  return {loss_sum / n, static_cast<double>(correct) / n};
}

std::vector<EpochRecord> read_history(const fs::path& path) {
  std::vector<EpochRecord> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(epoch_record_from_json(json::parse(line)));
  return out;
}

fs::path epoch_checkpoint(const fs::path& run_dir, int epoch) {
  return run_dir / "checkpoints" / ("epoch_" + std::to_string(epoch));
}

void copy_checkpoint(const fs::path& from, const fs::path& to) {
  fs::copy_file(from, to, fs::copy_options::overwrite_existing);
  fs::copy_file(sidecar_path(from), sidecar_path(to), fs::copy_options::overwrite_existing);
}

}  // namespace

ValidationResult validation_metrics(Detector& model, const std::vector<LabeledImage>& val_input,
                                    const TrainConfig& cfg) {
  cfg.validate();
  if (val_input.empty()) throw TrainConfigError("validation set is empty");
  check_samples(val_input, model, cfg, "validation");
  const auto val_set = resized(val_input, cfg.preprocess);
  const bool needs_input_mask = model.spec().kind == ModelKind::mul || model.spec().kind == ModelKind::cat;
  const Batcher batcher(val_set, cfg, model.has_localization(), needs_input_mask);
  return validate(model, batcher, val_set.size(), cfg);
}

TrainResult train(Detector& model, const std::vector<LabeledImage>& train_input,
                  const std::vector<LabeledImage>& val_input, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (train_input.empty()) throw TrainConfigError("training set is empty");
  if (val_input.empty()) throw TrainConfigError("validation set is empty");
  check_samples(train_input, model, cfg, "training");
  check_samples(val_input, model, cfg, "validation");
  if (options.resume && !options.run_dir) throw TrainConfigError("resume requires a run directory");

  const bool old_deterministic = at::globalContext().deterministicAlgorithms();
  if (cfg.deterministic) at::globalContext().setDeterministicAlgorithms(true, false);

  const auto train_set = resized(train_input, cfg.preprocess);
  const auto val_set = resized(val_input, cfg.preprocess);
  const bool needs_input_mask = model.spec().kind == ModelKind::mul || model.spec().kind == ModelKind::cat;
  const Batcher train_batcher(train_set, cfg, model.has_localization(), needs_input_mask);
  const Batcher val_batcher(val_set, cfg, model.has_localization(), needs_input_mask);

  torch::optim::Adam optimizer(model.parameters(), torch::optim::AdamOptions(cfg.learning_rate)
                                                       .betas({cfg.adam_beta1, cfg.adam_beta2})
                                                       .eps(cfg.adam_eps)
                                                       .weight_decay(0));

  TrainResult result;
  CheckpointMeta meta{model.spec(), cfg.loss_weights, 0, 0, options.model_tag, cfg.preprocess.target_size};
  int first_epoch = 1;

  if (options.run_dir) {
    fs::create_directories(*options.run_dir / "checkpoints");
    const fs::path history_path = *options.run_dir / "history.jsonl";
    if (options.resume && fs::exists(history_path)) {
      result.history.epochs = read_history(history_path);
      if (!result.history.epochs.empty()) {
        const int last = result.history.epochs.back().epoch;
        if (last >= cfg.epochs) {
          const fs::path best = *options.run_dir / "best";
          result.best_meta = load_checkpoint_into(best, model);
          result.best_state = capture_state(model.module());
          result.resumed_finished_run = true;
          at::globalContext().setDeterministicAlgorithms(old_deterministic, false);
          return result;
        }
        load_checkpoint_into(epoch_checkpoint(*options.run_dir, last), model);
        const fs::path optim_path = epoch_checkpoint(*options.run_dir, last).string() + ".optim";
        if (fs::exists(optim_path)) torch::load(optimizer, optim_path.string());
        first_epoch = last + 1;
        const std::size_t best = select_best(result.history);
        result.best_meta = read_checkpoint_meta(epoch_checkpoint(*options.run_dir, result.history.epochs[best].epoch));
        result.best_state = read_checkpoint_state(epoch_checkpoint(*options.run_dir, result.history.epochs[best].epoch));
      }
    } else {
      std::ofstream(history_path, std::ios::trunc);
    }
  }

  std::vector<std::size_t> order(train_set.size());
  int step = 0;
  for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5348u, static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);
    const std::uint64_t augment_seed = derive_seed(cfg.seed, 0x4155u, static_cast<std::uint64_t>(epoch));

    model.train();
    double det_sum = 0, loc_sum = 0, total_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      const auto batch = train_batcher.make(std::span(order).subspan(start, count),
                                            cfg.preprocess.augment_enabled ? std::optional(augment_seed) : std::nullopt);
      const auto losses = compute_losses(model, batch, cfg);
      const double total = losses.total.item<double>();
      ++step;
      if (!std::isfinite(total)) {
        at::globalContext().setDeterministicAlgorithms(old_deterministic, false);
        throw DivergenceError(epoch, step, "non-finite training loss");
      }
      optimizer.zero_grad();
      losses.total.backward();
      optimizer.step();

      result.history.step_total_losses.push_back(total);
      det_sum += losses.det.item<double>() * count;
      if (losses.loc.defined()) loc_sum += losses.loc.item<double>() * count;
      total_sum += total * count;
    }

    const auto val = validate(model, val_batcher, val_set.size(), cfg);
    if (!std::isfinite(val.total_loss)) {
      at::globalContext().setDeterministicAlgorithms(old_deterministic, false);
      throw DivergenceError(epoch, step, "non-finite validation loss");
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_det_loss = det_sum / train_set.size();
    rec.train_loc_loss = loc_sum / train_set.size();
    rec.train_total_loss = total_sum / train_set.size();
    rec.val_total_loss = val.total_loss;
    rec.val_det_accuracy = val.accuracy;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);

    meta.epoch = epoch;
    meta.val_loss = val.total_loss;
    const bool is_best = select_best(result.history) == result.history.epochs.size() - 1;
    const bool keep = cfg.selection == Selection::final_epoch ? epoch == cfg.epochs : is_best;
    if (keep) {
      result.best_state = capture_state(model.module());
      result.best_meta = meta;
    }

    if (options.run_dir) {
      const fs::path ckpt = epoch_checkpoint(*options.run_dir, epoch);
      save_checkpoint(ckpt, model, meta);
      torch::save(optimizer, ckpt.string() + ".optim");
      if (keep) copy_checkpoint(ckpt, *options.run_dir / "best");
      std::ofstream(*options.run_dir / "history.jsonl", std::ios::app) << to_json(rec).dump() << '\n';
    }
    if (options.on_epoch) options.on_epoch(rec);
  }

  restore_state(model.module(), result.best_state);
  model.eval();
  at::globalContext().setDeterministicAlgorithms(old_deterministic, false);
  return result;
}

TrainResult train(Detector& model, const std::vector<SampleRecord>& train_records,
                  const std::vector<SampleRecord>& val_records, const TrainConfig& cfg, const TrainOptions& options) {
  if (train_records.empty()) throw TrainConfigError("training set is empty");
  if (val_records.empty()) throw TrainConfigError("validation set is empty");
  cfg.validate();
  auto load_all = [&](const std::vector<SampleRecord>& records) {
    std::vector<LabeledImage> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(load_resized(r, cfg.preprocess));
    return out;
  };
  return train(model, load_all(train_records), load_all(val_records), cfg, options);
}

}  // namespace floodforensics
