#include "floodforensics/evaluation.hpp"

#include "floodforensics/batching.hpp"
#include "floodforensics/errors.hpp"

namespace floodforensics {

std::vector<double> ScoredSet::scores_with_label(int label) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] == label) out.push_back(scores[i]);
  return out;
}

namespace {

LabeledImage prepare(const LabeledImage& raw, const EvalOptions& options, std::uint64_t index) {
  LabeledImage attacked;
  attacked.label = raw.label;
  attacked.mask = raw.mask;
  attacked.image = options.attack ? apply_attack(*options.attack, raw.image, index) : raw.image;
  return resize_sample(attacked, options.preprocess);
}

void score_batch(Detector& model, const std::vector<LabeledImage>& batch, const EvalOptions& options, ScoredSet& out) {
  std::vector<const ImageTensor*> images;
  std::vector<const FloodMask*> masks;
  const bool needs_input_mask = model.spec().kind == ModelKind::mul || model.spec().kind == ModelKind::cat;
  for (const auto& s : batch) {
    images.push_back(&s.image);
    if (needs_input_mask) {
      if (!s.mask) throw MissingMask(std::string(to_string(model.spec().kind)) + " model needs a mask for every image");
      masks.push_back(&*s.mask);
    }
  }
  torch::NoGradGuard no_grad;
  const auto result = model.forward(to_batch(images, options.preprocess),
                                    needs_input_mask ? std::optional(to_mask_batch(masks)) : std::nullopt);
  const auto scores = to_vector(result.scores);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.scores.push_back(scores[i]);
    out.labels.push_back(batch[i].label);
    if (result.maps.defined() && batch[i].mask) {
      const auto map = to_vector(result.maps[static_cast<int64_t>(i)]);
      out.pred_masks.push_back(
          binarize(map, static_cast<int>(result.maps.size(1)), static_cast<int>(result.maps.size(2)), options.mask_threshold));
      out.gt_masks.push_back(*batch[i].mask);
    }
  }
}

}  // namespace

ScoredSet score_samples(Detector& model, const std::vector<LabeledImage>& samples, const EvalOptions& options,
                        std::string dataset_tag) {
  options.preprocess.validate();
  model.eval();
  ScoredSet out;
  out.dataset_tag = std::move(dataset_tag);
  std::vector<LabeledImage> batch;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    batch.push_back(prepare(samples[i], options, i));
    if (static_cast<int>(batch.size()) == options.batch_size || i + 1 == samples.size()) {
      score_batch(model, batch, options, out);
      batch.clear();
    }
  }
  return out;
}

ScoredSet score_records(Detector& model, const std::vector<SampleRecord>& records, const EvalOptions& options) {
  options.preprocess.validate();
  model.eval();
  ScoredSet out;
  out.dataset_tag = dataset_tag_of(records);
  std::vector<LabeledImage> batch;
  for (std::size_t i = 0; i < records.size(); ++i) {
    LabeledImage raw;
    raw.label = records[i].label;
    raw.image = decode_image(records[i].image_path);
    if (records[i].mask_path) raw.mask = decode_mask(*records[i].mask_path);
    batch.push_back(prepare(raw, options, i));
    if (static_cast<int>(batch.size()) == options.batch_size || i + 1 == records.size()) {
      score_batch(model, batch, options, out);
      batch.clear();
    }
  }
  return out;
}

EvalReport summarize(const ScoredSet& set, const EvalOptions& options, const std::string& model_tag,
                     const ScoredSet* paired_real) {
  EvalReport r;
  r.model_tag = model_tag;
  r.dataset_tag = set.dataset_tag;
  r.n_images = set.scores.size();
  if (options.attack && options.attack->name != AttackName::none) {
    const AttackSpec a = options.attack->resolved();
    r.attack = AttackTag{std::string(to_string(a.name)), a.params};
    if (a.name == AttackName::gaussian_noise) r.attack->params["seed"] = a.seed;
  }

  const ConfusionCounts c = confusion(set.scores, set.labels, options.detection_threshold);
  if (c.tn + c.fp > 0) r.tnr = static_cast<double>(c.tn) / (c.tn + c.fp);
  if (c.tp + c.fn > 0) r.tpr = static_cast<double>(c.tp) / (c.tp + c.fn);

  const auto pos = set.scores_with_label(1);
  auto neg = set.scores_with_label(0);
  if (neg.empty() && paired_real) neg = paired_real->scores_with_label(0);
  if (!pos.empty() && !neg.empty()) r.auc = auc(pos, neg);

  if (!set.gt_masks.empty()) {
    r.bpa = balanced_pixel_accuracy(set.pred_masks, set.gt_masks);
    r.iou = iou(set.pred_masks, set.gt_masks);
  }

  r.metadata["detection_threshold"] = options.detection_threshold;
  r.metadata["mask_threshold"] = options.mask_threshold;
  r.metadata["metric_resolution"] = options.preprocess.target_size;
  if (r.auc && set.scores_with_label(0).empty() && paired_real) r.metadata["auc_paired_with"] = paired_real->dataset_tag;
  if (r.attack && r.attack->name == "jpeg") r.metadata["jpeg_encoder"] = "libjpeg baseline sequential, 4:2:0";
  return r;
}

EvalReport evaluate(Detector& model, const std::vector<SampleRecord>& records, const EvalOptions& options,
                    const std::string& model_tag, const ScoredSet* paired_real) {
  return summarize(score_records(model, records, options), options, model_tag, paired_real);
}

std::string dataset_tag_of(const std::vector<SampleRecord>& records) {
  if (records.empty()) return "empty";
  const Source first = records.front().source;
  for (const auto& r : records)
    if (r.source != first) return "mixed";
  return std::string(to_string(first));
}

}  // namespace floodforensics
