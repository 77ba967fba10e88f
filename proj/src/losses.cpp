#include "floodforensics/losses.hpp"

#include <cmath>

#include "floodforensics/errors.hpp"

namespace floodforensics {

void LossWeights::validate() const {
  if (!std::isfinite(lambda_det) || !std::isfinite(lambda_loc) || lambda_det < 0 || lambda_loc < 0)
    throw InvalidConfig("loss weights must be finite and non-negative");
  if (lambda_det == 0 && lambda_loc == 0) throw InvalidConfig("loss weights cannot both be zero");
}

namespace {

torch::Tensor binary_cross_entropy_mean(const torch::Tensor& probs, const torch::Tensor& targets, double eps) {
  const auto p = probs.clamp(eps, 1.0 - eps);
  const auto t = targets.to(p.dtype());
  return -(t * torch::log(p) + (1 - t) * torch::log(1 - p)).mean();
}

torch::Tensor binary_cross_entropy_gradient(const torch::Tensor& probs, const torch::Tensor& targets, double eps) {
  const auto t = targets.to(probs.dtype());
  const auto p = probs.clamp(eps, 1.0 - eps);
  const auto inside = (probs >= eps).logical_and(probs <= 1.0 - eps).to(probs.dtype());
  return -(t / p - (1 - t) / (1 - p)) * inside / static_cast<double>(probs.numel());
}

}  // namespace

torch::Tensor detection_loss(const torch::Tensor& scores, const torch::Tensor& labels, double eps) {
  if (scores.dim() != 1 || labels.dim() != 1 || scores.size(0) != labels.size(0))
    throw ShapeError("detection_loss expects scores and labels of equal length N");
  if (scores.size(0) < 1) throw ShapeError("detection_loss needs at least one sample");
  return binary_cross_entropy_mean(scores, labels, eps);
}

torch::Tensor localization_loss(const torch::Tensor& maps, const torch::Tensor& gt_masks, double eps) {
  if (maps.dim() != 3 || maps.sizes() != gt_masks.sizes())
    throw ShapeError("localization_loss expects maps and masks of equal shape N x H x W");
  if (maps.numel() < 1) throw ShapeError("localization_loss needs at least one pixel");
  return binary_cross_entropy_mean(maps, gt_masks, eps);
}

torch::Tensor detection_loss_gradient(const torch::Tensor& scores, const torch::Tensor& labels, double eps) {
  if (scores.dim() != 1 || scores.sizes() != labels.sizes()) throw ShapeError("length mismatch");
  return binary_cross_entropy_gradient(scores, labels, eps);
}

torch::Tensor localization_loss_gradient(const torch::Tensor& maps, const torch::Tensor& gt_masks, double eps) {
  if (maps.dim() != 3 || maps.sizes() != gt_masks.sizes()) throw ShapeError("shape mismatch");
  return binary_cross_entropy_gradient(maps, gt_masks, eps);
}

torch::Tensor total_loss(const torch::Tensor& l_det, const torch::Tensor& l_loc, const LossWeights& w) {
  return w.lambda_det * l_det + w.lambda_loc * l_loc;
}

double total_loss(double l_det, double l_loc, const LossWeights& w) {
  return w.lambda_det * l_det + w.lambda_loc * l_loc;
}

std::string_view to_string(RealMaskMode m) { return m == RealMaskMode::water ? "water" : "zeros"; }

RealMaskMode parse_real_mask_mode(std::string_view name) {
  if (name == "water") return RealMaskMode::water;
  if (name == "zeros") return RealMaskMode::zeros;
  throw InvalidConfig("unknown real mask mode '" + std::string(name) + "'");
}

std::optional<FloodMask> localization_target(int label, const std::optional<FloodMask>& mask, int height, int width,
                                             RealMaskMode mode) {
  if (label == 0 && mode == RealMaskMode::zeros) return FloodMask(height, width, 0);
  return mask;
}

}  // namespace floodforensics
