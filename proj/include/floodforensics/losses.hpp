#pragma once

#include <optional>
#include <string_view>

#include <torch/torch.h>

#include "floodforensics/image.hpp"

namespace floodforensics {

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct LossWeights {
  double lambda_det = 0.4;
  double lambda_loc = 0.6;

  void validate() const;
};

/// Mean binary cross-entropy over N detection scores (negative log-likelihood,
/// so it is non-negative and minimized at perfect predictions).
torch::Tensor detection_loss(const torch::Tensor& scores, const torch::Tensor& labels,
                             double eps = kProbabilityEpsilon);

/// Mean binary cross-entropy over all N*H*W pixels of the localization maps.
torch::Tensor localization_loss(const torch::Tensor& maps, const torch::Tensor& gt_masks,
                                double eps = kProbabilityEpsilon);

/// Closed-form gradients of the two losses with respect to their probability
/// inputs (zero where the input is outside the clamping range).
torch::Tensor detection_loss_gradient(const torch::Tensor& scores, const torch::Tensor& labels,
                                      double eps = kProbabilityEpsilon);
torch::Tensor localization_loss_gradient(const torch::Tensor& maps, const torch::Tensor& gt_masks,
                                         double eps = kProbabilityEpsilon);

torch::Tensor total_loss(const torch::Tensor& l_det, const torch::Tensor& l_loc, const LossWeights& w);
double total_loss(double l_det, double l_loc, const LossWeights& w);

/// Target used for real training images in the localization loss: the
/// natural water mask shipped with the dataset, or an all-zero mask.
enum class RealMaskMode { water, zeros };

std::string_view to_string(RealMaskMode m);
RealMaskMode parse_real_mask_mode(std::string_view name);

/// Localization target for one sample, or nullopt when the sample has no usable target.
std::optional<FloodMask> localization_target(int label, const std::optional<FloodMask>& mask, int height, int width,
                                             RealMaskMode mode);

}  // namespace floodforensics
