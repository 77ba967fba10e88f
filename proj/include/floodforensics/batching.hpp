#pragma once

#include <vector>

#include <torch/torch.h>

#include "floodforensics/data_pipeline.hpp"
#include "floodforensics/image.hpp"

namespace floodforensics {

/// Normalize unit-domain images and stack them into a float [N,3,H,W] batch.
torch::Tensor to_batch(const std::vector<const ImageTensor*>& images, const PreprocessConfig& cfg);

/// Stack already-normalized images into [N,3,H,W].
torch::Tensor to_batch_normalized(const std::vector<const ImageTensor*>& images);

/// Stack masks into a float [N,H,W] batch of {0,1}.
torch::Tensor to_mask_batch(const std::vector<const FloodMask*>& masks);

/// [H,W] or [1,H,W] tensor to a row-major float vector.
std::vector<float> to_vector(const torch::Tensor& t);

}  // namespace floodforensics
