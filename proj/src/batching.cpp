#include "floodforensics/batching.hpp"

#include <cstring>

#include "floodforensics/errors.hpp"

namespace floodforensics {

torch::Tensor to_batch_normalized(const std::vector<const ImageTensor*>& images) {
  if (images.empty()) throw ShapeError("cannot build an empty batch");
  const int h = images.front()->height();
  const int w = images.front()->width();
  auto batch = torch::empty({static_cast<int64_t>(images.size()), h, w, 3}, torch::kFloat32);
  float* dst = batch.data_ptr<float>();
  const std::size_t stride = static_cast<std::size_t>(h) * w * 3;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height() != h || images[i]->width() != w) throw ShapeError("batch images differ in size");
    std::memcpy(dst + i * stride, images[i]->data().data(), stride * sizeof(float));
  }
  return batch.permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor to_batch(const std::vector<const ImageTensor*>& images, const PreprocessConfig& cfg) {
  auto batch = to_batch_normalized(images);
  const auto mean = torch::tensor(std::vector<float>(cfg.channel_mean.begin(), cfg.channel_mean.end())).view({1, 3, 1, 1});
  const auto std = torch::tensor(std::vector<float>(cfg.channel_std.begin(), cfg.channel_std.end())).view({1, 3, 1, 1});
  return (batch - mean) / std;
}

torch::Tensor to_mask_batch(const std::vector<const FloodMask*>& masks) {
  if (masks.empty()) throw ShapeError("cannot build an empty mask batch");
  const int h = masks.front()->height();
  const int w = masks.front()->width();
  auto batch = torch::empty({static_cast<int64_t>(masks.size()), h, w}, torch::kFloat32);
  float* dst = batch.data_ptr<float>();
  const std::size_t stride = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i]->height() != h || masks[i]->width() != w) throw ShapeError("batch masks differ in size");
    const auto bits = masks[i]->data();
    for (std::size_t k = 0; k < stride; ++k) dst[i * stride + k] = bits[k];
  }
  return batch;
}

std::vector<float> to_vector(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat32).contiguous();
  return {c.data_ptr<float>(), c.data_ptr<float>() + c.numel()};
}

}  // namespace floodforensics
