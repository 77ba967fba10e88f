#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "floodforensics/data_pipeline.hpp"
#include "floodforensics/image.hpp"
#include "floodforensics/models.hpp"

namespace floodforensics {

struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // row-major, min-max normalized to [0,1]
  std::string target = "detection_logit";
};

/// Min-max normalization; a constant map becomes all zeros.
Heatmap normalize_heatmap(std::vector<float> raw, int height, int width);

/// Gradient-weighted class activation map: channel weights are the spatial
/// mean of d(logit)/d(features); the rectified weighted channel sum is
/// bilinearly upsampled to out_height x out_width and normalized.
/// `features` is [1,C,h,w] and must be part of the graph producing `logit`.
Heatmap cam_from_features(const torch::Tensor& features, const torch::Tensor& logit, int out_height, int out_width);

/// CAM of the detection logit for a single normalized image [1,C,H,W].
Heatmap cam_map(Detector& model, const torch::Tensor& image, const std::optional<torch::Tensor>& mask = std::nullopt);

/// Blue-to-red colour ramp for v in [0,1].
std::array<std::uint8_t, 3> color_ramp(float v);

struct Panel {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;
};

/// Horizontal strip: input | ground truth | predicted mask | CAM overlay.
/// The predicted-mask column is dropped when `pred` is nullopt. The overlay
/// blends the ramp colour with opacity 0.5 * heat.
Panel render_panel(const ImageTensor& image, const FloodMask& gt, const std::optional<FloodMask>& pred,
                   const Heatmap& heatmap);

void write_panel(const std::filesystem::path& path, const Panel& panel);

}  // namespace floodforensics
