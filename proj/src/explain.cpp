#include "floodforensics/explain.hpp"

#include <algorithm>
#include <cmath>

#include "floodforensics/batching.hpp"
#include "floodforensics/errors.hpp"

namespace floodforensics {

namespace F = torch::nn::functional;

Heatmap normalize_heatmap(std::vector<float> raw, int height, int width) {
  if (raw.size() != static_cast<std::size_t>(height) * width) throw ShapeError("heatmap size mismatch");
  Heatmap h;
  h.height = height;
  h.width = width;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const float min = *lo, max = *hi;
  if (!(max > min)) {
    h.data.assign(raw.size(), 0.0f);
    return h;
  }
  for (float& v : raw) v = (v - min) / (max - min);
  h.data = std::move(raw);
  return h;
}

Heatmap cam_from_features(const torch::Tensor& features, const torch::Tensor& logit, int out_height, int out_width) {
  if (features.dim() != 4 || features.size(0) != 1) throw Unsupported("CAM needs a [1,C,h,w] spatial feature map");
  if (logit.numel() != 1) throw ShapeError("CAM target must be a single logit");
  const auto grads = torch::autograd::grad({logit.sum()}, {features}, {}, /*retain_graph=*/true)[0];
  torch::NoGradGuard no_grad;
  const auto weights = grads.mean({2, 3}, /*keepdim=*/true);
  auto cam = torch::relu((weights * features).sum(1, /*keepdim=*/true));
  cam = F::interpolate(cam, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{out_height, out_width})
                                .mode(torch::kBilinear)
                                .align_corners(false));
  return normalize_heatmap(to_vector(cam), out_height, out_width);
}

Heatmap cam_map(Detector& model, const torch::Tensor& image, const std::optional<torch::Tensor>& mask) {
  if (image.dim() != 4 || image.size(0) != 1) throw ShapeError("cam_map expects a single image [1,C,H,W]");
  torch::AutoGradMode grad_on(true);
  model.eval();
  const auto out = model.forward(image, mask);
  return cam_from_features(out.features, out.logits, static_cast<int>(image.size(2)), static_cast<int>(image.size(3)));
}

std::array<std::uint8_t, 3> color_ramp(float v) {
  v = std::clamp(v, 0.0f, 1.0f);
  // Piecewise-linear "jet": blue -> cyan -> yellow -> red.
  const auto channel = [v](float centre) {
    return static_cast<std::uint8_t>(std::lround(255.0f * std::clamp(1.5f - std::abs(4.0f * v - centre), 0.0f, 1.0f)));
  };
  return {channel(3.0f), channel(2.0f), channel(1.0f)};
}

Panel render_panel(const ImageTensor& image, const FloodMask& gt, const std::optional<FloodMask>& pred,
                   const Heatmap& heatmap) {
  const int h = image.height(), w = image.width();
  auto same = [&](int hh, int ww) { return hh == h && ww == w; };
  if (!same(gt.height(), gt.width()) || (pred && !same(pred->height(), pred->width())) ||
      !same(heatmap.height, heatmap.width))
    throw ShapeError("panel inputs must share one spatial size");

  const int columns = pred ? 4 : 3;
  Panel p;
  p.height = h;
  p.width = columns * w;
  p.rgb.assign(static_cast<std::size_t>(p.height) * p.width * 3, 0);
  const auto base = to_rgb8(image);
  auto put = [&](int col, int y, int x, std::array<std::uint8_t, 3> rgb) {
    const std::size_t o = (static_cast<std::size_t>(y) * p.width + col * w + x) * 3;
    std::copy(rgb.begin(), rgb.end(), p.rgb.begin() + static_cast<std::ptrdiff_t>(o));
  };
  auto gray = [](std::uint8_t bit) { const std::uint8_t v = bit ? 255 : 0; return std::array<std::uint8_t, 3>{v, v, v}; };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      const std::array<std::uint8_t, 3> px{base[i], base[i + 1], base[i + 2]};
      int col = 0;
      put(col++, y, x, px);
      put(col++, y, x, gray(gt.at(y, x)));
      if (pred) put(col++, y, x, gray(pred->at(y, x)));
      const float heat = heatmap.data[static_cast<std::size_t>(y) * w + x];
      const float alpha = 0.5f * heat;
      const auto ramp = color_ramp(heat);
      std::array<std::uint8_t, 3> blended{};
      for (int c = 0; c < 3; ++c)
        blended[c] = static_cast<std::uint8_t>(std::lround((1 - alpha) * px[c] + alpha * ramp[c]));
      put(col, y, x, blended);
    }
  return p;
}

void write_panel(const std::filesystem::path& path, const Panel& panel) {
  write_png_rgb8(path, panel.rgb, panel.height, panel.width);
}

}  // namespace floodforensics
