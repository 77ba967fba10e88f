#include "floodforensics/models.hpp"

#include <bit>

#include "floodforensics/errors.hpp"

namespace floodforensics {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

std::string_view to_string(BackboneFamily f) {
  switch (f) {
    case BackboneFamily::residual50: return "residual50";
    case BackboneFamily::residualTiny: return "residualTiny";
    case BackboneFamily::xceptionLike: return "xceptionLike";
  }
  return "residual50";
}

BackboneFamily parse_backbone_family(std::string_view name) {
  if (name == "residual50") return BackboneFamily::residual50;
  if (name == "residualTiny") return BackboneFamily::residualTiny;
  if (name == "xceptionLike") return BackboneFamily::xceptionLike;
  throw InvalidConfig("unknown backbone family '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::hybrid: return "hybrid";
    case ModelKind::plain: return "plain";
    case ModelKind::cat: return "cat";
    case ModelKind::mul: return "mul";
  }
  return "hybrid";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "hybrid") return ModelKind::hybrid;
  if (name == "plain") return ModelKind::plain;
  if (name == "cat") return ModelKind::cat;
  if (name == "mul") return ModelKind::mul;
  throw InvalidConfig("unknown model kind '" + std::string(name) + "'");
}

void BackboneSpec::validate() const {
  if (feature_channels <= 0) throw ConfigError("feature_channels must be positive");
  if (family == BackboneFamily::residual50) {
    if (output_stride != 32) throw ConfigError("residual50 has output stride 32");
    if (feature_channels != 2048) throw ConfigError("residual50 produces 2048 feature channels");
    return;
  }
  if (output_stride < 2 || output_stride > 32 || !std::has_single_bit(static_cast<unsigned>(output_stride)))
    throw ConfigError("output_stride must be a power of two in [2, 32]");
}

void ModelSpec::validate() const {
  backbone.validate();
  if (kind == ModelKind::hybrid && head_channels <= 0) throw ConfigError("head_channels must be positive");
  for (float s : channel_std)
    if (!(s > 0)) throw ConfigError("channel_std components must be positive");
}

namespace {

nn::Conv2d conv(int in, int out, int k, int stride = 1, int groups = 1, bool bias = false) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).groups(groups).bias(bias));
}

int log2_exact(int v) { return std::countr_zero(static_cast<unsigned>(v)); }

// Sequential with a concrete forward so it can sit inside another Sequential.
struct StageImpl : nn::SequentialImpl {
  using nn::SequentialImpl::SequentialImpl;
  torch::Tensor forward(torch::Tensor x) { return nn::SequentialImpl::forward(x); }
};
TORCH_MODULE(Stage);

}  // namespace

BottleneckImpl::BottleneckImpl(int in_channels, int width, int stride) {
  const int out = width * 4;
  conv1 = register_module("conv1", conv(in_channels, width, 1));
  bn1 = register_module("bn1", nn::BatchNorm2d(width));
  conv2 = register_module("conv2", conv(width, width, 3, stride));
  bn2 = register_module("bn2", nn::BatchNorm2d(width));
  conv3 = register_module("conv3", conv(width, out, 1));
  bn3 = register_module("bn3", nn::BatchNorm2d(out));
  if (stride != 1 || in_channels != out)
    downsample = register_module("downsample", nn::Sequential(conv(in_channels, out, 1, stride), nn::BatchNorm2d(out)));
}

torch::Tensor BottleneckImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1(conv1(x)));
  y = torch::relu(bn2(conv2(y)));
  y = bn3(conv3(y));
  return torch::relu(y + (downsample ? downsample->forward(x) : x));
}

BasicBlockImpl::BasicBlockImpl(int in_channels, int out_channels, int stride) {
  conv1 = register_module("conv1", conv(in_channels, out_channels, 3, stride));
  bn1 = register_module("bn1", nn::BatchNorm2d(out_channels));
  conv2 = register_module("conv2", conv(out_channels, out_channels, 3));
  bn2 = register_module("bn2", nn::BatchNorm2d(out_channels));
  if (stride != 1 || in_channels != out_channels)
    downsample = register_module(
        "downsample", nn::Sequential(conv(in_channels, out_channels, 1, stride), nn::BatchNorm2d(out_channels)));
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1(conv1(x)));
  y = bn2(conv2(y));
  return torch::relu(y + (downsample ? downsample->forward(x) : x));
}

SeparableConvImpl::SeparableConvImpl(int in_channels, int out_channels) {
  depthwise = register_module("depthwise", conv(in_channels, in_channels, 3, 1, in_channels));
  pointwise = register_module("pointwise", conv(in_channels, out_channels, 1));
  bn = register_module("bn", nn::BatchNorm2d(out_channels));
}

torch::Tensor SeparableConvImpl::forward(const torch::Tensor& x) { return bn(pointwise(depthwise(x))); }

namespace {

// Xception entry-flow block: two separable convs, max-pool /2, strided 1x1 shortcut.
class XceptionDownImpl : public nn::Module {
 public:
  XceptionDownImpl(int in, int out) {
    sep1 = register_module("sep1", SeparableConv(in, out));
    sep2 = register_module("sep2", SeparableConv(out, out));
    shortcut = register_module("shortcut", nn::Sequential(conv(in, out, 1, 2), nn::BatchNorm2d(out)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto y = sep1(torch::relu(x));
    y = sep2(torch::relu(y));
    y = F::max_pool2d(y, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
    return y + shortcut->forward(x);
  }

 private:
  SeparableConv sep1{nullptr}, sep2{nullptr};
  nn::Sequential shortcut{nullptr};
};
TORCH_MODULE(XceptionDown);

// Middle-flow block: three separable convs with an identity shortcut.
class XceptionMiddleImpl : public nn::Module {
 public:
  explicit XceptionMiddleImpl(int width) {
    for (int i = 0; i < 3; ++i) seps.push_back(register_module("sep" + std::to_string(i + 1), SeparableConv(width, width)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto y = x;
    for (auto& s : seps) y = s(torch::relu(y));
    return y + x;
  }

 private:
  std::vector<SeparableConv> seps;
};
TORCH_MODULE(XceptionMiddle);

}  // namespace

BackboneImpl::BackboneImpl(const BackboneSpec& spec, int in_channels) : spec_(spec), in_channels_(in_channels) {
  spec_.validate();
  if (in_channels != 3 && in_channels != 4) throw ConfigError("backbone input must have 3 or 4 channels");
  body = nn::Sequential();
  switch (spec_.family) {
    case BackboneFamily::residual50: build_residual50(); break;
    case BackboneFamily::residualTiny: build_residual_tiny(); break;
    case BackboneFamily::xceptionLike: build_xception_like(); break;
  }
  register_module("body", body);
}

void BackboneImpl::build_residual50() {
  body->push_back("conv1", nn::Conv2d(nn::Conv2dOptions(in_channels_, 64, 7).stride(2).padding(3).bias(false)));
  body->push_back("bn1", nn::BatchNorm2d(64));
  body->push_back("relu", nn::ReLU());
  body->push_back("maxpool", nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  const std::array<int, 4> blocks{3, 4, 6, 3};
  const std::array<int, 4> widths{64, 128, 256, 512};
  int in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    Stage layer;
    for (int b = 0; b < blocks[stage]; ++b) {
      const int stride = (b == 0 && stage > 0) ? 2 : 1;
      layer->push_back(Bottleneck(in, widths[stage], stride));
      in = widths[stage] * 4;
    }
    body->push_back("layer" + std::to_string(stage + 1), layer);
  }
}

void BackboneImpl::build_residual_tiny() {
  const int c = spec_.feature_channels;
  body->push_back("conv1", conv(in_channels_, c, 3));
  body->push_back("bn1", nn::BatchNorm2d(c));
  body->push_back("relu", nn::ReLU());
  for (int s = 0; s < log2_exact(spec_.output_stride); ++s) body->push_back("stage" + std::to_string(s + 1), BasicBlock(c, c, 2));
}

void BackboneImpl::build_xception_like() {
  const int channels = spec_.feature_channels;
  const int stem1 = std::clamp(channels / 64, 4, 32);
  const int stem2 = 2 * stem1;
  body->push_back("conv1", conv(in_channels_, stem1, 3, 2));
  body->push_back("bn1", nn::BatchNorm2d(stem1));
  body->push_back("relu1", nn::ReLU());
  body->push_back("conv2", conv(stem1, stem2, 3));
  body->push_back("bn2", nn::BatchNorm2d(stem2));
  body->push_back("relu2", nn::ReLU());

  const int down_blocks = log2_exact(spec_.output_stride) - 1;
  int in = stem2;
  for (int k = 1; k <= down_blocks; ++k) {
    const int width = std::max(8, channels >> (down_blocks - k + 1));
    body->push_back("entry" + std::to_string(k), XceptionDown(in, width));
    in = width;
  }
  const int middle = channels >= 1024 ? 8 : 1;
  for (int k = 1; k <= middle; ++k) body->push_back("middle" + std::to_string(k), XceptionMiddle(in));
  body->push_back("exit", SeparableConv(in, channels));
  body->push_back("exit_relu", nn::ReLU());
}

torch::Tensor BackboneImpl::forward(const torch::Tensor& x) { return body->forward(x); }

DetectionHeadImpl::DetectionHeadImpl(int feature_channels) {
  fc = register_module("fc", nn::Linear(feature_channels, 1));
}

torch::Tensor DetectionHeadImpl::forward(const torch::Tensor& features) {
  auto pooled = features.mean({2, 3});
  return fc(pooled).squeeze(1);
}

LocalizationHeadImpl::LocalizationHeadImpl(int feature_channels, int head_channels, int upsample) : upsample_(upsample) {
  conv1 = register_module("conv1", conv(feature_channels, head_channels, 3, 1, 1, true));
  conv2 = register_module("conv2", conv(head_channels, 1, 1, 1, 1, true));
}

torch::Tensor LocalizationHeadImpl::forward(const torch::Tensor& features) {
  auto prob = torch::sigmoid(conv2(torch::relu(conv1(features))));
  if (upsample_ != 1) {
    const std::vector<int64_t> size{features.size(2) * upsample_, features.size(3) * upsample_};
    prob = F::interpolate(prob, F::InterpolateFuncOptions().size(size).mode(torch::kBilinear).align_corners(false));
  }
  return prob.squeeze(1);
}

namespace {

void check_input(const torch::Tensor& images, int channels, int stride) {
  if (images.dim() != 4) throw ShapeError("expected a batch of shape [N, C, H, W]");
  if (images.size(0) < 1) throw ShapeError("batch must contain at least one image");
  if (images.size(1) != channels)
    throw ShapeError("expected " + std::to_string(channels) + " input channels, got " + std::to_string(images.size(1)));
  if (images.size(2) % stride != 0 || images.size(3) % stride != 0)
    throw ConfigError("input size " + std::to_string(images.size(2)) + "x" + std::to_string(images.size(3)) +
                      " is not divisible by output stride " + std::to_string(stride));
}

torch::Tensor mask_as_nchw(const torch::Tensor& masks, const torch::Tensor& images) {
  auto m = masks.dim() == 3 ? masks.unsqueeze(1) : masks;
  if (m.dim() != 4 || m.size(1) != 1 || m.size(0) != images.size(0) || m.size(2) != images.size(2) ||
      m.size(3) != images.size(3))
    throw ShapeError("mask batch must be [N, H, W] or [N, 1, H, W] matching the images");
  return m.to(images.dtype());
}

}  // namespace

HybridNetImpl::HybridNetImpl(const BackboneSpec& spec, int head_channels) {
  if (head_channels <= 0) throw ConfigError("head_channels must be positive");
  // Construction order fixes the initialization stream: backbone, detection, localization.
  backbone = register_module("backbone", Backbone(spec, 3));
  detection = register_module("detection", DetectionHead(spec.feature_channels));
  localization = register_module("localization", LocalizationHead(spec.feature_channels, head_channels, spec.output_stride));
}

ForwardResult HybridNetImpl::forward(const torch::Tensor& images) {
  check_input(images, 3, backbone->spec().output_stride);
  ForwardResult r;
  r.features = backbone(images);
  r.logits = detection(r.features);
  r.scores = torch::sigmoid(r.logits);
  r.maps = localization(detach_localization_ ? r.features.detach() : r.features);
  return r;
}

BaselineNetImpl::BaselineNetImpl(ModelKind kind, const BackboneSpec& spec, const std::array<float, 3>& channel_mean,
                                 const std::array<float, 3>& channel_std)
    : kind_(kind) {
  if (kind == ModelKind::hybrid) throw ConfigError("hybrid is not a baseline kind");
  backbone = register_module("backbone", Backbone(spec, kind == ModelKind::cat ? 4 : 3));
  detection = register_module("detection", DetectionHead(spec.feature_channels));
  auto zero = torch::empty({1, 3, 1, 1});
  for (int c = 0; c < 3; ++c) zero[0][c][0][0] = -channel_mean[c] / channel_std[c];
  normalized_zero_ = register_buffer("normalized_zero", zero);
}

ForwardResult BaselineNetImpl::forward(const torch::Tensor& images, const std::optional<torch::Tensor>& masks) {
  const int stride = backbone->spec().output_stride;
  torch::Tensor input = images;
  switch (kind_) {
    case ModelKind::plain: check_input(images, 3, stride); break;
    case ModelKind::mul: {
      check_input(images, 3, stride);
      if (!masks) throw MissingMask("the MUL baseline requires a mask batch");
      const auto m = mask_as_nchw(*masks, images);
      // Equivalent to multiplying the unit-domain image, then normalizing.
      input = images * m + normalized_zero_ * (1 - m);
      break;
    }
    case ModelKind::cat:
      if (images.dim() == 4 && images.size(1) == 3) {
        if (!masks) throw MissingMask("the CAT baseline requires a 4-channel batch or a mask batch");
        input = concat_mask_channel(images, *masks);
      }
      check_input(input, 4, stride);
      break;
    case ModelKind::hybrid: break;
  }
  ForwardResult r;
  r.features = backbone(input);
  r.logits = detection(r.features);
  r.scores = torch::sigmoid(r.logits);
  return r;
}

torch::Tensor concat_mask_channel(const torch::Tensor& images, const torch::Tensor& masks) {
  if (images.dim() != 4 || images.size(1) != 3) throw ShapeError("expected a 3-channel batch");
  return torch::cat({images, mask_as_nchw(masks, images)}, 1);
}

Detector::Detector(const ModelSpec& spec) : spec_(spec), net_(HybridNet(nullptr)) {
  spec_.validate();
  if (spec_.kind == ModelKind::hybrid)
    net_ = HybridNet(spec_.backbone, spec_.head_channels);
  else
    net_ = BaselineNet(spec_.kind, spec_.backbone, spec_.channel_mean, spec_.channel_std);
}

ForwardResult Detector::forward(const torch::Tensor& images, const std::optional<torch::Tensor>& masks) {
  if (auto* h = std::get_if<HybridNet>(&net_)) return (*h)->forward(images);
  return std::get<BaselineNet>(net_)->forward(images, masks);
}

torch::nn::Module& Detector::module() {
  return std::visit([](auto& n) -> torch::nn::Module& { return *n; }, net_);
}

const torch::nn::Module& Detector::module() const {
  return std::visit([](const auto& n) -> const torch::nn::Module& { return *n; }, net_);
}

HybridNet build_hybrid(const BackboneSpec& backbone, int head_channels) { return HybridNet(backbone, head_channels); }

BaselineNet build_baseline(ModelKind kind, const BackboneSpec& backbone, const std::array<float, 3>& channel_mean,
                           const std::array<float, 3>& channel_std) {
  return BaselineNet(kind, backbone, channel_mean, channel_std);
}

std::vector<HybridOutput> forward_hybrid(HybridNet& model, const torch::Tensor& batch) {
  std::optional<torch::NoGradGuard> no_grad;
  if (!model->is_training()) no_grad.emplace();
  const auto r = model->forward(batch);
  const auto scores = r.scores.detach().to(torch::kFloat32).contiguous();
  const auto maps = r.maps.detach().to(torch::kFloat32).contiguous();
  std::vector<HybridOutput> out(static_cast<std::size_t>(batch.size(0)));
  const int h = static_cast<int>(maps.size(1));
  const int w = static_cast<int>(maps.size(2));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].detection_score = scores[static_cast<int64_t>(i)].item<float>();
    out[i].height = h;
    out[i].width = w;
    const auto m = maps[static_cast<int64_t>(i)];
    out[i].localization_map.assign(m.data_ptr<float>(), m.data_ptr<float>() + static_cast<std::size_t>(h) * w);
  }
  return out;
}

torch::Tensor forward_baseline(BaselineNet& model, const torch::Tensor& batch, const std::optional<torch::Tensor>& masks) {
  std::optional<torch::NoGradGuard> no_grad;
  if (!model->is_training()) no_grad.emplace();
  return model->forward(batch, masks).scores;
}

int copy_matching_parameters(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard no_grad;
  const auto src_params = from.named_parameters();
  const auto src_buffers = from.named_buffers();
  int copied = 0;
  for (auto& p : to.named_parameters()) {
    if (const auto* s = src_params.find(p.key()); s && s->sizes() == p.value().sizes()) {
      p.value().copy_(*s);
      ++copied;
    }
  }
  for (auto& b : to.named_buffers()) {
    if (const auto* s = src_buffers.find(b.key()); s && s->sizes() == b.value().sizes()) {
      b.value().copy_(*s);
      ++copied;
    }
  }
  return copied;
}

}  // namespace floodforensics
