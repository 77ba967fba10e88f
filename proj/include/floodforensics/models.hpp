#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <torch/torch.h>

namespace floodforensics {

enum class BackboneFamily { residual50, residualTiny, xceptionLike };

std::string_view to_string(BackboneFamily f);
BackboneFamily parse_backbone_family(std::string_view name);

struct BackboneSpec {
  BackboneFamily family = BackboneFamily::residual50;
  int output_stride = 32;
  int feature_channels = 2048;

  /// residual50 is fixed at stride 32 / 2048 channels; the other families
  /// accept any power-of-two stride in [2, 32].
  void validate() const;

  static BackboneSpec residual50() { return {}; }
  static BackboneSpec residual_tiny(int stride = 4, int channels = 8) {
    return {BackboneFamily::residualTiny, stride, channels};
  }
  static BackboneSpec xception_like(int stride = 32, int channels = 2048) {
    return {BackboneFamily::xceptionLike, stride, channels};
  }

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

/// hybrid: detection + localization. plain/cat/mul: detector-only baselines.
enum class ModelKind { hybrid, plain, cat, mul };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::hybrid;
  BackboneSpec backbone;
  int head_channels = 256;
  // Normalization statistics; the MUL variant needs them to mask in the unit domain.
  std::array<float, 3> channel_mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> channel_std{0.229f, 0.224f, 0.225f};

  void validate() const;
  int input_channels() const { return kind == ModelKind::cat ? 4 : 3; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// ---------------------------------------------------------------------------
// Backbones

class BottleneckImpl : public torch::nn::Module {
 public:
  BottleneckImpl(int in_channels, int width, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(Bottleneck);

class BasicBlockImpl : public torch::nn::Module {
 public:
  BasicBlockImpl(int in_channels, int out_channels, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(BasicBlock);

/// Depthwise 3x3 followed by pointwise 1x1, then batch norm.
class SeparableConvImpl : public torch::nn::Module {
 public:
  SeparableConvImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d depthwise{nullptr}, pointwise{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(SeparableConv);

class BackboneImpl : public torch::nn::Module {
 public:
  BackboneImpl(const BackboneSpec& spec, int in_channels);
  torch::Tensor forward(const torch::Tensor& x);
  const BackboneSpec& spec() const { return spec_; }
  int in_channels() const { return in_channels_; }

 private:
  void build_residual50();
  void build_residual_tiny();
  void build_xception_like();

  BackboneSpec spec_;
  int in_channels_;
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(Backbone);

// ---------------------------------------------------------------------------
// Heads

/// Global average pool + one fully connected layer to a single logit.
class DetectionHeadImpl : public torch::nn::Module {
 public:
  explicit DetectionHeadImpl(int feature_channels);
  torch::Tensor forward(const torch::Tensor& features);  // [N]

 private:
  torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(DetectionHead);

/// 3x3 conv + ReLU + 1x1 conv + sigmoid, bilinearly upsampled by the stride.
class LocalizationHeadImpl : public torch::nn::Module {
 public:
  LocalizationHeadImpl(int feature_channels, int head_channels, int upsample);
  torch::Tensor forward(const torch::Tensor& features);  // [N, H, W]

 private:
  int upsample_;
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(LocalizationHead);

// ---------------------------------------------------------------------------
// Models

struct ForwardResult {
  torch::Tensor features;  // [N, C, H/s, W/s], last backbone stage
  torch::Tensor logits;    // [N]
  torch::Tensor scores;    // [N], sigmoid(logits)
  torch::Tensor maps;      // [N, H, W] localization probabilities; undefined for baselines
};

class HybridNetImpl : public torch::nn::Module {
 public:
  HybridNetImpl(const BackboneSpec& backbone, int head_channels = 256);
  ForwardResult forward(const torch::Tensor& images);

  /// Feed the localization head a detached copy of the features so that it
  /// contributes no gradient to the backbone.
  void set_detach_localization(bool detach) { detach_localization_ = detach; }
  bool detach_localization() const { return detach_localization_; }

  Backbone backbone{nullptr};
  DetectionHead detection{nullptr};
  LocalizationHead localization{nullptr};

 private:
  bool detach_localization_ = false;
};
TORCH_MODULE(HybridNet);

class BaselineNetImpl : public torch::nn::Module {
 public:
  BaselineNetImpl(ModelKind kind, const BackboneSpec& backbone, const std::array<float, 3>& channel_mean,
                  const std::array<float, 3>& channel_std);

  /// `images` are normalized. mul requires `masks` ([N,H,W] or [N,1,H,W] in {0,1});
  /// cat takes a 4-channel batch, or a 3-channel batch plus `masks`.
  ForwardResult forward(const torch::Tensor& images, const std::optional<torch::Tensor>& masks = std::nullopt);

  ModelKind kind() const { return kind_; }

  Backbone backbone{nullptr};
  DetectionHead detection{nullptr};

 private:
  ModelKind kind_;
  torch::Tensor normalized_zero_;  // (0 - mean) / std per channel, [1,3,1,1]
};
TORCH_MODULE(BaselineNet);

/// Append a {0,1} mask as an un-normalized fourth channel.
torch::Tensor concat_mask_channel(const torch::Tensor& images, const torch::Tensor& masks);

/// Owner of either model family behind one interface.
class Detector {
 public:
  explicit Detector(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  bool has_localization() const { return spec_.kind == ModelKind::hybrid; }

  ForwardResult forward(const torch::Tensor& images, const std::optional<torch::Tensor>& masks = std::nullopt);

  torch::nn::Module& module();
  const torch::nn::Module& module() const;
  std::vector<torch::Tensor> parameters() const { return module().parameters(); }

  void train(bool on = true) { module().train(on); }
  void eval() { module().eval(); }
  bool is_training() const { return module().is_training(); }

  HybridNet* hybrid() { return std::get_if<HybridNet>(&net_); }
  BaselineNet* baseline() { return std::get_if<BaselineNet>(&net_); }

 private:
  ModelSpec spec_;
  std::variant<HybridNet, BaselineNet> net_;
};

/// Plain-data view of one sample's hybrid output.
struct HybridOutput {
  float detection_score = 0;
  int height = 0;
  int width = 0;
  std::vector<float> localization_map;  // row-major H x W
};

/// Build helpers mirroring the model zoo.
HybridNet build_hybrid(const BackboneSpec& backbone, int head_channels = 256);
BaselineNet build_baseline(ModelKind kind, const BackboneSpec& backbone,
                           const std::array<float, 3>& channel_mean = {0.485f, 0.456f, 0.406f},
                           const std::array<float, 3>& channel_std = {0.229f, 0.224f, 0.225f});

/// Runs under the module's current mode; gradients are recorded only in training mode.
std::vector<HybridOutput> forward_hybrid(HybridNet& model, const torch::Tensor& batch);
torch::Tensor forward_baseline(BaselineNet& model, const torch::Tensor& batch,
                               const std::optional<torch::Tensor>& masks = std::nullopt);

/// Copy every parameter and buffer whose name exists in both modules with equal shape.
/// Returns the number of tensors copied.
int copy_matching_parameters(const torch::nn::Module& from, torch::nn::Module& to);

}  // namespace floodforensics
