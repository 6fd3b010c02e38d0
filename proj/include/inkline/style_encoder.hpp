#pragma once

#include <string>

#include <torch/nn.h>

#include "inkline/dataset.hpp"

namespace inkline {

/// ResNet basic block: two 3x3 convs with group normalization and an
/// additive (projected when shapes change) shortcut.
class BasicBlockImpl : public torch::nn::Module {
 public:
  BasicBlockImpl(int in_channels, int out_channels, int stride);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(BasicBlock);

enum class BackboneKind { ResNet34, Vgg19 };

BackboneKind backbone_from_string(const std::string& name);

/// Convolutional trunk truncated at total stride 16.
///
/// ResNet34: 7x7/2 stem, 3x3/2 max pool, then 3, 4 and 6 basic blocks at
/// widths w, 2w, 4w (the last two stages stride 2). VGG19: conv groups of
/// 2, 2, 4, 4 at widths w, 2w, 4w, 8w, each closed by a 2x2 max pool.
/// Maps (B, C_in, 64, L) to (B, out_channels(), 4, L/16).
class BackboneImpl : public torch::nn::Module {
 public:
  BackboneImpl(BackboneKind kind, int in_channels, int width);
  torch::Tensor forward(const torch::Tensor& x);
  int out_channels() const noexcept { return out_channels_; }

 private:
  torch::nn::Sequential body_{nullptr};
  int out_channels_ = 0;
};
TORCH_MODULE(Backbone);

/// S: K periodically padded style images stacked as input channels.
class StyleEncoderImpl : public torch::nn::Module {
 public:
  StyleEncoderImpl(BackboneKind kind, int style_images, int width);
  /// (B, K, 64, L) -> F_s of shape (B, C_s, 4, L/16). L must be a multiple of 16.
  torch::Tensor forward(const torch::Tensor& styles);
  int style_images() const noexcept { return style_images_; }
  int out_channels() const noexcept { return trunk_->out_channels(); }

 private:
  Backbone trunk_{nullptr};
  int style_images_ = 0;
};
TORCH_MODULE(StyleEncoder);

/// Validate a StyleSet (shared writer, K images, height 64) and periodically
/// pad each image to L. Returns (K, 64, L).
torch::Tensor style_tensor(const StyleSet& style, int k, int target_width);

/// StyleSet from dataset positions; mixed writers are a ContractViolation.
StyleSet style_set_from(const Dataset& dataset, const std::vector<std::size_t>& indices);

}  // namespace inkline
