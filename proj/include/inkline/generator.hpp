#pragma once

#include <vector>

#include <torch/nn.h>

#include "inkline/config.hpp"
#include "inkline/content_encoder.hpp"
#include "inkline/style_encoder.hpp"

namespace inkline {

inline constexpr double kAdainEpsilon = 1e-5;

/// alpha * (z - mu(z)) / sqrt(var(z) + 1e-5) + beta with per-sample,
/// per-channel spatial statistics. z is (B, C, H, W); alpha and beta are
/// (B, C) or (C).
torch::Tensor adain(const torch::Tensor& z, const torch::Tensor& alpha, const torch::Tensor& beta);

/// conv -> AdaIN -> ReLU -> conv -> AdaIN, plus identity skip.
class AdainResBlockImpl : public torch::nn::Module {
 public:
  explicit AdainResBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& alpha1,
                        const torch::Tensor& beta1, const torch::Tensor& alpha2,
                        const torch::Tensor& beta2);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(AdainResBlock);

/// G: fuse [F_s; F_c], two AdaIN residual blocks, four nearest x2 upsampling
/// conv modules, 3x3 conv to one channel and tanh.
class GeneratorImpl : public torch::nn::Module {
 public:
  GeneratorImpl(int style_channels, int content_channels, int gen_channels,
                const std::vector<int>& up_channels);
  /// (B, C_s, h, w) and (B, C_c, h, w) -> (B, 1, 16 h, 16 w) in [-1, 1].
  torch::Tensor forward(const torch::Tensor& style, const torch::Tensor& char_map,
                        const AdainParams& params);

 private:
  torch::nn::Conv2d fuse_{nullptr};
  AdainResBlock block1_{nullptr}, block2_{nullptr};
  torch::nn::ModuleList up_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(Generator);

/// H: style encoder, content encoder and generator under one parameter group.
class SynthesizerImpl : public torch::nn::Module {
 public:
  SynthesizerImpl(const ModelConfig& config, int alphabet_size);

  /// (B, K, 64, L) -> F_s.
  torch::Tensor encode_style(const torch::Tensor& styles);
  /// (B, T) symbols aligned to an F_s of spatial size (h, w).
  ContentFeatures encode_content(const torch::Tensor& symbols, int64_t height, int64_t width);
  torch::Tensor decode(const torch::Tensor& style_features, const ContentFeatures& content);
  /// Images in [-1, 1] of shape (B, 1, 64, L).
  torch::Tensor forward(const torch::Tensor& styles, const torch::Tensor& symbols);

  const ModelConfig& config() const noexcept { return config_; }
  StyleEncoder& style_encoder() { return style_; }
  ContentEncoder& content_encoder() { return content_; }
  Generator& generator() { return generator_; }

 private:
  ModelConfig config_;
  StyleEncoder style_{nullptr};
  ContentEncoder content_{nullptr};
  Generator generator_{nullptr};
};
TORCH_MODULE(Synthesizer);

/// Generator output in [-1, 1] to the [0, 1] inverted-intensity convention.
inline torch::Tensor to_data_range(const torch::Tensor& generated) {
  return (generated + 1.0) * 0.5;
}

/// Style-space interpolation: F_s = (1 - l) S(X_A) + l S(X_B) for
/// l = 0, 1/(steps-1), ..., 1 with fixed text. Each step is decoded on its
/// own so the endpoints match plain generation bit for bit.
std::vector<torch::Tensor> interpolate_styles(Synthesizer& synthesizer, const torch::Tensor& symbols,
                                              const torch::Tensor& style_a,
                                              const torch::Tensor& style_b, int steps);

}  // namespace inkline
