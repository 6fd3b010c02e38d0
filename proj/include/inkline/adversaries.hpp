#pragma once

#include <vector>

#include <torch/nn.h>

namespace inkline {

inline constexpr double kProbabilityFloor = 1e-7;

/// Pre-activation residual block followed by a 2x average pool (ceil mode,
/// skipped along a dimension that is already 1).
class CriticBlockImpl : public torch::nn::Module {
 public:
  CriticBlockImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
};
TORCH_MODULE(CriticBlock);

/// Shared trunk of D and W: one conv layer, six residual blocks with average
/// pooling, global average pooling, linear head. D has one output (a logit
/// passed through sigmoid), W has N writer logits.
class CriticImpl : public torch::nn::Module {
 public:
  CriticImpl(int width, int outputs);
  /// (B, 1, 64, L) -> (B, C) pooled features.
  torch::Tensor features(const torch::Tensor& images);
  /// (B, outputs) logits.
  torch::Tensor forward(const torch::Tensor& images);
  int outputs() const noexcept { return outputs_; }
  int feature_channels() const noexcept { return feature_channels_; }

 private:
  torch::nn::Conv2d stem_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::Linear head_{nullptr};
  int outputs_;
  int feature_channels_ = 0;
};
TORCH_MODULE(Critic);

/// D(x) in (0, 1) for a batch of equal-width images.
torch::Tensor discriminate(Critic& discriminator, const torch::Tensor& images);

/// D(x) evaluated one image at a time; widths may differ.
torch::Tensor discriminate(Critic& discriminator, const std::vector<torch::Tensor>& images);

/// Writer logits, one image at a time.
torch::Tensor classify_writer(Critic& writer_classifier, const std::vector<torch::Tensor>& images);

/// mean log D(x) + mean log(1 - D(x_bar)), probabilities clamped at 1e-7.
/// D ascends this value.
torch::Tensor loss_discriminative(const torch::Tensor& real_prob, const torch::Tensor& fake_prob);

/// Non-saturating generator term: -mean log D(x_bar).
torch::Tensor loss_generator_adversarial(const torch::Tensor& fake_prob);

/// Cross-entropy of writer logits (B, N) against writer indices (B).
torch::Tensor loss_writer(const torch::Tensor& logits, const torch::Tensor& targets);

}  // namespace inkline
