#pragma once

#include <string>
#include <vector>

#include <torch/nn.h>

#include "inkline/alphabet.hpp"
#include "inkline/config.hpp"
#include "inkline/style_encoder.hpp"

namespace inkline {

/// Scaled dot-product attention over `heads` heads. Masked entries hold -inf.
class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int model_dim, int heads);
  /// query (B, Tq, d), key/value (B, Tk, d), mask broadcastable to (Tq, Tk)
  /// with -inf at forbidden positions (undefined tensor for none).
  torch::Tensor forward(const torch::Tensor& query, const torch::Tensor& key,
                        const torch::Tensor& value, const torch::Tensor& mask = {});

 private:
  torch::nn::Linear q_{nullptr}, k_{nullptr}, v_{nullptr}, o_{nullptr};
  int heads_;
};
TORCH_MODULE(MultiHeadAttention);

/// Post-norm encoder layer: self-attention and feed-forward sublayers.
class EncoderLayerImpl : public torch::nn::Module {
 public:
  EncoderLayerImpl(int model_dim, int heads, int ff, double dropout);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  MultiHeadAttention attn_{nullptr};
  torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(EncoderLayer);

/// Post-norm decoder layer: causal self-attention, attention over the image
/// memory, feed-forward.
class DecoderLayerImpl : public torch::nn::Module {
 public:
  DecoderLayerImpl(int model_dim, int heads, int ff, double dropout);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& memory,
                        const torch::Tensor& causal_mask);

 private:
  MultiHeadAttention self_attn_{nullptr}, cross_attn_{nullptr};
  torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
  torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(DecoderLayer);

/// (length, dim) fixed sinusoidal position table.
torch::Tensor sinusoidal_positions(int64_t length, int64_t dim);

/// (T, T) mask with -inf above the diagonal.
torch::Tensor causal_mask(int64_t length);

struct DecodeResult {
  std::string text;
  std::vector<int> symbols;
  std::vector<float> confidence;  // softmax probability of each emitted symbol
};

/// R: truncated ResNet34 trunk, height folded into channels, linear map to
/// the model width, transformer encoder and autoregressive decoder.
/// Output classes are the alphabet plus epsilon (|A| + 1); the decoder input
/// vocabulary adds a start token.
class RecognizerImpl : public torch::nn::Module {
 public:
  RecognizerImpl(const ModelConfig& config, int alphabet_size);

  /// (B, 1, 64, W) -> memory (B, S, d).
  torch::Tensor encode(const torch::Tensor& images);
  /// Decoder logits (B, T, |A|+1) for decoder inputs (B, T).
  torch::Tensor decode_logits(const torch::Tensor& memory, const torch::Tensor& inputs);
  /// Teacher forcing: inputs are [start, t_0, ..., t_{T-2}].
  torch::Tensor forward(const torch::Tensor& images, const torch::Tensor& targets);
  /// Argmax decoding (eval mode) until epsilon or `max_length` steps.
  std::vector<DecodeResult> decode_greedy(const torch::Tensor& images, int max_length,
                                          const Alphabet& alphabet);

  /// [start, t_0, ..., t_{T-2}] for targets (B, T).
  torch::Tensor shift_targets(const torch::Tensor& targets) const;

  int alphabet_size() const noexcept { return alphabet_size_; }
  int classes() const noexcept { return alphabet_size_ + 1; }
  int start_index() const noexcept { return alphabet_size_ + 1; }

 private:
  torch::Tensor embed_targets(const torch::Tensor& inputs);

  Backbone trunk_{nullptr};
  torch::nn::Linear project_{nullptr};
  torch::nn::Embedding target_embed_{nullptr};
  torch::nn::ModuleList encoder_{nullptr}, decoder_{nullptr};
  torch::nn::Linear classifier_{nullptr};
  torch::nn::Dropout drop_{nullptr};
  int alphabet_size_;
  int model_dim_;
};
TORCH_MODULE(Recognizer);

/// Positions scored by the content loss: every position before true_length
/// plus the first epsilon (the end marker) when one fits. Returns (B, T) bool.
torch::Tensor content_mask(const torch::Tensor& lengths, int64_t text_length);

/// KL(target || prediction) averaged over scored positions. Targets are
/// one-hot, optionally smoothed over the |A|+1 classes. Throws
/// ContractViolation when a row has no characters (true_length 0).
torch::Tensor loss_content(const torch::Tensor& logits, const torch::Tensor& targets,
                           const torch::Tensor& lengths, double label_smoothing = 0.0);

}  // namespace inkline
