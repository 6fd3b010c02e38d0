#pragma once

#include <array>
#include <vector>

#include <torch/nn.h>

namespace inkline {

/// The four ordered (alpha, beta) AdaIN pairs, each (B, C_g).
struct AdainParams {
  std::array<torch::Tensor, 4> alpha;
  std::array<torch::Tensor, 4> beta;

  /// Split a (B, 8 C_g) vector into 8 equal pieces and pair them in order:
  /// pieces 2i and 2i+1 become (alpha_i, beta_i).
  static AdainParams split(const torch::Tensor& packed);
  /// alpha = 1, beta = 0: plain instance normalization.
  static AdainParams identity(int64_t batch, int64_t channels, const torch::TensorOptions& options);
};

/// F_c (character-wise map) and F_c' (global string encoding).
struct ContentFeatures {
  torch::Tensor char_map;  // (B, C_c, h_f, w_f)
  torch::Tensor packed;    // (B, 8 C_g)
  AdainParams adain;
};

/// Column multiplicities for T characters spread over w_f columns. The first
/// (w_f mod T) characters get the extra column. Throws AlignmentError when
/// w_f < T.
std::vector<int> charwise_counts(int text_length, int target_width);

/// Owning character of each of the w_f columns.
std::vector<int64_t> charwise_owner(int text_length, int target_width);

/// Embedding table over the alphabet plus epsilon, g1 (repetition) and g2
/// (a three-layer perceptron over the flattened, epsilon-padded sequence).
class ContentEncoderImpl : public torch::nn::Module {
 public:
  ContentEncoderImpl(int alphabet_size, int embed_dim, int max_text_length, int hidden,
                     int gen_channels);

  /// (B, T) symbol indices -> (B, T, n). Indices must be in [0, |A|].
  torch::Tensor embed(const torch::Tensor& symbols);
  /// (B, T, n) -> (B, n, h_f, w_f).
  torch::Tensor encode_charwise(const torch::Tensor& embedded, int target_height,
                                int target_width);
  /// (B, T) symbols, T <= max_text_length, epsilon-padded to max_text_length
  /// and flattened into g2. Returns (B, 8 C_g).
  torch::Tensor encode_global(const torch::Tensor& symbols);

  ContentFeatures forward(const torch::Tensor& symbols, int target_height, int target_width);

  int alphabet_size() const noexcept { return alphabet_size_; }
  int embed_dim() const noexcept { return embed_dim_; }
  int max_text_length() const noexcept { return max_text_length_; }
  int gen_channels() const noexcept { return gen_channels_; }

 private:
  torch::nn::Embedding table_{nullptr};
  torch::nn::Sequential g2_{nullptr};
  int alphabet_size_;
  int embed_dim_;
  int max_text_length_;
  int gen_channels_;
};
TORCH_MODULE(ContentEncoder);

}  // namespace inkline
