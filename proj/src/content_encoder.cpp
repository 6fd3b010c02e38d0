#include "inkline/content_encoder.hpp"

#include "inkline/error.hpp"

namespace inkline {

namespace nn = torch::nn;

AdainParams AdainParams::split(const torch::Tensor& packed) {
  require(packed.dim() == 2 && packed.size(1) % 8 == 0, ErrorKind::ContractViolation,
          "AdaIN vector must be (B, 8*C)");
  const auto pieces = packed.chunk(8, 1);
  AdainParams p;
  for (int i = 0; i < 4; ++i) {
    p.alpha[i] = pieces[2 * i];
    p.beta[i] = pieces[2 * i + 1];
  }
  return p;
}

AdainParams AdainParams::identity(int64_t batch, int64_t channels,
                                  const torch::TensorOptions& options) {
  AdainParams p;
  for (int i = 0; i < 4; ++i) {
    p.alpha[i] = torch::ones({batch, channels}, options);
    p.beta[i] = torch::zeros({batch, channels}, options);
  }
  return p;
}

std::vector<int> charwise_counts(int text_length, int target_width) {
  require(text_length >= 1, ErrorKind::ContractViolation, "text length must be >= 1");
  if (target_width < text_length) {
    fail(ErrorKind::AlignmentError, "text length " + std::to_string(text_length) +
                                        " exceeds feature width " + std::to_string(target_width));
  }
  const int base = target_width / text_length;
  const int extra = target_width % text_length;
  std::vector<int> counts(static_cast<std::size_t>(text_length), base);
  for (int i = 0; i < extra; ++i) {
    ++counts[static_cast<std::size_t>(i)];
  }
  return counts;
}

std::vector<int64_t> charwise_owner(int text_length, int target_width) {
  std::vector<int64_t> owner;
  owner.reserve(static_cast<std::size_t>(target_width));
  const auto counts = charwise_counts(text_length, target_width);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    owner.insert(owner.end(), static_cast<std::size_t>(counts[i]), static_cast<int64_t>(i));
  }
  return owner;
}

ContentEncoderImpl::ContentEncoderImpl(int alphabet_size, int embed_dim, int max_text_length,
                                       int hidden, int gen_channels)
    : alphabet_size_(alphabet_size),
      embed_dim_(embed_dim),
      max_text_length_(max_text_length),
      gen_channels_(gen_channels) {
  table_ = register_module("table", nn::Embedding(alphabet_size + 1, embed_dim));
  auto last = nn::Linear(hidden, 8 * gen_channels);
  g2_ = register_module(
      "g2", nn::Sequential(nn::Linear(max_text_length * embed_dim, hidden), nn::ReLU(),
                           nn::Linear(hidden, hidden), nn::ReLU(), last));
  // Start the alpha pieces near 1 so the AdaIN layers pass signal at init.
  torch::NoGradGuard no_grad;
  last->weight.mul_(0.1);
  auto bias = last->bias.view({8, gen_channels});
  bias.zero_();
  for (int i = 0; i < 8; i += 2) {
    bias[i].fill_(1.0);
  }
}

torch::Tensor ContentEncoderImpl::embed(const torch::Tensor& symbols) {
  require(symbols.dim() == 2, ErrorKind::ContractViolation, "symbols must be (B, T)");
  if (symbols.numel() > 0) {
    const auto lo = symbols.min().item<int64_t>();
    const auto hi = symbols.max().item<int64_t>();
    if (lo < 0 || hi > alphabet_size_) {
      fail(ErrorKind::EncodingError, "symbol index " + std::to_string(lo < 0 ? lo : hi) +
                                         " outside alphabet of size " +
                                         std::to_string(alphabet_size_));
    }
  }
  return table_(symbols);
}

torch::Tensor ContentEncoderImpl::encode_charwise(const torch::Tensor& embedded,
                                                  int target_height, int target_width) {
  const auto text_length = static_cast<int>(embedded.size(1));
  const auto owner = charwise_owner(text_length, target_width);
  auto index = torch::tensor(owner, torch::kLong).to(embedded.device());
  auto columns = embedded.index_select(1, index).permute({0, 2, 1});  // (B, n, w_f)
  return columns.unsqueeze(2).expand({-1, -1, target_height, -1}).contiguous();
}

torch::Tensor ContentEncoderImpl::encode_global(const torch::Tensor& symbols) {
  const auto length = symbols.size(1);
  require(length <= max_text_length_, ErrorKind::AlignmentError,
          "text length " + std::to_string(length) + " exceeds max_text_length " +
              std::to_string(max_text_length_));
  auto padded = symbols;
  if (length < max_text_length_) {
    auto eps = torch::full({symbols.size(0), max_text_length_ - length}, alphabet_size_,
                           symbols.options());
    padded = torch::cat({symbols, eps}, 1);
  }
  return g2_->forward(embed(padded).flatten(1));
}

ContentFeatures ContentEncoderImpl::forward(const torch::Tensor& symbols, int target_height,
                                            int target_width) {
  ContentFeatures out;
  out.char_map = encode_charwise(embed(symbols), target_height, target_width);
  out.packed = encode_global(symbols);
  out.adain = AdainParams::split(out.packed);
  return out;
}

}  // namespace inkline
