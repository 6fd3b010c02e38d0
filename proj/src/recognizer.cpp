#include "inkline/recognizer.hpp"

#include <cmath>
#include <limits>

#include "inkline/error.hpp"

namespace inkline {

namespace nn = torch::nn;

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int model_dim, int heads) : heads_(heads) {
  require(model_dim % heads == 0, ErrorKind::ConfigError, "model width not divisible by heads");
  q_ = register_module("q", nn::Linear(model_dim, model_dim));
  k_ = register_module("k", nn::Linear(model_dim, model_dim));
  v_ = register_module("v", nn::Linear(model_dim, model_dim));
  o_ = register_module("o", nn::Linear(model_dim, model_dim));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& query, const torch::Tensor& key,
                                              const torch::Tensor& value,
                                              const torch::Tensor& mask) {
  const auto batch = query.size(0);
  const auto dim = query.size(2);
  const auto head_dim = dim / heads_;
  auto split = [&](const torch::Tensor& x) {
    return x.view({batch, -1, heads_, head_dim}).transpose(1, 2);  // (B, h, T, d_h)
  };
  const auto q = split(q_(query));
  const auto k = split(k_(key));
  const auto v = split(v_(value));
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim));
  if (mask.defined()) {
    scores = scores + mask;
  }
  const auto attn = torch::softmax(scores, -1);
  const auto out = torch::matmul(attn, v).transpose(1, 2).reshape({batch, -1, dim});
  return o_(out);
}

EncoderLayerImpl::EncoderLayerImpl(int model_dim, int heads, int ff, double dropout) {
  attn_ = register_module("attn", MultiHeadAttention(model_dim, heads));
  ff1_ = register_module("ff1", nn::Linear(model_dim, ff));
  ff2_ = register_module("ff2", nn::Linear(ff, model_dim));
  norm1_ = register_module("norm1", nn::LayerNorm(nn::LayerNormOptions({model_dim})));
  norm2_ = register_module("norm2", nn::LayerNorm(nn::LayerNormOptions({model_dim})));
  drop_ = register_module("drop", nn::Dropout(dropout));
}

torch::Tensor EncoderLayerImpl::forward(const torch::Tensor& x) {
  auto y = norm1_(x + drop_(attn_(x, x, x)));
  return norm2_(y + drop_(ff2_(torch::relu(ff1_(y)))));
}

DecoderLayerImpl::DecoderLayerImpl(int model_dim, int heads, int ff, double dropout) {
  self_attn_ = register_module("self_attn", MultiHeadAttention(model_dim, heads));
  cross_attn_ = register_module("cross_attn", MultiHeadAttention(model_dim, heads));
  ff1_ = register_module("ff1", nn::Linear(model_dim, ff));
  ff2_ = register_module("ff2", nn::Linear(ff, model_dim));
  norm1_ = register_module("norm1", nn::LayerNorm(nn::LayerNormOptions({model_dim})));
  norm2_ = register_module("norm2", nn::LayerNorm(nn::LayerNormOptions({model_dim})));
  norm3_ = register_module("norm3", nn::LayerNorm(nn::LayerNormOptions({model_dim})));
  drop_ = register_module("drop", nn::Dropout(dropout));
}

torch::Tensor DecoderLayerImpl::forward(const torch::Tensor& x, const torch::Tensor& memory,
                                        const torch::Tensor& mask) {
  auto y = norm1_(x + drop_(self_attn_(x, x, x, mask)));
  y = norm2_(y + drop_(cross_attn_(y, memory, memory)));
  return norm3_(y + drop_(ff2_(torch::relu(ff1_(y)))));
}

torch::Tensor sinusoidal_positions(int64_t length, int64_t dim) {
  auto pos = torch::arange(length, torch::kFloat).unsqueeze(1);
  auto i = torch::arange(0, dim, 2, torch::kFloat);
  auto freq = torch::exp(i * (-std::log(10000.0) / static_cast<double>(dim)));
  auto table = torch::zeros({length, dim});
  table.index_put_({torch::indexing::Slice(), torch::indexing::Slice(0, torch::indexing::None, 2)},
                   torch::sin(pos * freq));
  table.index_put_({torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None, 2)},
                   torch::cos(pos * freq).narrow(1, 0, dim / 2));
  return table;
}

torch::Tensor causal_mask(int64_t length) {
  return torch::full({length, length}, -std::numeric_limits<float>::infinity()).triu(1);
}

RecognizerImpl::RecognizerImpl(const ModelConfig& config, int alphabet_size)
    : alphabet_size_(alphabet_size), model_dim_(config.rec_model_dim) {
  trunk_ = register_module("trunk", Backbone(BackboneKind::ResNet34, 1, config.rec_width));
  project_ = register_module("project",
                             nn::Linear(trunk_->out_channels() * 4, config.rec_model_dim));
  target_embed_ = register_module("target_embed",
                                  nn::Embedding(alphabet_size + 2, config.rec_model_dim));
  encoder_ = register_module("encoder", nn::ModuleList());
  decoder_ = register_module("decoder", nn::ModuleList());
  for (int i = 0; i < config.rec_layers; ++i) {
    encoder_->push_back(EncoderLayer(config.rec_model_dim, config.rec_heads, config.rec_ff,
                                     config.rec_dropout));
    decoder_->push_back(DecoderLayer(config.rec_model_dim, config.rec_heads, config.rec_ff,
                                     config.rec_dropout));
  }
  classifier_ = register_module("classifier", nn::Linear(config.rec_model_dim, alphabet_size + 1));
  drop_ = register_module("drop", nn::Dropout(config.rec_dropout));
}

torch::Tensor RecognizerImpl::encode(const torch::Tensor& images) {
  require(images.dim() == 4 && images.size(1) == 1 && images.size(2) == kLineHeight,
          ErrorKind::ContractViolation, "recognizer expects (B, 1, 64, W) images");
  auto f = trunk_->forward(images);                                // (B, C, 4, S)
  f = f.flatten(1, 2).transpose(1, 2);                             // (B, S, 4C)
  auto x = project_(f);
  x = drop_(x + sinusoidal_positions(x.size(1), model_dim_).to(x.device()));
  for (const auto& layer : *encoder_) {
    x = layer->as<EncoderLayer>()->forward(x);
  }
  return x;
}

torch::Tensor RecognizerImpl::embed_targets(const torch::Tensor& inputs) {
  auto y = target_embed_(inputs) * std::sqrt(static_cast<double>(model_dim_));
  return drop_(y + sinusoidal_positions(inputs.size(1), model_dim_).to(y.device()));
}

torch::Tensor RecognizerImpl::decode_logits(const torch::Tensor& memory,
                                            const torch::Tensor& inputs) {
  auto y = embed_targets(inputs);
  const auto mask = causal_mask(inputs.size(1)).to(y.device());
  for (const auto& layer : *decoder_) {
    y = layer->as<DecoderLayer>()->forward(y, memory, mask);
  }
  return classifier_(y);
}

torch::Tensor RecognizerImpl::shift_targets(const torch::Tensor& targets) const {
  auto start = torch::full({targets.size(0), 1}, start_index(), targets.options());
  return torch::cat({start, targets.narrow(1, 0, targets.size(1) - 1)}, 1);
}

torch::Tensor RecognizerImpl::forward(const torch::Tensor& images, const torch::Tensor& targets) {
  require(targets.dim() == 2 && targets.size(1) >= 1, ErrorKind::ContractViolation,
          "targets must be (B, T)");
  return decode_logits(encode(images), shift_targets(targets));
}

std::vector<DecodeResult> RecognizerImpl::decode_greedy(const torch::Tensor& images,
                                                        int max_length,
                                                        const Alphabet& alphabet) {
  torch::NoGradGuard no_grad;
  // Inference always runs without dropout; the caller's mode is restored.
  const bool was_training = is_training();
  eval();
  const auto memory = encode(images);
  const auto batch = images.size(0);
  auto inputs = torch::full({batch, 1}, start_index(), torch::kLong);
  std::vector<DecodeResult> results(static_cast<std::size_t>(batch));
  std::vector<bool> done(static_cast<std::size_t>(batch), false);
  for (int step = 0; step < max_length; ++step) {
    const auto logits = decode_logits(memory, inputs).select(1, step);
    const auto probs = torch::softmax(logits, -1);
    const auto best = probs.argmax(-1);
    const auto best_p = probs.gather(1, best.unsqueeze(1)).squeeze(1);
    bool all_done = true;
    for (int64_t b = 0; b < batch; ++b) {
      auto& r = results[static_cast<std::size_t>(b)];
      if (done[static_cast<std::size_t>(b)]) {
        continue;
      }
      const int symbol = static_cast<int>(best[b].item<int64_t>());
      if (symbol >= alphabet_size_) {
        done[static_cast<std::size_t>(b)] = true;
        continue;
      }
      r.symbols.push_back(symbol);
      r.confidence.push_back(best_p[b].item<float>());
      all_done = false;
    }
    if (all_done) {
      break;
    }
    inputs = torch::cat({inputs, best.unsqueeze(1)}, 1);
  }
  train(was_training);
  for (auto& r : results) {
    r.text = alphabet.decode(r.symbols);
  }
  return results;
}

torch::Tensor content_mask(const torch::Tensor& lengths, int64_t text_length) {
  auto positions = torch::arange(text_length, lengths.options()).unsqueeze(0);
  return positions <= lengths.unsqueeze(1);
}

torch::Tensor loss_content(const torch::Tensor& logits, const torch::Tensor& targets,
                           const torch::Tensor& lengths, double label_smoothing) {
  require(logits.dim() == 3 && targets.sizes() == logits.sizes().slice(0, 2),
          ErrorKind::ContractViolation, "content loss expects (B, T, C) logits and (B, T) targets");
  require(lengths.numel() == logits.size(0) && (lengths.numel() == 0 || lengths.min().item<int64_t>() >= 1),
          ErrorKind::ContractViolation, "content loss target has no characters");
  const auto classes = logits.size(2);
  const auto log_p = torch::log_softmax(logits, -1);
  auto q = torch::one_hot(targets, classes).to(log_p.dtype());
  if (label_smoothing > 0.0) {
    q = q * (1.0 - label_smoothing) + label_smoothing / static_cast<double>(classes);
  }
  // 0 log 0 = 0 for the one-hot case.
  const auto q_log_q = torch::where(q > 0, q * torch::log(q.clamp_min(1e-30)), torch::zeros_like(q));
  const auto kl = (q_log_q - q * log_p).sum(-1);  // (B, T)
  const auto mask = content_mask(lengths, logits.size(1)).to(kl.dtype());
  return (kl * mask).sum() / mask.sum();
}

}  // namespace inkline
