#include "inkline/generator.hpp"

#include "inkline/error.hpp"

namespace inkline {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv3x3(int in, int out) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::Tensor per_channel(const torch::Tensor& v, const torch::Tensor& z) {
  if (v.dim() == 1) {
    return v.view({1, -1, 1, 1});
  }
  return v.view({z.size(0), -1, 1, 1});
}

}  // namespace

torch::Tensor adain(const torch::Tensor& z, const torch::Tensor& alpha, const torch::Tensor& beta) {
  require(z.dim() == 4, ErrorKind::ContractViolation, "adain expects a (B, C, H, W) map");
  const auto channels = z.size(1);
  require(alpha.size(-1) == channels && beta.size(-1) == channels, ErrorKind::ContractViolation,
          "AdaIN parameter length does not match channel count " + std::to_string(channels));
  const auto mean = z.mean({2, 3}, true);
  const auto var = z.var({2, 3}, /*unbiased=*/false, /*keepdim=*/true);
  const auto normalized = (z - mean) / torch::sqrt(var + kAdainEpsilon);
  return per_channel(alpha, z) * normalized + per_channel(beta, z);
}

AdainResBlockImpl::AdainResBlockImpl(int channels)
    : conv1_(conv3x3(channels, channels)), conv2_(conv3x3(channels, channels)) {
  register_module("conv1", conv1_);
  register_module("conv2", conv2_);
}

torch::Tensor AdainResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& alpha1,
                                         const torch::Tensor& beta1, const torch::Tensor& alpha2,
                                         const torch::Tensor& beta2) {
  auto y = torch::relu(adain(conv1_(x), alpha1, beta1));
  y = adain(conv2_(y), alpha2, beta2);
  return x + y;
}

GeneratorImpl::GeneratorImpl(int style_channels, int content_channels, int gen_channels,
                             const std::vector<int>& up_channels) {
  require(up_channels.size() == 4, ErrorKind::ConfigError, "generator needs four up widths");
  fuse_ = register_module("fuse", conv3x3(style_channels + content_channels, gen_channels));
  block1_ = register_module("block1", AdainResBlock(gen_channels));
  block2_ = register_module("block2", AdainResBlock(gen_channels));
  up_ = register_module("up", nn::ModuleList());
  int in = gen_channels;
  for (int out : up_channels) {
    up_->push_back(conv3x3(in, out));
    in = out;
  }
  out_ = register_module("out", conv3x3(in, 1));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& style, const torch::Tensor& char_map,
                                     const AdainParams& params) {
  require(style.size(2) == char_map.size(2) && style.size(3) == char_map.size(3),
          ErrorKind::ContractViolation, "F_s and F_c spatial sizes differ");
  auto x = fuse_(torch::cat({style, char_map}, 1));
  x = block1_(x, params.alpha[0], params.beta[0], params.alpha[1], params.beta[1]);
  x = block2_(x, params.alpha[2], params.beta[2], params.alpha[3], params.beta[3]);
  for (const auto& module : *up_) {
    x = torch::upsample_nearest2d(x, std::vector<int64_t>{x.size(2) * 2, x.size(3) * 2});
    x = torch::relu(module->as<nn::Conv2d>()->forward(x));
  }
  return torch::tanh(out_(x));
}

SynthesizerImpl::SynthesizerImpl(const ModelConfig& config, int alphabet_size)
    : config_(config) {
  style_ = register_module("style", StyleEncoder(backbone_from_string(config.backbone),
                                                 config.style_images, config.backbone_width));
  content_ = register_module(
      "content", ContentEncoder(alphabet_size, config.embed_dim, config.max_text_length,
                                config.global_hidden, config.gen_channels));
  generator_ = register_module(
      "generator", Generator(style_->out_channels(), config.embed_dim, config.gen_channels,
                             config.up_channels));
}

torch::Tensor SynthesizerImpl::encode_style(const torch::Tensor& styles) {
  return style_->forward(styles);
}

ContentFeatures SynthesizerImpl::encode_content(const torch::Tensor& symbols, int64_t height,
                                                int64_t width) {
  auto features = content_->forward(symbols, static_cast<int>(height), static_cast<int>(width));
  if (!config_.use_charwise) {
    features.char_map = torch::zeros_like(features.char_map);
  }
  if (!config_.use_global) {
    features.adain = AdainParams::identity(symbols.size(0), config_.gen_channels,
                                           features.packed.options());
  }
  return features;
}

torch::Tensor SynthesizerImpl::decode(const torch::Tensor& style_features,
                                      const ContentFeatures& content) {
  return generator_->forward(style_features, content.char_map, content.adain);
}

torch::Tensor SynthesizerImpl::forward(const torch::Tensor& styles, const torch::Tensor& symbols) {
  const auto fs = encode_style(styles);
  return decode(fs, encode_content(symbols, fs.size(2), fs.size(3)));
}

std::vector<torch::Tensor> interpolate_styles(Synthesizer& synthesizer, const torch::Tensor& symbols,
                                              const torch::Tensor& style_a,
                                              const torch::Tensor& style_b, int steps) {
  require(steps >= 2, ErrorKind::ContractViolation, "interpolation needs at least 2 steps");
  require(style_a.sizes() == style_b.sizes(), ErrorKind::ContractViolation,
          "style tensors must share a shape");
  const auto fs_a = synthesizer->encode_style(style_a);
  const auto fs_b = synthesizer->encode_style(style_b);
  const auto content = synthesizer->encode_content(symbols, fs_a.size(2), fs_a.size(3));
  std::vector<torch::Tensor> frames;
  frames.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    torch::Tensor fs;
    if (i == 0) {
      fs = fs_a;
    } else if (i == steps - 1) {
      fs = fs_b;
    } else {
      const double lambda = static_cast<double>(i) / (steps - 1);
      fs = (1.0 - lambda) * fs_a + lambda * fs_b;
    }
    frames.push_back(synthesizer->decode(fs, content));
  }
  return frames;
}

}  // namespace inkline
