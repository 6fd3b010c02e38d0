#include "inkline/adversaries.hpp"

#include <algorithm>

#include "inkline/error.hpp"

namespace inkline {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

constexpr int kCriticBlocks = 6;
constexpr double kLeak = 0.2;

torch::Tensor leaky(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeak));
}

}  // namespace

CriticBlockImpl::CriticBlockImpl(int in_channels, int out_channels) {
  conv1_ = register_module("conv1",
                           nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
  conv2_ = register_module("conv2",
                           nn::Conv2d(nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
  if (in_channels != out_channels) {
    skip_ = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 1)));
  }
}

torch::Tensor CriticBlockImpl::forward(const torch::Tensor& x) {
  auto y = conv2_(leaky(conv1_(leaky(x))));
  y = y + (skip_ ? skip_(x) : x);
  const int64_t kh = y.size(2) >= 2 ? 2 : 1;
  const int64_t kw = y.size(3) >= 2 ? 2 : 1;
  if (kh == 1 && kw == 1) {
    return y;
  }
  return F::avg_pool2d(y, F::AvgPool2dFuncOptions({kh, kw}).ceil_mode(true));
}

CriticImpl::CriticImpl(int width, int outputs) : outputs_(outputs) {
  stem_ = register_module("stem", nn::Conv2d(nn::Conv2dOptions(1, width, 3).padding(1)));
  blocks_ = register_module("blocks", nn::ModuleList());
  int in = width;
  for (int i = 0; i < kCriticBlocks; ++i) {
    const int out = width << std::min(i, 3);
    blocks_->push_back(CriticBlock(in, out));
    in = out;
  }
  feature_channels_ = in;
  head_ = register_module("head", nn::Linear(in, outputs));
}

torch::Tensor CriticImpl::features(const torch::Tensor& images) {
  require(images.dim() == 4 && images.size(1) == 1, ErrorKind::ContractViolation,
          "critic expects (B, 1, H, W) images");
  auto x = stem_(images);
  for (const auto& block : *blocks_) {
    x = block->as<CriticBlock>()->forward(x);
  }
  return leaky(x).mean({2, 3});
}

torch::Tensor CriticImpl::forward(const torch::Tensor& images) { return head_(features(images)); }

torch::Tensor discriminate(Critic& discriminator, const torch::Tensor& images) {
  return torch::sigmoid(discriminator->forward(images)).squeeze(1);
}

torch::Tensor discriminate(Critic& discriminator, const std::vector<torch::Tensor>& images) {
  std::vector<torch::Tensor> out;
  out.reserve(images.size());
  for (const auto& image : images) {
    out.push_back(discriminate(discriminator, image.dim() == 3 ? image.unsqueeze(0) : image));
  }
  return torch::cat(out);
}

torch::Tensor classify_writer(Critic& writer_classifier, const std::vector<torch::Tensor>& images) {
  std::vector<torch::Tensor> out;
  out.reserve(images.size());
  for (const auto& image : images) {
    out.push_back(writer_classifier->forward(image.dim() == 3 ? image.unsqueeze(0) : image));
  }
  return torch::cat(out);
}

torch::Tensor loss_discriminative(const torch::Tensor& real_prob, const torch::Tensor& fake_prob) {
  require(real_prob.numel() > 0 && fake_prob.numel() > 0, ErrorKind::ContractViolation,
          "discriminative loss needs non-empty real and fake batches");
  const double hi = 1.0 - kProbabilityFloor;
  return torch::log(real_prob.clamp(kProbabilityFloor, hi)).mean() +
         torch::log((1.0 - fake_prob).clamp(kProbabilityFloor, hi)).mean();
}

torch::Tensor loss_generator_adversarial(const torch::Tensor& fake_prob) {
  return -torch::log(fake_prob.clamp(kProbabilityFloor, 1.0 - kProbabilityFloor)).mean();
}

torch::Tensor loss_writer(const torch::Tensor& logits, const torch::Tensor& targets) {
  require(logits.dim() == 2 && targets.dim() == 1 && logits.size(0) == targets.size(0),
          ErrorKind::ContractViolation, "writer loss expects (B, N) logits and (B) targets");
  if (targets.numel() > 0) {
    const auto hi = targets.max().item<int64_t>();
    const auto lo = targets.min().item<int64_t>();
    require(lo >= 0 && hi < logits.size(1), ErrorKind::ContractViolation,
            "writer target outside [0, " + std::to_string(logits.size(1)) + ")");
  }
  return F::cross_entropy(logits, targets);
}

}  // namespace inkline
