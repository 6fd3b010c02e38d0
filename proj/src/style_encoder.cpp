#include "inkline/style_encoder.hpp"

#include <algorithm>

#include "inkline/error.hpp"

namespace inkline {

namespace nn = torch::nn;

namespace {

nn::GroupNorm group_norm(int channels) {
  return nn::GroupNorm(nn::GroupNormOptions(std::min(8, channels), channels));
}

nn::Conv2d conv(int in, int out, int kernel, int stride, int padding, bool bias = false) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(bias));
}

nn::Sequential resnet34(int in_channels, int w) {
  nn::Sequential seq;
  seq->push_back(conv(in_channels, w, 7, 2, 3));
  seq->push_back(group_norm(w));
  seq->push_back(nn::ReLU());
  seq->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  const int blocks[] = {3, 4, 6};
  int in = w;
  for (int stage = 0; stage < 3; ++stage) {
    const int out = w << stage;
    for (int b = 0; b < blocks[stage]; ++b) {
      const int stride = (stage > 0 && b == 0) ? 2 : 1;
      seq->push_back(BasicBlock(in, out, stride));
      in = out;
    }
  }
  return seq;
}

nn::Sequential vgg19(int in_channels, int w) {
  nn::Sequential seq;
  const int convs[] = {2, 2, 4, 4};
  int in = in_channels;
  for (int group = 0; group < 4; ++group) {
    const int out = w << group;
    for (int c = 0; c < convs[group]; ++c) {
      seq->push_back(conv(in, out, 3, 1, 1, true));
      seq->push_back(group_norm(out));
      seq->push_back(nn::ReLU());
      in = out;
    }
    seq->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2)));
  }
  return seq;
}

}  // namespace

BasicBlockImpl::BasicBlockImpl(int in_channels, int out_channels, int stride)
    : conv1_(conv(in_channels, out_channels, 3, stride, 1)),
      conv2_(conv(out_channels, out_channels, 3, 1, 1)),
      norm1_(group_norm(out_channels)),
      norm2_(group_norm(out_channels)) {
  register_module("conv1", conv1_);
  register_module("norm1", norm1_);
  register_module("conv2", conv2_);
  register_module("norm2", norm2_);
  if (stride != 1 || in_channels != out_channels) {
    shortcut_ = nn::Sequential(conv(in_channels, out_channels, 1, stride, 0),
                               group_norm(out_channels));
    register_module("shortcut", shortcut_);
  }
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(norm1_(conv1_(x)));
  y = norm2_(conv2_(y));
  return torch::relu(y + (shortcut_ ? shortcut_->forward(x) : x));
}

BackboneKind backbone_from_string(const std::string& name) {
  if (name == "resnet34") {
    return BackboneKind::ResNet34;
  }
  if (name == "vgg19") {
    return BackboneKind::Vgg19;
  }
  fail(ErrorKind::ConfigError, "unknown backbone '" + name + "'");
}

BackboneImpl::BackboneImpl(BackboneKind kind, int in_channels, int width) {
  if (kind == BackboneKind::ResNet34) {
    body_ = resnet34(in_channels, width);
    out_channels_ = 4 * width;
  } else {
    body_ = vgg19(in_channels, width);
    out_channels_ = 8 * width;
  }
  register_module("body", body_);
}

torch::Tensor BackboneImpl::forward(const torch::Tensor& x) { return body_->forward(x); }

StyleEncoderImpl::StyleEncoderImpl(BackboneKind kind, int style_images, int width)
    : trunk_(kind, style_images, width), style_images_(style_images) {
  register_module("trunk", trunk_);
}

torch::Tensor StyleEncoderImpl::forward(const torch::Tensor& styles) {
  require(styles.dim() == 4 && styles.size(1) == style_images_, ErrorKind::ContractViolation,
          "style tensor must be (B, K=" + std::to_string(style_images_) + ", 64, L)");
  require(styles.size(2) == kLineHeight && styles.size(3) % 16 == 0,
          ErrorKind::ContractViolation, "style images must be 64 high and L a multiple of 16");
  return trunk_->forward(styles);
}

torch::Tensor style_tensor(const StyleSet& style, int k, int target_width) {
  require(static_cast<int>(style.images.size()) == k, ErrorKind::ContractViolation,
          "style set has " + std::to_string(style.images.size()) + " images, expected " +
              std::to_string(k));
  std::vector<torch::Tensor> planes;
  planes.reserve(style.images.size());
  for (const auto& image : style.images) {
    require(image.height() == kLineHeight, ErrorKind::ContractViolation,
            "style image height must be 64");
    planes.push_back(periodic_pad(image, target_width).to_tensor());
  }
  return torch::cat(planes, 0);
}

StyleSet style_set_from(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  require(!indices.empty(), ErrorKind::ContractViolation, "style set needs at least one image");
  StyleSet out;
  for (std::size_t i : indices) {
    const auto& sample = dataset.samples().at(i);
    if (out.images.empty()) {
      out.writer_id = sample.writer_id;
      out.writer_index = sample.writer_index;
    }
    require(sample.writer_id == out.writer_id, ErrorKind::ContractViolation,
            "style set mixes writers " + out.writer_id + " and " + sample.writer_id);
    out.images.push_back(sample.image);
  }
  return out;
}

}  // namespace inkline
