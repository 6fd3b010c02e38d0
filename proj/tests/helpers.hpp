#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <torch/torch.h>

#include "inkline/checkpoint.hpp"
#include "inkline/config.hpp"
#include "inkline/image.hpp"

namespace testing_util {

/// Smallest preset; every network fits in a few hundred kilobytes.
inline inkline::RunConfig tiny_config(std::uint64_t seed = 1) {
  auto config = inkline::RunConfig::preset_named("tiny");
  config.training.seed = seed;
  config.training.curriculum = {};
  return config;
}

inline inkline::GrayImage random_image(int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0F, 1.0F);
  inkline::GrayImage image(height, width);
  for (auto& p : image.pixels()) {
    p = u(rng);
  }
  return image;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("inkline_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool same_tensor(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && torch::equal(a, b);
}

}  // namespace testing_util
