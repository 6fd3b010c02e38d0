#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <torch/types.h>

namespace inkline {

inline constexpr int kLineHeight = 64;

/// Row-major single-channel float raster.
///
/// Normalized images follow the inverted-intensity convention: values lie in
/// [0, 1], ink is near 1 and background near 0.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int height, int width, float fill = 0.0F);
  GrayImage(int height, int width, std::vector<float> pixels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return pixels_.empty(); }

  float at(int row, int col) const { return pixels_[index(row, col)]; }
  float& at(int row, int col) { return pixels_[index(row, col)]; }

  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<float> pixels() noexcept { return pixels_; }

  /// Copy of column range [begin, end).
  GrayImage columns(int begin, int end) const;
  /// Copy of the rectangle [row0, row1) x [col0, col1).
  GrayImage crop(int row0, int row1, int col0, int col1) const;

  /// (1, H, W) float tensor sharing no storage with this image.
  torch::Tensor to_tensor() const;
  static GrayImage from_tensor(const torch::Tensor& hw);

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

/// 8-bit raster as stored on disk (white paper, dark ink).
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

/// Resize to height 64 (bilinear, aspect preserved, width rounded to nearest,
/// minimum 1) and map intensities through 1 - I/255.
GrayImage normalize_image(const RawImage& raw, int target_height = kLineHeight);

/// Tile columns rightward so that out[:, c] == image[:, c mod w].
/// Throws WidthExceedsTarget when target_width < image width.
GrayImage periodic_pad(const GrayImage& image, int target_width);

/// Right-pad with background (0) up to target_width.
GrayImage zero_pad(const GrayImage& image, int target_width);

/// Inverse of the normalization convention: ink -> dark, 8-bit.
RawImage to_raw(const GrayImage& image);

RawImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& raw);

/// Stack images into (B, 1, H, target_width), zero padding on the right.
torch::Tensor stack_padded(std::span<const GrayImage> images, int target_width);

}  // namespace inkline
