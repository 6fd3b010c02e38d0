#include "inkline/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "inkline/error.hpp"

namespace inkline {

GrayImage::GrayImage(int height, int width, float fill)
    : height_(height),
      width_(width),
      pixels_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
  require(height > 0 && width > 0, ErrorKind::InvalidImage,
          "image dimensions must be positive");
}

GrayImage::GrayImage(int height, int width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  require(height > 0 && width > 0, ErrorKind::InvalidImage,
          "image dimensions must be positive");
  require(pixels_.size() == static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
          ErrorKind::InvalidImage, "pixel buffer does not match dimensions");
}

GrayImage GrayImage::columns(int begin, int end) const {
  return crop(0, height_, begin, end);
}

GrayImage GrayImage::crop(int row0, int row1, int col0, int col1) const {
  require(0 <= row0 && row0 < row1 && row1 <= height_ && 0 <= col0 && col0 < col1 &&
              col1 <= width_,
          ErrorKind::InvalidImage, "crop rectangle outside image");
  GrayImage out(row1 - row0, col1 - col0);
  for (int r = row0; r < row1; ++r) {
    for (int c = col0; c < col1; ++c) {
      out.at(r - row0, c - col0) = at(r, c);
    }
  }
  return out;
}

torch::Tensor GrayImage::to_tensor() const {
  return torch::from_blob(const_cast<float*>(pixels_.data()), {1, height_, width_},
                          torch::kFloat32)
      .clone();
}

GrayImage GrayImage::from_tensor(const torch::Tensor& hw) {
  auto t = hw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (t.dim() == 3) {
    require(t.size(0) == 1, ErrorKind::InvalidImage, "expected a single-channel tensor");
    t = t.squeeze(0);
  }
  require(t.dim() == 2, ErrorKind::InvalidImage, "expected an (H, W) tensor");
  const auto* data = t.data_ptr<float>();
  std::vector<float> pixels(data, data + t.numel());
  return {static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), std::move(pixels)};
}

GrayImage normalize_image(const RawImage& raw, int target_height) {
  require(raw.height > 0 && raw.width > 0, ErrorKind::InvalidImage,
          "zero-area image cannot be normalized");
  require(raw.pixels.size() == static_cast<std::size_t>(raw.height) * raw.width,
          ErrorKind::InvalidImage, "raw pixel buffer does not match dimensions");

  const double scale = static_cast<double>(target_height) / raw.height;
  const int width = std::max(1, static_cast<int>(std::lround(raw.width * scale)));

  cv::Mat src(raw.height, raw.width, CV_8UC1, const_cast<std::uint8_t*>(raw.pixels.data()));
  cv::Mat as_float;
  src.convertTo(as_float, CV_32F);
  cv::Mat resized;
  if (width == raw.width && target_height == raw.height) {
    resized = as_float;
  } else {
    cv::resize(as_float, resized, cv::Size(width, target_height), 0, 0, cv::INTER_LINEAR);
  }

  GrayImage out(target_height, width);
  for (int r = 0; r < target_height; ++r) {
    const auto* row = resized.ptr<float>(r);
    for (int c = 0; c < width; ++c) {
      out.at(r, c) = std::clamp(1.0F - row[c] / 255.0F, 0.0F, 1.0F);
    }
  }
  return out;
}

GrayImage periodic_pad(const GrayImage& image, int target_width) {
  require(!image.empty(), ErrorKind::InvalidImage, "cannot pad an empty image");
  const int w = image.width();
  if (target_width < w) {
    fail(ErrorKind::WidthExceedsTarget,
         "image width " + std::to_string(w) + " exceeds target width " +
             std::to_string(target_width));
  }
  GrayImage out(image.height(), target_width);
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < target_width; ++c) {
      out.at(r, c) = image.at(r, c % w);
    }
  }
  return out;
}

GrayImage zero_pad(const GrayImage& image, int target_width) {
  if (target_width < image.width()) {
    fail(ErrorKind::WidthExceedsTarget,
         "image width " + std::to_string(image.width()) + " exceeds target width " +
             std::to_string(target_width));
  }
  GrayImage out(image.height(), target_width);
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) {
      out.at(r, c) = image.at(r, c);
    }
  }
  return out;
}

RawImage to_raw(const GrayImage& image) {
  RawImage raw{image.height(), image.width(), {}};
  raw.pixels.resize(image.pixels().size());
  std::transform(image.pixels().begin(), image.pixels().end(), raw.pixels.begin(),
                 [](float v) {
                   const float ink = std::clamp(v, 0.0F, 1.0F);
                   return static_cast<std::uint8_t>(std::lround((1.0F - ink) * 255.0F));
                 });
  return raw;
}

RawImage read_png(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (mat.empty()) {
    fail(ErrorKind::IoError, "cannot read image " + path.string());
  }
  RawImage raw{mat.rows, mat.cols, {}};
  raw.pixels.resize(static_cast<std::size_t>(mat.rows) * mat.cols);
  for (int r = 0; r < mat.rows; ++r) {
    std::copy_n(mat.ptr<std::uint8_t>(r), mat.cols, raw.pixels.begin() + r * mat.cols);
  }
  return raw;
}

void write_png(const std::filesystem::path& path, const RawImage& raw) {
  cv::Mat mat(raw.height, raw.width, CV_8UC1, const_cast<std::uint8_t*>(raw.pixels.data()));
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), mat)) {
    fail(ErrorKind::IoError, "cannot write image " + path.string());
  }
}

torch::Tensor stack_padded(std::span<const GrayImage> images, int target_width) {
  require(!images.empty(), ErrorKind::ContractViolation, "cannot stack an empty batch");
  const int height = images.front().height();
  auto batch = torch::zeros({static_cast<long>(images.size()), 1, height, target_width});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    require(img.height() == height, ErrorKind::ContractViolation,
            "batch images must share a height");
    if (img.width() > target_width) {
      fail(ErrorKind::WidthExceedsTarget,
           "image width " + std::to_string(img.width()) + " exceeds batch width " +
               std::to_string(target_width));
    }
    batch[static_cast<long>(i)]
        .narrow(2, 0, img.width())
        .copy_(img.to_tensor());
  }
  return batch;
}

}  // namespace inkline
