#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <torch/nn.h>

#include "inkline/dataset.hpp"
#include "inkline/metrics.hpp"

namespace inkline {

enum class ExtractorKind {
  Conv6,        // six 3x3 conv layers, desk scale
  InceptionV3,  // InceptionV3 topology through Mixed_6e, full scale
};

ExtractorKind extractor_from_string(const std::string& name);
std::string to_string(ExtractorKind kind);

/// Writer-classification network whose convolutional features feed FID and
/// vFID. The classifier head sits on globally averaged features so the trunk
/// accepts any width.
class FeatureExtractorImpl : public torch::nn::Module {
 public:
  FeatureExtractorImpl(ExtractorKind kind, int width, int num_writers);
  /// (B, 1, 64, W) -> (B, C, h, w).
  torch::Tensor feature_map(const torch::Tensor& images);
  /// Writer logits.
  torch::Tensor forward(const torch::Tensor& images);
  ExtractorKind kind() const noexcept { return kind_; }
  int width() const noexcept { return width_; }
  int num_writers() const noexcept { return num_writers_; }
  /// Images narrower than this are zero padded before extraction.
  int min_input_width() const noexcept { return kind_ == ExtractorKind::InceptionV3 ? 96 : 1; }

 private:
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Linear head_{nullptr};
  ExtractorKind kind_;
  int width_;
  int num_writers_;
};
TORCH_MODULE(FeatureExtractor);

struct ExtractorTrainOptions {
  int iterations = 400;
  int batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

/// Fine-tune every layer on writer classification.
void train_extractor(FeatureExtractor& extractor, const Dataset& train,
                     const ExtractorTrainOptions& options);

/// Fraction of images whose argmax writer matches. Images run one at a time.
double writer_accuracy(FeatureExtractor& extractor, const Dataset& data);

void save_extractor(const std::filesystem::path& path, FeatureExtractor& extractor);
FeatureExtractor load_extractor(const std::filesystem::path& path);

enum class Pooling {
  Pyramid,  // vFID: native width, height folded into channels, pyramid pooled
  Average,  // FID: resized to a fixed width, global average pooled
};

inline constexpr int kFidWidth = 256;

/// One feature row per image, each image extracted on its own.
torch::Tensor extract_features(FeatureExtractor& extractor, const std::vector<GrayImage>& images,
                               Pooling pooling, const std::vector<int>& levels = {1, 2, 4});

/// Squared Frechet distance between Gaussian fits of two feature matrices.
double frechet_from_features(const torch::Tensor& a, const torch::Tensor& b,
                             const std::function<void(const std::string&)>& warn = {});

double vfid(FeatureExtractor& extractor, const std::vector<GrayImage>& set_a,
            const std::vector<GrayImage>& set_b,
            const std::function<void(const std::string&)>& warn = {});
double fid(FeatureExtractor& extractor, const std::vector<GrayImage>& set_a,
           const std::vector<GrayImage>& set_b,
           const std::function<void(const std::string&)>& warn = {});

/// Same-writer and cross-writer histograms sharing bin edges, each
/// normalized to sum 1.
struct MetricHistogram {
  std::vector<double> edges;  // bins + 1
  std::vector<double> same;
  std::vector<double> cross;
  double overlap = 0.0;  // sum of bin-wise minima
};

MetricHistogram make_histogram(const std::vector<double>& same, const std::vector<double>& cross,
                               int bins);

struct HistogramOptions {
  int pairs = 50;        // pairs per group (same and cross)
  int subset_size = 20;  // images per subset
  int bins = 10;
  std::uint64_t seed = 1;
};

struct HistogramStudy {
  std::vector<double> fid_same, fid_cross, vfid_same, vfid_cross;
  MetricHistogram fid, vfid;
};

/// Metric values between disjoint same-writer subsets and different-writer
/// subsets. Needs two writers with at least 2 * subset_size samples.
HistogramStudy fid_vfid_histograms(FeatureExtractor& extractor, const Dataset& dataset,
                                   const HistogramOptions& options);

/// TSV rows: metric, group, bin_lo, bin_hi, mass; then overlap lines.
void write_histograms_tsv(const std::filesystem::path& path, const HistogramStudy& study);

}  // namespace inkline
