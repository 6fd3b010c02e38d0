#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <torch/types.h>

namespace inkline {

struct EditDistanceReport {
  std::int64_t substitutions = 0;
  std::int64_t insertions = 0;
  std::int64_t deletions = 0;
  std::int64_t reference_length = 0;

  std::int64_t distance() const noexcept { return substitutions + insertions + deletions; }
  /// (S + I + D) / N_ref; may exceed 1.
  double rate() const noexcept {
    return static_cast<double>(distance()) / static_cast<double>(reference_length);
  }
  EditDistanceReport& operator+=(const EditDistanceReport& other) noexcept;
};

/// Unit-cost Levenshtein alignment of token sequences. Among optimal
/// alignments the backtrace prefers substitutions, then deletions.
EditDistanceReport align_tokens(const std::vector<std::u32string>& reference,
                                const std::vector<std::u32string>& hypothesis);

/// Character error rate over code points. Empty reference -> UndefinedRate.
EditDistanceReport cer(std::string_view reference, std::string_view hypothesis);
/// Word error rate over whitespace tokens. No reference words -> UndefinedRate.
EditDistanceReport wer(std::string_view reference, std::string_view hypothesis);

std::vector<std::u32string> split_words(std::string_view text);

/// Mean and covariance of feature rows.
inline constexpr double kCovarianceRidge = 1e-6;

struct FeatureGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::int64_t count = 0;
};

/// Fit over the rows of `features` (n x d), unbiased covariance. n < 2
/// throws InsufficientData. When n <= d a ridge of 1e-6 is added to the
/// diagonal and `warn` (or stderr) is told so.
FeatureGaussian fit_gaussian(const Eigen::MatrixXd& features,
                             const std::function<void(const std::string&)>& warn = {});

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)). The trace of the square
/// root is taken through the symmetric form S1^(1/2) S2 S1^(1/2), with
/// negative eigenvalues of each covariance clipped at 0.
double frechet_distance(const FeatureGaussian& a, const FeatureGaussian& b);

/// Same distance between Gaussian fits of two feature matrices. When the two
/// sets together have fewer rows than columns the computation is carried out
/// exactly in the span of the centered samples.
double frechet_distance(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b,
                        const std::function<void(const std::string&)>& warn = {});

/// Width-wise pyramid pooling: fold height into channels, average each of
/// `levels` bins along width, concatenate. (B, C, H, W) -> (B, C H sum(levels)).
torch::Tensor pyramid_pool(const torch::Tensor& features, const std::vector<int>& levels = {1, 2, 4});

Eigen::MatrixXd to_eigen(const torch::Tensor& rows);

}  // namespace inkline
