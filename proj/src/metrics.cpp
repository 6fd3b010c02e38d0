#include "inkline/metrics.hpp"

#include <algorithm>
#include <iostream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "inkline/alphabet.hpp"
#include "inkline/error.hpp"

namespace inkline {

EditDistanceReport& EditDistanceReport::operator+=(const EditDistanceReport& other) noexcept {
  substitutions += other.substitutions;
  insertions += other.insertions;
  deletions += other.deletions;
  reference_length += other.reference_length;
  return *this;
}

EditDistanceReport align_tokens(const std::vector<std::u32string>& reference,
                                const std::vector<std::u32string>& hypothesis) {
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  std::vector<std::int64_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::int64_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) {
    at(i, 0) = static_cast<std::int64_t>(i);
  }
  for (std::size_t j = 0; j <= m; ++j) {
    at(0, j) = static_cast<std::int64_t>(j);
  }
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::int64_t sub = at(i - 1, j - 1) + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditDistanceReport r;
  r.reference_length = static_cast<std::int64_t>(n);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        r.substitutions += same ? 0 : 1;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  return r;
}

namespace {

std::vector<std::u32string> characters(std::string_view text) {
  std::vector<std::u32string> out;
  for (char32_t c : utf8_to_utf32(text)) {
    out.emplace_back(1, c);
  }
  return out;
}

}  // namespace

std::vector<std::u32string> split_words(std::string_view text) {
  std::vector<std::u32string> words;
  std::u32string current;
  for (char32_t c : utf8_to_utf32(text)) {
    if (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r') {
      if (!current.empty()) {
        words.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) {
    words.push_back(current);
  }
  return words;
}

EditDistanceReport cer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = characters(reference);
  require(!ref.empty(), ErrorKind::UndefinedRate, "CER undefined for an empty reference");
  return align_tokens(ref, characters(hypothesis));
}

EditDistanceReport wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = split_words(reference);
  require(!ref.empty(), ErrorKind::UndefinedRate, "WER undefined for a reference without words");
  return align_tokens(ref, split_words(hypothesis));
}

namespace {

void warn_ridge(Eigen::Index n, Eigen::Index dim, const std::function<void(const std::string&)>& warn) {
  const std::string msg = "set of " + std::to_string(n) + " samples <= feature dimension " +
                          std::to_string(dim) + "; covariance ridge 1e-6 applied";
  if (warn) {
    warn(msg);
  } else {
    std::cerr << "warning: " << msg << '\n';
  }
}

}  // namespace

FeatureGaussian fit_gaussian(const Eigen::MatrixXd& features,
                             const std::function<void(const std::string&)>& warn) {
  const auto n = features.rows();
  const auto dim = features.cols();
  require(n >= 2, ErrorKind::InsufficientData,
          "need at least 2 feature vectors, got " + std::to_string(n));
  FeatureGaussian g;
  g.count = n;
  g.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (n <= dim) {
    g.covariance.diagonal().array() += kCovarianceRidge;
    warn_ridge(n, dim, warn);
  }
  return g;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

// Tr (A^(1/2) B A^(1/2))^(1/2) as the nuclear norm of B^(1/2) A^(1/2). Singular
// values keep absolute precision near eps * max, where eigenvalues of the
// product would square the smallest ones away.
double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd product = psd_sqrt(b) * psd_sqrt(a);
  return Eigen::BDCSVD<Eigen::MatrixXd>(product).singularValues().sum();
}

}  // namespace

double frechet_distance(const FeatureGaussian& a, const FeatureGaussian& b) {
  require(a.mean.size() == b.mean.size(), ErrorKind::ContractViolation,
          "Gaussian dimensions differ");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  return mean_term + a.covariance.trace() + b.covariance.trace() -
         2.0 * trace_sqrt_product(a.covariance, b.covariance);
}

double frechet_distance(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b,
                        const std::function<void(const std::string&)>& warn) {
  const auto na = features_a.rows();
  const auto nb = features_b.rows();
  const auto dim = features_a.cols();
  require(features_b.cols() == dim, ErrorKind::ContractViolation, "feature dimensions differ");
  if (na < 2 || nb < 2 || na + nb >= dim) {
    return frechet_distance(fit_gaussian(features_a, warn), fit_gaussian(features_b, warn));
  }
  warn_ridge(na, dim, warn);
  warn_ridge(nb, dim, warn);
  // Both covariances are ridge * I outside the span of the centered samples,
  // so the trace term splits into that span plus (dim - m) * ridge.
  const Eigen::VectorXd mean_a = features_a.colwise().mean().transpose();
  const Eigen::VectorXd mean_b = features_b.colwise().mean().transpose();
  const Eigen::MatrixXd ca = features_a.rowwise() - mean_a.transpose();
  const Eigen::MatrixXd cb = features_b.rowwise() - mean_b.transpose();
  const auto m = na + nb;
  Eigen::MatrixXd stacked(dim, m);
  stacked << ca.transpose(), cb.transpose();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(dim, m);
  const Eigen::MatrixXd pa = ca * basis;
  const Eigen::MatrixXd pb = cb * basis;
  Eigen::MatrixXd cov_a = pa.transpose() * pa / static_cast<double>(na - 1);
  Eigen::MatrixXd cov_b = pb.transpose() * pb / static_cast<double>(nb - 1);
  cov_a.diagonal().array() += kCovarianceRidge;
  cov_b.diagonal().array() += kCovarianceRidge;
  const double outside = static_cast<double>(dim - m) * kCovarianceRidge;
  const double trace_a = ca.squaredNorm() / static_cast<double>(na - 1) + dim * kCovarianceRidge;
  const double trace_b = cb.squaredNorm() / static_cast<double>(nb - 1) + dim * kCovarianceRidge;
  const double trace_root = trace_sqrt_product(cov_a, cov_b) + outside;
  return (mean_a - mean_b).squaredNorm() + trace_a + trace_b - 2.0 * trace_root;
}

torch::Tensor pyramid_pool(const torch::Tensor& features, const std::vector<int>& levels) {
  require(features.dim() == 4, ErrorKind::ContractViolation, "pyramid pooling expects (B, C, H, W)");
  const auto seq = features.flatten(1, 2);  // (B, C H, W)
  std::vector<torch::Tensor> parts;
  parts.reserve(levels.size());
  for (int bins : levels) {
    parts.push_back(torch::adaptive_avg_pool1d(seq, {bins}).flatten(1));
  }
  return torch::cat(parts, 1);
}

Eigen::MatrixXd to_eigen(const torch::Tensor& rows) {
  const auto t = rows.detach().to(torch::kDouble).contiguous().cpu();
  require(t.dim() == 2, ErrorKind::ContractViolation, "expected a 2-D feature matrix");
  // torch is row-major, Eigen column-major by default.
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data_ptr<double>(), t.size(0), t.size(1));
}

}  // namespace inkline
