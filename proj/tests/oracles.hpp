#pragma once

// Reference implementations used only by tests. They share no code with the
// library versions they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Levenshtein distance by plain recursion over suffixes, memoized per call.
template <typename T>
int edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> int {
    if (i == a.size()) {
      return static_cast<int>(b.size() - j);
    }
    if (j == b.size()) {
      return static_cast<int>(a.size() - i);
    }
    const auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) {
      return it->second;
    }
    const int best = std::min({self(self, i + 1, j) + 1, self(self, i, j + 1) + 1,
                               self(self, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1)});
    memo[key] = best;
    return best;
  };
  return rec(rec, 0, 0);
}

inline std::vector<char> chars(const std::string& s) { return {s.begin(), s.end()}; }

/// Every string of length 0..max_length over `symbols`.
inline std::vector<std::string> all_strings(const std::string& symbols, int max_length) {
  std::vector<std::string> out{""};
  std::vector<std::string> frontier{""};
  for (int len = 1; len <= max_length; ++len) {
    std::vector<std::string> next;
    for (const auto& s : frontier) {
      for (char c : symbols) {
        next.push_back(s + c);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

/// Squared Frechet distance between Gaussians with diagonal covariances:
/// ||mu1 - mu2||^2 + sum (sigma1 - sigma2)^2.
inline double frechet_diagonal(const std::vector<double>& mu1, const std::vector<double>& var1,
                               const std::vector<double>& mu2, const std::vector<double>& var2) {
  double d = 0.0;
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    d += (mu1[i] - mu2[i]) * (mu1[i] - mu2[i]);
    const double s = std::sqrt(var1[i]) - std::sqrt(var2[i]);
    d += s * s;
  }
  return d;
}

}  // namespace oracle
