// Independent oracles used by the unit and acceptance suites. These stay
// deliberately separate from the library implementation paths they check:
// the eigendecomposition comes from Eigen, PR-AUC from exhaustive
// threshold enumeration, quantile ranks from counting loops.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace oracle {

struct EigenPcaResult {
  std::vector<double> mean;
  std::vector<double> eigenvalues;               // descending
  std::vector<std::vector<double>> eigenvectors; // row k for eigenvalue k
};

// Dense eigendecomposition of the 1/(n-1) sample covariance via Eigen's
// self-adjoint solver.
inline EigenPcaResult eigen_pca(const std::vector<std::vector<double>>& data,
                                std::size_t top_k) {
  const std::size_t n = data.size();
  const std::size_t d = data.front().size();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = data[i][j];
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);

  EigenPcaResult out;
  out.mean.assign(mean.data(), mean.data() + d);
  for (std::size_t k = 0; k < top_k; ++k) {
    const auto col = d - 1 - k;  // Eigen sorts ascending
    out.eigenvalues.push_back(solver.eigenvalues()(static_cast<Eigen::Index>(col)));
    std::vector<double> vec(d);
    for (std::size_t i = 0; i < d; ++i)
      vec[i] = solver.eigenvectors()(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(col));
    out.eigenvectors.push_back(std::move(vec));
  }
  return out;
}

// Max over both signs of the entrywise distance between unit vectors.
inline double eigenvector_distance(const std::vector<double>& a,
                                   const std::vector<double>& b) {
  double plus = 0.0, minus = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    plus = std::max(plus, std::abs(a[i] - b[i]));
    minus = std::max(minus, std::abs(a[i] + b[i]));
  }
  return std::min(plus, minus);
}

// Exhaustive PR-AUC: enumerate every distinct score as a threshold
// (descending), compute (recall, precision) at each, and sum step
// rectangles. Quadratic on purpose.
inline double exhaustive_pr_auc(const std::vector<double>& scores,
                                const std::vector<int>& positive) {
  std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
  std::size_t total_pos = 0;
  for (int p : positive) total_pos += static_cast<std::size_t>(p);

  double area = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    std::size_t tp = 0, flagged = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        ++flagged;
        tp += static_cast<std::size_t>(positive[i]);
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(flagged);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

// Smallest rank k with k >= target, found by counting upward; mirrors the
// ceil((N+1)(1-alpha)) rule without calling ceil.
inline std::size_t upper_rank_by_counting(std::size_t n, double alpha) {
  const double target = static_cast<double>(n + 1) * (1.0 - alpha);
  std::size_t k = 1;
  while (static_cast<double>(k) + 1e-9 < target) ++k;
  return k;  // may exceed n, meaning +infinity
}

// Largest rank k with k <= (N+1) alpha, found by counting; 0 means the
// retain-nothing sentinel.
inline std::size_t lower_rank_by_counting(std::size_t n, double alpha) {
  const double target = static_cast<double>(n + 1) * alpha;
  std::size_t k = 0;
  while (static_cast<double>(k + 1) <= target + 1e-9 && k < n + 1) ++k;
  return k;
}

inline double kth_smallest_sorted(std::vector<double> scores, std::size_t k) {
  std::sort(scores.begin(), scores.end());
  return scores[k - 1];
}

// One-sample Kolmogorov-Smirnov distance against a CDF.
template <typename Cdf>
double ks_distance(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    d = std::max(d, std::abs(static_cast<double>(i) / n - f));
  }
  return d;
}

// Two-sample Kolmogorov-Smirnov distance.
inline double ks_distance_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                             static_cast<double>(j) / static_cast<double>(b.size())));
  }
  return d;
}

}  // namespace oracle
