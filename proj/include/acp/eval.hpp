#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "acp/common.hpp"
#include "acp/conformal.hpp"
#include "acp/linalg.hpp"

namespace acp {

// One evaluated test record: did the prediction succeed, and how much of
// the output was removed.
struct EvalRow {
  std::string category;
  bool success = false;
  double removed_fraction = 0.0;
};

inline double removed_fraction(std::size_t total, std::size_t retained) {
  if (retained > total)
    throw DataError("removed_fraction: retained exceeds total");
  if (total == 0) return 0.0;
  return 1.0 - static_cast<double>(retained) / static_cast<double>(total);
}

inline double removed_fraction(const LongFormRecord& record,
                               const std::vector<std::size_t>& retained) {
  return removed_fraction(record.claims.size(), retained.size());
}

// Success = every retained claim is correct.
inline EvalRow evaluate_record(const CalibratedPredictor& pred,
                               const LongFormRecord& record) {
  const auto kept = filter_test_longform(pred, record);
  EvalRow row;
  row.category = record.category;
  row.success = true;
  for (std::size_t idx : kept)
    if (record.claims[idx].label == 0) row.success = false;
  row.removed_fraction = removed_fraction(record, kept);
  return row;
}

// Success = true class inside the prediction set.
inline EvalRow evaluate_record(const CalibratedPredictor& pred,
                               const McqaRecord& record) {
  const auto set = predict_set_mcqa(pred, record);
  EvalRow row;
  row.category = record.category;
  row.success = std::find(set.begin(), set.end(), record.true_class) != set.end();
  row.removed_fraction = removed_fraction(record.class_probs.size(), set.size());
  return row;
}

template <typename Record>
std::vector<EvalRow> evaluate_records(const CalibratedPredictor& pred,
                                      const std::vector<Record>& records) {
  std::vector<EvalRow> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(evaluate_record(pred, r));
  return rows;
}

struct CategoryStats {
  double coverage = 0.0;
  double removed_fraction = 0.0;
  std::size_t n = 0;
};

struct CoverageReport {
  std::map<std::string, CategoryStats> per_category;
  double marginal_coverage = 0.0;
  double marginal_removed = 0.0;
  double alpha = 0.0;
};

inline CoverageReport coverage_by_group(const std::vector<EvalRow>& rows, double alpha) {
  if (rows.empty()) throw DataError("coverage_by_group: no evaluation rows");
  CoverageReport report;
  report.alpha = alpha;
  std::map<std::string, double> success_sum;
  std::map<std::string, double> removed_sum;
  for (const auto& row : rows) {
    auto& stats = report.per_category[row.category];
    ++stats.n;
    success_sum[row.category] += row.success ? 1.0 : 0.0;
    removed_sum[row.category] += row.removed_fraction;
  }
  double pooled_success = 0.0;
  double pooled_removed = 0.0;
  for (auto& [cat, stats] : report.per_category) {
    stats.coverage = success_sum[cat] / static_cast<double>(stats.n);
    stats.removed_fraction = removed_sum[cat] / static_cast<double>(stats.n);
    pooled_success += success_sum[cat];
    pooled_removed += removed_sum[cat];
  }
  report.marginal_coverage = pooled_success / static_cast<double>(rows.size());
  report.marginal_removed = pooled_removed / static_cast<double>(rows.size());
  return report;
}

// Area under the precision-recall step curve, sweeping thresholds over the
// scores in descending order with ties grouped. `positive` marks the
// positive class (here: incorrect claims); scores rank by descending
// suspicion.
inline double pr_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
  if (scores.empty() || scores.size() != positive.size())
    throw DataError("pr_auc: empty or mismatched inputs");
  std::size_t total_pos = 0;
  for (int p : positive) {
    if (p != 0 && p != 1) throw DataError("pr_auc: labels must be 0 or 1");
    total_pos += static_cast<std::size_t>(p);
  }
  if (total_pos == 0) throw DataError("pr_auc: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;  // group equal scores at one threshold
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += static_cast<std::size_t>(positive[order[j]]);
      ++seen;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

// |empirical coverage - (1 - alpha)|
inline double calibration_error(double empirical_coverage, double alpha) {
  if (empirical_coverage < 0.0 || empirical_coverage > 1.0 || alpha < 0.0 || alpha > 1.0)
    throw DataError("calibration_error: inputs must lie in [0, 1]");
  return std::abs(empirical_coverage - (1.0 - alpha));
}

// Zero-error and cap rules for performance ratios: every error gets an
// epsilon floor before division, and ratios are capped so the profile
// curve reaches 1 at the right edge of the grid.
inline constexpr double kProfileEpsilon = 1e-12;
inline constexpr double kRatioCap = 1e6;

struct PerformanceProfile {
  Matrix ratios;                   // problems x methods, every entry >= 1
  std::vector<double> delta_grid;  // non-decreasing, grid[0] = 1
  Matrix rho;                      // methods x grid points, each in [0, 1]
};

inline std::vector<double> log_delta_grid(std::size_t points = 200,
                                          double cap = kRatioCap) {
  if (points < 2) throw ConfigError("log_delta_grid: need at least 2 points");
  std::vector<double> grid(points);
  const double log_cap = std::log10(cap);
  for (std::size_t g = 0; g < points; ++g)
    grid[g] = std::pow(10.0, log_cap * static_cast<double>(g) /
                                 static_cast<double>(points - 1));
  grid.front() = 1.0;
  grid.back() = cap;
  return grid;
}

// Performance profile over per-problem error ratios: r_ps = t_ps / min_s'
// t_ps' and rho_s(delta) = fraction of problems with r_ps <= delta.
inline PerformanceProfile dolan_more(const Matrix& errors,
                                     const std::vector<double>& delta_grid) {
  if (errors.rows == 0 || errors.cols == 0)
    throw DataError("dolan_more: need at least one problem and one method");
  if (delta_grid.empty()) throw ConfigError("dolan_more: empty delta grid");
  for (double e : errors.data)
    if (!(e >= 0.0)) throw DataError("dolan_more: errors must be nonnegative");

  PerformanceProfile profile;
  profile.delta_grid = delta_grid;
  profile.ratios = Matrix(errors.rows, errors.cols);
  for (std::size_t p = 0; p < errors.rows; ++p) {
    double best = kInfinity;
    for (std::size_t s = 0; s < errors.cols; ++s)
      best = std::min(best, errors(p, s) + kProfileEpsilon);
    for (std::size_t s = 0; s < errors.cols; ++s)
      profile.ratios(p, s) =
          std::min((errors(p, s) + kProfileEpsilon) / best, kRatioCap);
  }

  profile.rho = Matrix(errors.cols, delta_grid.size());
  for (std::size_t s = 0; s < errors.cols; ++s) {
    for (std::size_t g = 0; g < delta_grid.size(); ++g) {
      std::size_t within = 0;
      for (std::size_t p = 0; p < errors.rows; ++p)
        if (profile.ratios(p, s) <= delta_grid[g]) ++within;
      profile.rho(s, g) =
          static_cast<double>(within) / static_cast<double>(errors.rows);
    }
  }
  return profile;
}

}  // namespace acp
