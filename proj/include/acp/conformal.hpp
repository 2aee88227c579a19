#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "acp/common.hpp"
#include "acp/data.hpp"
#include "acp/pca.hpp"
#include "acp/quantile_mlp.hpp"

namespace acp {

// Claims retained at threshold t, by index. Retention is strict (< t),
// which makes "all retained claims correct iff t <= longform_score" an
// exact set identity at every threshold including ties.
inline std::vector<std::size_t> filtration(const std::vector<ClaimRecord>& claims,
                                           double t) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < claims.size(); ++i)
    if (claims[i].uncertainty < t) kept.push_back(i);
  return kept;
}

// Largest threshold at which every retained claim is correct: the minimum
// uncertainty among incorrect claims, +infinity when all claims are correct.
inline double longform_score(const std::vector<ClaimRecord>& claims) {
  if (claims.empty()) throw DataError("longform_score: empty claim list");
  double v = kInfinity;
  for (const auto& c : claims)
    if (c.label == 0) v = std::min(v, c.uncertainty);
  return v;
}

// Least-ambiguous-classifier score: 1 - p(true class).
inline double lac_score(const std::vector<double>& probs, std::size_t y) {
  if (y >= probs.size()) throw DataError("lac_score: class index out of range");
  return 1.0 - probs[y];
}

namespace detail {

// Integer rank with a tiny nudge so products like 200 * 0.8 land on the
// mathematical integer despite binary rounding of alpha.
inline std::size_t ceil_rank(double x) {
  const double c = std::ceil(x - 1e-9);
  return c <= 0.0 ? 0 : static_cast<std::size_t>(c);
}

inline std::size_t floor_rank(double x) {
  const double f = std::floor(x + 1e-9);
  return f <= 0.0 ? 0 : static_cast<std::size_t>(f);
}

inline double kth_smallest(std::vector<double>& scores, std::size_t k) {
  std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   scores.end());
  return scores[k - 1];
}

inline void check_scores(const std::vector<double>& scores, double alpha,
                         const char* who) {
  if (scores.empty()) throw DataError(std::string(who) + ": empty score list");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError(std::string(who) + ": alpha must lie in (0, 1)");
  for (double v : scores)
    if (std::isnan(v)) throw NumericError(std::string(who) + ": NaN score");
}

}  // namespace detail

// Finite-sample-corrected empirical (1-alpha)-quantile: the k-th smallest
// score with k = ceil((N+1)(1-alpha)). Returns +infinity when k exceeds N,
// which realizes the point mass the correction places above all scores.
inline double upper_conformal_quantile(std::vector<double> scores, double alpha) {
  detail::check_scores(scores, alpha, "upper_conformal_quantile");
  const std::size_t n = scores.size();
  // alpha < 1 keeps the mathematical rank >= 1; the max guards the nudge
  // at alphas within 1e-9 of 1.
  const std::size_t k = std::max<std::size_t>(
      detail::ceil_rank(static_cast<double>(n + 1) * (1.0 - alpha)), 1);
  if (k > n) return kInfinity;
  return detail::kth_smallest(scores, k);
}

// Lower-tail counterpart used by the long-form orientation, where large
// scores are good: the k-th smallest score with k = floor((N+1) alpha).
// k = 0 yields the retain-nothing sentinel 0. On finite inputs this equals
// -upper_conformal_quantile(negated scores, alpha).
inline double lower_conformal_threshold(std::vector<double> scores, double alpha) {
  detail::check_scores(scores, alpha, "lower_conformal_threshold");
  const std::size_t n = scores.size();
  // alpha < 1 keeps the mathematical rank <= n; the min guards the nudge
  // at alphas within 1e-9 of 1.
  const std::size_t k = std::min(
      detail::floor_rank(static_cast<double>(n + 1) * alpha), n);
  if (k == 0) return 0.0;
  return detail::kth_smallest(scores, k);
}

// Input-conditional normalization of a nonconformity score. +infinity
// propagates through every mode.
inline double transform_score(double v, double tau, TransformMode mode) {
  switch (mode) {
    case TransformMode::multiplicative:
      if (!(tau > 0.0)) throw NumericError("transform_score: tau must be positive");
      return v / tau;
    case TransformMode::additive:
      return v - tau;
    case TransformMode::none:
      return v;
  }
  return v;
}

// Quantile level the regressor is trained at. The long-form score is a
// "largest safe threshold" (large = good), so its pipeline normalizes by
// the lower alpha-quantile; the MCQA LAC score has the standard
// orientation and uses the upper (1-alpha)-quantile.
inline double regressor_level_for(Task task, double alpha) {
  return task == Task::longform ? alpha : 1.0 - alpha;
}

// Orientation-aware threshold over transformed calibration scores. The
// long-form k = 0 retain-nothing sentinel is 0 on the nonnegative raw and
// multiplicative scales; additively shifted scores can be negative, so
// there it becomes -infinity.
inline double calibrated_threshold(std::vector<double> transformed, double alpha,
                                   Task task, TransformMode mode) {
  if (task == Task::mcqa)
    return upper_conformal_quantile(std::move(transformed), alpha);
  const std::size_t n = transformed.size();
  const double t = lower_conformal_threshold(std::move(transformed), alpha);
  if (mode == TransformMode::additive &&
      detail::floor_rank(static_cast<double>(n + 1) * alpha) == 0)
    return -kInfinity;
  return t;
}

// Frozen calibration artifact: reduction model, optional learned
// normalizer and the calibrated threshold on the transformed scale.
struct CalibratedPredictor {
  Task task = Task::longform;
  double alpha = 0.2;
  TransformMode mode = TransformMode::none;
  PcaModel pca;
  std::optional<QuantileRegressor> regressor;  // absent when mode == none
  double threshold = 0.0;
  std::size_t calibration_size = 0;
  double tau_floor = 1e-3;

  // tau-hat for one raw embedding; identically 1 when no normalizer is
  // attached. The clamp applies only where a positive divisor is needed.
  double tau_for(const std::vector<double>& raw_embedding) const {
    if (mode == TransformMode::none || !regressor) return 1.0;
    const std::vector<double> reduced = transform_pca(pca, raw_embedding);
    if (mode == TransformMode::multiplicative)
      return predict_tau(*regressor, reduced, tau_floor);
    return regressor->predict_raw(reduced);
  }
};

namespace detail {

template <typename Record>
std::vector<std::vector<double>> embeddings_of(const std::vector<Record>& a,
                                               const std::vector<Record>& b) {
  std::vector<std::vector<double>> out;
  out.reserve(a.size() + b.size());
  for (const auto& r : a) out.push_back(r.embedding);
  for (const auto& r : b) out.push_back(r.embedding);
  return out;
}

}  // namespace detail

// Assembles a predictor from already-fitted parts: transforms the cal2
// scores with the supplied normalizer and calibrates the threshold with
// the orientation-appropriate order-statistic rule.
template <typename Record, typename ScoreFn>
CalibratedPredictor calibrate_with_parts(const std::vector<Record>& cal2,
                                         ScoreFn&& score_of, Task task,
                                         PcaModel pca,
                                         std::optional<QuantileRegressor> regressor,
                                         const PipelineConfig& cfg) {
  validate(cfg);
  if (cal2.empty()) throw DataError("calibrate: cal2 is empty");

  CalibratedPredictor pred;
  pred.task = task;
  pred.alpha = cfg.alpha;
  pred.mode = cfg.transform_mode;
  pred.pca = std::move(pca);
  pred.regressor = std::move(regressor);
  pred.tau_floor = cfg.tau_floor;
  pred.calibration_size = cal2.size();

  std::vector<double> transformed;
  transformed.reserve(cal2.size());
  for (const auto& rec : cal2)
    transformed.push_back(
        transform_score(score_of(rec), pred.tau_for(rec.embedding), pred.mode));

  pred.threshold = calibrated_threshold(std::move(transformed), cfg.alpha, task, pred.mode);
  return pred;
}

namespace detail {

template <typename Record, typename ScoreFn>
CalibratedPredictor calibrate_impl(const std::vector<Record>& cal1,
                                   const std::vector<Record>& cal2,
                                   ScoreFn&& score_of, Task task,
                                   const PipelineConfig& cfg,
                                   const TrainConfig& train_cfg) {
  validate(cfg);
  if (cal1.empty() || cal2.empty())
    throw DataError("calibrate: calibration splits must be non-empty");

  // PCA is fit on cal1 and cal2 jointly; test embeddings never shape the
  // basis.
  PcaModel pca = fit_pca(embeddings_of(cal1, cal2), cfg.pca_dim);

  std::optional<QuantileRegressor> regressor;
  if (cfg.transform_mode != TransformMode::none) {
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (const auto& rec : cal1) {
      const double v = score_of(rec);
      if (!std::isfinite(v)) continue;  // all-correct records carry no target
      xs.push_back(transform_pca(pca, rec.embedding));
      ys.push_back(v);
    }
    if (xs.empty())
      throw DataError(
          "calibrate: every cal1 score is infinite, no regression targets; "
          "rerun with transform_mode=none");
    regressor = train_quantile_regressor(
        xs, ys, regressor_level_for(task, cfg.alpha), train_cfg);
  }

  return calibrate_with_parts(cal2, score_of, task, std::move(pca),
                              std::move(regressor), cfg);
}

}  // namespace detail

// Two-split adaptive calibration for long-form QA: fit the normalizer on
// cal1 scores, calibrate the threshold on cal2 transformed scores. cal2
// records with every claim correct enter as +infinity; they sit in the
// upper tail and never lower the threshold.
inline CalibratedPredictor calibrate_longform(const std::vector<LongFormRecord>& cal1,
                                              const std::vector<LongFormRecord>& cal2,
                                              const PipelineConfig& cfg,
                                              const TrainConfig& train_cfg) {
  return detail::calibrate_impl(
      cal1, cal2,
      [](const LongFormRecord& r) { return longform_score(r.claims); },
      Task::longform, cfg, train_cfg);
}

inline CalibratedPredictor calibrate_mcqa(const std::vector<McqaRecord>& cal1,
                                          const std::vector<McqaRecord>& cal2,
                                          const PipelineConfig& cfg,
                                          const TrainConfig& train_cfg) {
  return detail::calibrate_impl(
      cal1, cal2,
      [](const McqaRecord& r) { return lac_score(r.class_probs, r.true_class); },
      Task::mcqa, cfg, train_cfg);
}

// Retained claim indices: transformed claim uncertainty strictly below the
// calibrated threshold.
inline std::vector<std::size_t> filter_test_longform(const CalibratedPredictor& pred,
                                                     const LongFormRecord& record) {
  if (pred.task != Task::longform)
    throw DataError("filter_test_longform: predictor was calibrated for mcqa");
  const double tau = pred.tau_for(record.embedding);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < record.claims.size(); ++i)
    if (transform_score(record.claims[i].uncertainty, tau, pred.mode) < pred.threshold)
      kept.push_back(i);
  return kept;
}

// Prediction set: classes whose transformed LAC score is at most the
// calibrated threshold.
inline std::vector<std::size_t> predict_set_mcqa(const CalibratedPredictor& pred,
                                                 const McqaRecord& record) {
  if (pred.task != Task::mcqa)
    throw DataError("predict_set_mcqa: predictor was calibrated for longform");
  const double tau = pred.tau_for(record.embedding);
  std::vector<std::size_t> set;
  for (std::size_t y = 0; y < record.class_probs.size(); ++y)
    if (transform_score(lac_score(record.class_probs, y), tau, pred.mode) <=
        pred.threshold)
      set.push_back(y);
  return set;
}

}  // namespace acp
