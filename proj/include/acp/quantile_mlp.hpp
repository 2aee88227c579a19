#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "acp/common.hpp"
#include "acp/linalg.hpp"
#include "acp/rng.hpp"

namespace acp {

// Asymmetric check loss; its minimizer is the conditional quantile at
// `level`.
inline double pinball_loss(double prediction, double target, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("pinball_loss: level must lie in (0, 1)");
  if (!std::isfinite(prediction) || !std::isfinite(target))
    throw NumericError("pinball_loss: non-finite input");
  const double diff = target - prediction;
  return std::max(level * diff, (level - 1.0) * diff);
}

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-2;
  int hidden_dim = 64;
  double weight_init_scale = 1.0;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs <= 0 || cfg.batch_size <= 0 || cfg.hidden_dim <= 0 ||
      !(cfg.learning_rate > 0.0) || !(cfg.weight_init_scale > 0.0))
    throw ConfigError("train config fields must all be positive");
}

// Two-layer ReLU MLP estimating the conditional `level`-quantile of a
// score given a reduced embedding.
struct QuantileRegressor {
  double level = 0.5;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix w1;               // hidden_dim x input_dim
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // hidden_dim
  double b2 = 0.0;

  bool operator==(const QuantileRegressor&) const = default;

  double predict_raw(const std::vector<double>& x) const {
    if (x.size() != input_dim)
      throw DataError("quantile regressor: expected dimension " +
                      std::to_string(input_dim) + ", got " + std::to_string(x.size()));
    double out = b2;
    for (std::size_t h = 0; h < hidden_dim; ++h) {
      double pre = b1[h];
      const double* row = &w1.data[h * input_dim];
      for (std::size_t j = 0; j < input_dim; ++j) pre += row[j] * x[j];
      if (pre > 0.0) out += w2[h] * pre;
    }
    return out;
  }
};

// Forward pass clamped below at tau_floor so multiplicative normalization
// always divides by a positive value.
inline double predict_tau(const QuantileRegressor& reg,
                          const std::vector<double>& x, double tau_floor) {
  return std::max(reg.predict_raw(x), tau_floor);
}

struct MlpGradient {
  Matrix w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
};

// Mean pinball loss over a batch, optionally with its gradient. The same
// code path drives training and the finite-difference checks. ReLU
// subgradient at 0 is taken as 0.
inline double pinball_loss_and_gradient(const QuantileRegressor& reg,
                                        const std::vector<std::vector<double>>& xs,
                                        const std::vector<double>& ys,
                                        MlpGradient* grad = nullptr) {
  if (xs.empty() || xs.size() != ys.size())
    throw DataError("loss_and_gradient: empty or mismatched batch");
  if (grad) {
    grad->w1 = Matrix(reg.hidden_dim, reg.input_dim);
    grad->b1.assign(reg.hidden_dim, 0.0);
    grad->w2.assign(reg.hidden_dim, 0.0);
    grad->b2 = 0.0;
  }
  const double inv_n = 1.0 / static_cast<double>(xs.size());
  double total = 0.0;
  std::vector<double> hidden(reg.hidden_dim);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const std::vector<double>& x = xs[s];
    if (x.size() != reg.input_dim)
      throw DataError("loss_and_gradient: sample dimension mismatch");
    double pred = reg.b2;
    for (std::size_t h = 0; h < reg.hidden_dim; ++h) {
      double pre = reg.b1[h];
      const double* row = &reg.w1.data[h * reg.input_dim];
      for (std::size_t j = 0; j < reg.input_dim; ++j) pre += row[j] * x[j];
      hidden[h] = pre > 0.0 ? pre : 0.0;
      pred += reg.w2[h] * hidden[h];
    }
    total += pinball_loss(pred, ys[s], reg.level) * inv_n;
    if (!grad) continue;

    const double diff = ys[s] - pred;
    double dpred;  // d loss / d prediction
    if (diff > 0.0)
      dpred = -reg.level;
    else if (diff < 0.0)
      dpred = 1.0 - reg.level;
    else
      dpred = 0.0;
    dpred *= inv_n;

    grad->b2 += dpred;
    for (std::size_t h = 0; h < reg.hidden_dim; ++h) {
      grad->w2[h] += dpred * hidden[h];
      if (hidden[h] > 0.0) {
        const double dpre = dpred * reg.w2[h];
        grad->b1[h] += dpre;
        double* grow = &grad->w1.data[h * reg.input_dim];
        for (std::size_t j = 0; j < reg.input_dim; ++j) grow[j] += dpre * x[j];
      }
    }
  }
  return total;
}

// Plain mini-batch gradient descent. The step size stays at learning_rate
// for the first half of the epochs, then decays harmonically to 1/20 of
// it: pinball subgradients never vanish at the optimum, so a constant
// rate leaves a persistent oscillation larger than the accuracy the
// calibration pipeline needs. The schedule is a fixed function of the
// epoch index; initialization and per-epoch shuffles come from one seeded
// stream, so identical config and data give bitwise-identical weights.
inline QuantileRegressor train_quantile_regressor(
    const std::vector<std::vector<double>>& xs, const std::vector<double>& ys,
    double level, const TrainConfig& cfg) {
  validate(cfg);
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("train_quantile_regressor: level must lie in (0, 1)");
  if (xs.empty() || xs.size() != ys.size())
    throw DataError("train_quantile_regressor: empty or mismatched training set");
  for (double y : ys)
    if (!std::isfinite(y))
      throw DataError("train_quantile_regressor: targets must be finite");

  const std::size_t n = xs.size();
  const std::size_t input_dim = xs.front().size();
  for (const auto& x : xs)
    if (x.size() != input_dim)
      throw DataError("train_quantile_regressor: inconsistent input dimensions");

  QuantileRegressor reg;
  reg.level = level;
  reg.input_dim = input_dim;
  reg.hidden_dim = static_cast<std::size_t>(cfg.hidden_dim);
  reg.w1 = Matrix(reg.hidden_dim, input_dim);
  reg.b1.assign(reg.hidden_dim, 0.0);
  reg.w2.assign(reg.hidden_dim, 0.0);
  reg.b2 = 0.0;

  Rng rng(cfg.seed);
  const double s1 = cfg.weight_init_scale / std::sqrt(static_cast<double>(input_dim));
  for (double& w : reg.w1.data) w = rng.uniform(-s1, s1);
  const double s2 = cfg.weight_init_scale / std::sqrt(static_cast<double>(reg.hidden_dim));
  for (double& w : reg.w2) w = rng.uniform(-s2, s2);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<std::vector<double>> batch_x;
  std::vector<double> batch_y;
  MlpGradient grad;

  const int warm_epochs = cfg.epochs / 2;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate;
    if (epoch >= warm_epochs && cfg.epochs - warm_epochs > 1) {
      const double progress = static_cast<double>(epoch - warm_epochs) /
                              static_cast<double>(cfg.epochs - warm_epochs - 1);
      lr = cfg.learning_rate / (1.0 + 19.0 * progress);
    }
    shuffle(order, rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch_x.push_back(xs[order[i]]);
        batch_y.push_back(ys[order[i]]);
      }
      const double loss = pinball_loss_and_gradient(reg, batch_x, batch_y, &grad);
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
      for (std::size_t i = 0; i < reg.w1.data.size(); ++i) reg.w1.data[i] -= lr * grad.w1.data[i];
      for (std::size_t h = 0; h < reg.hidden_dim; ++h) {
        reg.b1[h] -= lr * grad.b1[h];
        reg.w2[h] -= lr * grad.w2[h];
      }
      reg.b2 -= lr * grad.b2;
    }
  }
  return reg;
}

}  // namespace acp
