#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "acp/common.hpp"
#include "acp/conformal.hpp"
#include "acp/data.hpp"
#include "acp/rng.hpp"

namespace acp {

// One synthetic prompt category. Claim uncertainties are uniform on
// [0, uncertainty_scale] and each claim is incorrect independently with
// incorrect_rate, so the conditional distribution of the long-form score
// (and of the LAC score, via the sharpness model below) is closed-form.
struct SyntheticCategorySpec {
  std::string name;
  std::vector<double> embedding_center;
  double embedding_noise = 0.25;
  int claims_min = 2;
  int claims_max = 6;
  double uncertainty_scale = 1.0;
  double incorrect_rate = 0.5;
  // MCQA concentration model: simplex flatness u = W^sharpness with
  // W ~ U[0,1). sharpness 0 gives exactly uniform simplexes; +infinity
  // gives one-hot simplexes. Harder categories use smaller sharpness.
  double sharpness = 1.0;
  int num_classes = 4;
};

inline void validate(const SyntheticCategorySpec& spec) {
  if (spec.name.empty()) throw ConfigError("synthetic category needs a name");
  if (spec.embedding_center.empty())
    throw ConfigError("category \"" + spec.name + "\": embedding_center is empty");
  if (!(spec.embedding_noise > 0.0))
    throw ConfigError("category \"" + spec.name + "\": embedding_noise must be positive");
  if (spec.claims_min < 1 || spec.claims_max < spec.claims_min)
    throw ConfigError("category \"" + spec.name + "\": invalid claims range");
  if (!(spec.uncertainty_scale > 0.0))
    throw ConfigError("category \"" + spec.name + "\": uncertainty_scale must be positive");
  if (!(spec.incorrect_rate > 0.0 && spec.incorrect_rate < 1.0))
    throw ConfigError("category \"" + spec.name + "\": incorrect_rate must lie in (0, 1)");
  if (spec.sharpness < 0.0)
    throw ConfigError("category \"" + spec.name + "\": sharpness must be nonnegative");
  if (spec.num_classes < 2)
    throw ConfigError("category \"" + spec.name + "\": num_classes must be at least 2");
}

namespace synth_detail {

inline std::vector<double> draw_embedding(const SyntheticCategorySpec& spec, Rng& rng) {
  std::vector<double> e(spec.embedding_center.size());
  for (std::size_t j = 0; j < e.size(); ++j)
    e[j] = spec.embedding_center[j] + spec.embedding_noise * rng.gaussian();
  return e;
}

}  // namespace synth_detail

// Generation tolerates incorrect_rate == 0 (the all-claims-correct limit);
// validate() guards configs, where a rate in (0, 1) keeps the conditional
// quantiles finite.
inline LongFormRecord draw_longform_record(const SyntheticCategorySpec& spec,
                                           Rng& rng, std::string id) {
  LongFormRecord rec;
  rec.id = std::move(id);
  rec.category = spec.name;
  rec.embedding = synth_detail::draw_embedding(spec, rng);
  const int m = rng.uniform_int(spec.claims_min, spec.claims_max);
  rec.claims.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    ClaimRecord c;
    c.text = "claim-" + std::to_string(j);
    c.uncertainty = rng.uniform(0.0, spec.uncertainty_scale);
    c.label = rng.bernoulli(spec.incorrect_rate) ? 0 : 1;
    rec.claims.push_back(std::move(c));
  }
  return rec;
}

inline McqaRecord draw_mcqa_record(const SyntheticCategorySpec& spec, Rng& rng,
                                   std::string id) {
  McqaRecord rec;
  rec.id = std::move(id);
  rec.category = spec.name;
  rec.embedding = synth_detail::draw_embedding(spec, rng);
  const auto k = static_cast<std::size_t>(spec.num_classes);
  const double u = spec.sharpness == 0.0 ? 1.0 : std::pow(rng.uniform(), spec.sharpness);
  const std::size_t mode_class = rng.uniform_index(k);
  rec.class_probs.assign(k, u / static_cast<double>(k));
  rec.class_probs[mode_class] =
      1.0 - u * static_cast<double>(k - 1) / static_cast<double>(k);
  // Calibrated world: the true class is drawn from the model's own simplex.
  double r = rng.uniform();
  rec.true_class = k - 1;
  for (std::size_t y = 0; y < k; ++y) {
    r -= rec.class_probs[y];
    if (r < 0.0) {
      rec.true_class = y;
      break;
    }
  }
  return rec;
}

inline std::vector<LongFormRecord> gen_longform(
    const std::vector<SyntheticCategorySpec>& specs, std::size_t n_per_category,
    std::uint64_t seed) {
  if (n_per_category < 1) throw ConfigError("gen_longform: n_per_category must be >= 1");
  std::vector<LongFormRecord> records;
  records.reserve(specs.size() * n_per_category);
  for (std::size_t c = 0; c < specs.size(); ++c) {
    Rng rng(derive_seed(seed, c));
    for (std::size_t i = 0; i < n_per_category; ++i)
      records.push_back(draw_longform_record(
          specs[c], rng, specs[c].name + "-" + std::to_string(i)));
  }
  return records;
}

inline std::vector<McqaRecord> gen_mcqa(const std::vector<SyntheticCategorySpec>& specs,
                                        std::size_t n_per_category,
                                        std::uint64_t seed) {
  if (n_per_category < 1) throw ConfigError("gen_mcqa: n_per_category must be >= 1");
  std::vector<McqaRecord> records;
  records.reserve(specs.size() * n_per_category);
  for (std::size_t c = 0; c < specs.size(); ++c) {
    Rng rng(derive_seed(seed, c));
    for (std::size_t i = 0; i < n_per_category; ++i)
      records.push_back(draw_mcqa_record(
          specs[c], rng, specs[c].name + "-" + std::to_string(i)));
  }
  return records;
}

// ---------------------------------------------------------------------
// Closed-form conditional distributions for the two synthetic worlds.
// These back the adaptive-oracle method and the derived test values.
// ---------------------------------------------------------------------

// P(V <= t) for the long-form score in one category, averaging the claim
// count over its range. P(V = +infinity) = E[(1 - r)^m].
inline double oracle_longform_cdf(const SyntheticCategorySpec& spec, double t) {
  if (t <= 0.0) return 0.0;
  const double frac = std::min(t / spec.uncertainty_scale, 1.0);
  const double keep = 1.0 - spec.incorrect_rate * frac;
  double acc = 0.0;
  int count = 0;
  for (int m = spec.claims_min; m <= spec.claims_max; ++m, ++count)
    acc += 1.0 - std::pow(keep, m);
  return acc / static_cast<double>(count);
}

inline double oracle_lac_cdf(const SyntheticCategorySpec& spec, double t) {
  if (t < 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double k = static_cast<double>(spec.num_classes);
  const double c = (k - 1.0) / k;
  const double s = spec.sharpness;
  if (s == 0.0) return t >= c ? 1.0 : 0.0;  // LAC is the constant 1 - 1/K
  if (std::isinf(s)) return 1.0;            // one-hot: LAC is the constant 0
  // u = W^s, W ~ U[0,1]. Correct-pick branch contributes (1 - cu) on
  // {cu <= t}; wrong-pick branch contributes cu on {1 - u/K <= t}.
  const double m1 = std::min(1.0, std::pow(t / c, 1.0 / s));
  const double term1 = m1 - c * std::pow(m1, s + 1.0) / (s + 1.0);
  const double ka = k * (1.0 - t);
  double term2 = 0.0;
  if (ka <= 1.0) {
    const double a = ka <= 0.0 ? 0.0 : std::pow(ka, 1.0 / s);
    term2 = c * (1.0 - std::pow(a, s + 1.0)) / (s + 1.0);
  }
  return term1 + term2;
}

namespace synth_detail {

template <typename Cdf>
double bisect_quantile(Cdf&& cdf, double level, double lo, double hi) {
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) >= level)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace synth_detail

// Exact conditional level-quantile of V in one category; +infinity when
// the level exceeds the finite mass.
inline double oracle_longform_quantile(const SyntheticCategorySpec& spec, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("oracle_longform_quantile: level must lie in (0, 1)");
  const double finite_mass = oracle_longform_cdf(spec, spec.uncertainty_scale);
  if (level > finite_mass) return kInfinity;
  return synth_detail::bisect_quantile(
      [&spec](double t) { return oracle_longform_cdf(spec, t); }, level, 0.0,
      spec.uncertainty_scale);
}

inline double oracle_lac_quantile(const SyntheticCategorySpec& spec, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("oracle_lac_quantile: level must lie in (0, 1)");
  if (std::isinf(spec.sharpness)) return 0.0;
  return synth_detail::bisect_quantile(
      [&spec](double t) { return oracle_lac_cdf(spec, t); }, level, 0.0, 1.0);
}

// ---------------------------------------------------------------------
// Monte Carlo verification harness.
// ---------------------------------------------------------------------

enum class TrialMethod { original, adaptive_oracle, adaptive_learned };

inline std::string to_string(TrialMethod m) {
  switch (m) {
    case TrialMethod::original: return "original";
    case TrialMethod::adaptive_oracle: return "adaptive-oracle";
    case TrialMethod::adaptive_learned: return "adaptive-learned";
  }
  return "original";
}

inline TrialMethod trial_method_from_string(const std::string& s) {
  if (s == "original") return TrialMethod::original;
  if (s == "adaptive-oracle") return TrialMethod::adaptive_oracle;
  if (s == "adaptive-learned") return TrialMethod::adaptive_learned;
  throw ConfigError("unknown method \"" + s +
                    "\" (expected original, adaptive-oracle or adaptive-learned)");
}

struct TrialConfig {
  Task task = Task::longform;
  double alpha = 0.2;
  std::size_t n_cal1 = 100;  // adaptive-learned only
  std::size_t n_cal2 = 199;
  std::size_t trials = 1000;
  TrialMethod method = TrialMethod::original;
  TransformMode mode = TransformMode::multiplicative;  // adaptive methods
  std::size_t pca_dim = 2;                             // adaptive-learned
  double tau_floor = 1e-3;
  TrainConfig train;  // adaptive-learned
  std::uint64_t seed = 0;
};

struct TrialReport {
  std::size_t trials = 0;
  double success_rate = 0.0;
  std::map<std::string, double> per_category_rates;
  std::map<std::string, std::size_t> per_category_trials;
  double band_low = 0.0;   // 1 - alpha
  double band_high = 0.0;  // 1 - alpha + 1/(n_cal2 + 1), exclusive
};

namespace synth_detail {

struct DrawnRecord {
  std::size_t category = 0;
  LongFormRecord longform;
  McqaRecord mcqa;
};

inline DrawnRecord draw_record(const std::vector<SyntheticCategorySpec>& specs,
                               Task task, Rng& rng) {
  DrawnRecord d;
  d.category = rng.uniform_index(specs.size());
  if (task == Task::longform)
    d.longform = draw_longform_record(specs[d.category], rng, "");
  else
    d.mcqa = draw_mcqa_record(specs[d.category], rng, "");
  return d;
}

inline double record_score(const DrawnRecord& d, Task task) {
  return task == Task::longform
             ? longform_score(d.longform.claims)
             : lac_score(d.mcqa.class_probs, d.mcqa.true_class);
}

// Success under a plain transformed threshold, using the same comparison
// semantics as filter_test_longform / predict_set_mcqa.
inline bool record_success(const DrawnRecord& d, Task task, double tau,
                           TransformMode mode, double threshold) {
  if (task == Task::longform) {
    for (const auto& c : d.longform.claims)
      if (c.label == 0 &&
          transform_score(c.uncertainty, tau, mode) < threshold)
        return false;  // an incorrect claim was retained
    return true;
  }
  const double v = lac_score(d.mcqa.class_probs, d.mcqa.true_class);
  return transform_score(v, tau, mode) <= threshold;
}

}  // namespace synth_detail

// Each trial draws a fresh calibration set and a single test record,
// calibrates with the chosen method and records the Bernoulli success
// ("all retained claims correct" / "true class in set"). Per-trial seeds
// come from a splittable counter, so trials are independent and the
// report does not depend on evaluation order.
inline TrialReport run_coverage_trials(const std::vector<SyntheticCategorySpec>& specs,
                                       const TrialConfig& cfg) {
  if (specs.empty()) throw ConfigError("run_coverage_trials: no categories");
  for (const auto& s : specs) validate(s);
  if (cfg.trials < 1) throw ConfigError("run_coverage_trials: trials must be >= 1");
  if (cfg.n_cal2 < 1) throw ConfigError("run_coverage_trials: n_cal2 must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw ConfigError("run_coverage_trials: alpha must lie in (0, 1)");

  // Oracle taus are fixed functions of the category, computed once.
  std::vector<double> oracle_tau(specs.size(), 1.0);
  if (cfg.method == TrialMethod::adaptive_oracle) {
    const double level = regressor_level_for(cfg.task, cfg.alpha);
    for (std::size_t c = 0; c < specs.size(); ++c) {
      double tau = cfg.task == Task::longform
                       ? oracle_longform_quantile(specs[c], level)
                       : oracle_lac_quantile(specs[c], level);
      if (!std::isfinite(tau))
        throw ConfigError("oracle quantile is not finite for category \"" +
                          specs[c].name + "\"");
      if (cfg.mode == TransformMode::multiplicative)
        tau = std::max(tau, cfg.tau_floor);
      oracle_tau[c] = tau;
    }
  }

  std::map<std::string, std::size_t> cat_trials;
  std::map<std::string, std::size_t> cat_successes;
  std::size_t successes = 0;

  std::vector<synth_detail::DrawnRecord> cal2(cfg.n_cal2);
  std::vector<double> transformed(cfg.n_cal2);

  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    Rng rng(derive_seed(cfg.seed, trial));
    for (auto& d : cal2) d = synth_detail::draw_record(specs, cfg.task, rng);
    const auto test = synth_detail::draw_record(specs, cfg.task, rng);

    bool success = false;
    if (cfg.method == TrialMethod::adaptive_learned) {
      PipelineConfig pcfg;
      pcfg.alpha = cfg.alpha;
      pcfg.transform_mode = cfg.mode;
      pcfg.pca_dim = cfg.pca_dim;
      pcfg.tau_floor = cfg.tau_floor;
      TrainConfig tcfg = cfg.train;
      tcfg.seed = derive_seed(cfg.seed ^ 0x74726169ULL, trial);
      if (cfg.task == Task::longform) {
        std::vector<LongFormRecord> c1, c2;
        for (std::size_t i = 0; i < cfg.n_cal1; ++i)
          c1.push_back(synth_detail::draw_record(specs, cfg.task, rng).longform);
        for (const auto& d : cal2) c2.push_back(d.longform);
        const CalibratedPredictor pred = calibrate_longform(c1, c2, pcfg, tcfg);
        const auto kept = filter_test_longform(pred, test.longform);
        success = true;
        for (std::size_t idx : kept)
          if (test.longform.claims[idx].label == 0) success = false;
      } else {
        std::vector<McqaRecord> c1, c2;
        for (std::size_t i = 0; i < cfg.n_cal1; ++i)
          c1.push_back(synth_detail::draw_record(specs, cfg.task, rng).mcqa);
        for (const auto& d : cal2) c2.push_back(d.mcqa);
        const CalibratedPredictor pred = calibrate_mcqa(c1, c2, pcfg, tcfg);
        const auto set = predict_set_mcqa(pred, test.mcqa);
        success = std::find(set.begin(), set.end(), test.mcqa.true_class) != set.end();
      }
    } else {
      const TransformMode mode =
          cfg.method == TrialMethod::original ? TransformMode::none : cfg.mode;
      for (std::size_t i = 0; i < cfg.n_cal2; ++i)
        transformed[i] = transform_score(synth_detail::record_score(cal2[i], cfg.task),
                                         oracle_tau[cal2[i].category], mode);
      const double threshold = calibrated_threshold(transformed, cfg.alpha, cfg.task, mode);
      success = synth_detail::record_success(test, cfg.task,
                                             oracle_tau[test.category], mode, threshold);
    }

    const std::string& cat = specs[test.category].name;
    ++cat_trials[cat];
    if (success) {
      ++successes;
      ++cat_successes[cat];
    }
  }

  TrialReport report;
  report.trials = cfg.trials;
  report.success_rate = static_cast<double>(successes) / static_cast<double>(cfg.trials);
  for (const auto& [cat, n] : cat_trials) {
    report.per_category_trials[cat] = n;
    report.per_category_rates[cat] =
        static_cast<double>(cat_successes[cat]) / static_cast<double>(n);
  }
  report.band_low = 1.0 - cfg.alpha;
  report.band_high = 1.0 - cfg.alpha + 1.0 / (static_cast<double>(cfg.n_cal2) + 1.0);
  return report;
}

struct RankLawResult {
  std::uint64_t successes = 0;
  std::uint64_t total = 0;
};

// Exhaustive check of the rank argument behind the coverage guarantee:
// over every ordering of N+1 distinct positive scores (first N calibrate,
// last one is the test point), the success probability is exactly
// ceil((N+1)(1-alpha)) / (N+1), capped at 1. Scores must be positive so
// the long-form k = 0 sentinel really retains nothing.
inline RankLawResult enumerate_rank_law(std::vector<double> scores, double alpha,
                                        Task orientation) {
  if (scores.size() < 2 || scores.size() > 9)
    throw ConfigError("enumerate_rank_law: need 2..9 scores");
  for (double s : scores)
    if (!(s > 0.0)) throw ConfigError("enumerate_rank_law: scores must be positive");
  std::sort(scores.begin(), scores.end());
  RankLawResult out;
  std::vector<double> cal(scores.size() - 1);
  do {
    std::copy(scores.begin(), scores.end() - 1, cal.begin());
    const double test = scores.back();
    bool success;
    if (orientation == Task::longform)
      success = test >= lower_conformal_threshold(cal, alpha);
    else
      success = test <= upper_conformal_quantile(cal, alpha);
    ++out.total;
    if (success) ++out.successes;
  } while (std::next_permutation(scores.begin(), scores.end()));
  return out;
}

}  // namespace acp
