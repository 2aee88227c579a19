#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "acp/common.hpp"
#include "acp/conformal.hpp"
#include "acp/data.hpp"
#include "acp/pca.hpp"
#include "acp/quantile_mlp.hpp"
#include "acp/synth.hpp"

namespace acp {

namespace cfgjson {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw ConfigError(std::string("config: missing field \"") + field + "\"");
  return *it;
}

inline double number(const nlohmann::json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_number())
    throw ConfigError(std::string("config: field \"") + field + "\" must be a number");
  return v.get<double>();
}

inline double number_or(const nlohmann::json& obj, const char* field, double fallback) {
  return obj.contains(field) ? number(obj, field) : fallback;
}

inline std::int64_t integer(const nlohmann::json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_number_integer())
    throw ConfigError(std::string("config: field \"") + field + "\" must be an integer");
  return v.get<std::int64_t>();
}

inline std::int64_t integer_or(const nlohmann::json& obj, const char* field,
                               std::int64_t fallback) {
  return obj.contains(field) ? integer(obj, field) : fallback;
}

inline std::string text(const nlohmann::json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_string())
    throw ConfigError(std::string("config: field \"") + field + "\" must be a string");
  return v.get<std::string>();
}

inline std::string text_or(const nlohmann::json& obj, const char* field,
                           const std::string& fallback) {
  return obj.contains(field) ? text(obj, field) : fallback;
}

inline std::vector<double> real_vector(const nlohmann::json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_array())
    throw ConfigError(std::string("config: field \"") + field + "\" must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number())
      throw ConfigError(std::string("config: field \"") + field +
                        "\" must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace cfgjson

// JSON cannot carry +infinity; extended reals are stored as the string
// "inf" where they can legitimately occur (calibrated thresholds).
inline nlohmann::json extended_to_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

inline double extended_from_json(const nlohmann::json& v, const char* field) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return kInfinity;
    throw DataError(std::string("artifact: field \"") + field + "\" has unknown value");
  }
  if (!v.is_number())
    throw DataError(std::string("artifact: field \"") + field + "\" must be a number or \"inf\"");
  return v.get<double>();
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows, const char* field) {
  if (!rows.is_array() || rows.empty())
    throw DataError(std::string("artifact: field \"") + field + "\" must be a non-empty array");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto& row = rows[i];
    if (!row.is_array() || row.size() != m.cols)
      throw DataError(std::string("artifact: ragged matrix in field \"") + field + "\"");
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = row[j].get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------
// Fitted-artifact persistence (versioned JSON).
// ---------------------------------------------------------------------

inline constexpr int kArtifactVersion = 1;

inline void check_artifact_header(const nlohmann::json& obj, const char* kind) {
  if (cfgjson::integer_or(obj, "version", -1) != kArtifactVersion)
    throw DataError(std::string("artifact: unsupported version for ") + kind);
  if (cfgjson::text_or(obj, "kind", "") != kind)
    throw DataError(std::string("artifact: expected kind \"") + kind + "\"");
}

inline nlohmann::json to_json(const PcaModel& model) {
  return {{"version", kArtifactVersion},
          {"kind", "pca_model"},
          {"input_dim", model.input_dim},
          {"output_dim", model.output_dim},
          {"mean", model.mean},
          {"components", matrix_to_json(model.components)}};
}

inline PcaModel pca_from_json(const nlohmann::json& obj) {
  check_artifact_header(obj, "pca_model");
  PcaModel model;
  model.input_dim = static_cast<std::size_t>(cfgjson::integer(obj, "input_dim"));
  model.output_dim = static_cast<std::size_t>(cfgjson::integer(obj, "output_dim"));
  model.mean = cfgjson::real_vector(obj, "mean");
  model.components = matrix_from_json(cfgjson::require(obj, "components"), "components");
  if (model.mean.size() != model.input_dim ||
      model.components.rows != model.output_dim ||
      model.components.cols != model.input_dim)
    throw DataError("artifact: inconsistent pca_model dimensions");
  return model;
}

inline nlohmann::json to_json(const QuantileRegressor& reg, double tau_floor) {
  return {{"version", kArtifactVersion},
          {"kind", "quantile_regressor"},
          {"level", reg.level},
          {"input_dim", reg.input_dim},
          {"hidden_dim", reg.hidden_dim},
          {"w1", matrix_to_json(reg.w1)},
          {"b1", reg.b1},
          {"w2", reg.w2},
          {"b2", reg.b2},
          {"tau_floor", tau_floor}};
}

inline std::pair<QuantileRegressor, double> regressor_from_json(const nlohmann::json& obj) {
  check_artifact_header(obj, "quantile_regressor");
  QuantileRegressor reg;
  reg.level = cfgjson::number(obj, "level");
  reg.input_dim = static_cast<std::size_t>(cfgjson::integer(obj, "input_dim"));
  reg.hidden_dim = static_cast<std::size_t>(cfgjson::integer(obj, "hidden_dim"));
  reg.w1 = matrix_from_json(cfgjson::require(obj, "w1"), "w1");
  reg.b1 = cfgjson::real_vector(obj, "b1");
  reg.w2 = cfgjson::real_vector(obj, "w2");
  reg.b2 = cfgjson::number(obj, "b2");
  const double tau_floor = cfgjson::number(obj, "tau_floor");
  if (reg.w1.rows != reg.hidden_dim || reg.w1.cols != reg.input_dim ||
      reg.b1.size() != reg.hidden_dim || reg.w2.size() != reg.hidden_dim)
    throw DataError("artifact: inconsistent quantile_regressor dimensions");
  return {std::move(reg), tau_floor};
}

inline nlohmann::json to_json(const CalibratedPredictor& pred) {
  nlohmann::json obj = {{"version", kArtifactVersion},
                        {"kind", "calibrated_predictor"},
                        {"task", to_string(pred.task)},
                        {"alpha", pred.alpha},
                        {"transform_mode", to_string(pred.mode)},
                        {"threshold", extended_to_json(pred.threshold)},
                        {"calibration_size", pred.calibration_size},
                        {"tau_floor", pred.tau_floor},
                        {"pca", to_json(pred.pca)}};
  obj["regressor"] = pred.regressor ? to_json(*pred.regressor, pred.tau_floor)
                                    : nlohmann::json(nullptr);
  return obj;
}

inline CalibratedPredictor predictor_from_json(const nlohmann::json& obj) {
  check_artifact_header(obj, "calibrated_predictor");
  CalibratedPredictor pred;
  pred.task = task_from_string(cfgjson::text(obj, "task"));
  pred.alpha = cfgjson::number(obj, "alpha");
  pred.mode = transform_mode_from_string(cfgjson::text(obj, "transform_mode"));
  pred.threshold = extended_from_json(cfgjson::require(obj, "threshold"), "threshold");
  pred.calibration_size = static_cast<std::size_t>(cfgjson::integer(obj, "calibration_size"));
  pred.tau_floor = cfgjson::number(obj, "tau_floor");
  pred.pca = pca_from_json(cfgjson::require(obj, "pca"));
  const auto& reg = cfgjson::require(obj, "regressor");
  if (!reg.is_null()) pred.regressor = regressor_from_json(reg).first;
  return pred;
}

// ---------------------------------------------------------------------
// Config files.
// ---------------------------------------------------------------------

struct FullPipelineConfig {
  PipelineConfig pipeline;
  SplitSpec split;
  TrainConfig train;
};

inline TrainConfig train_config_from_json(const nlohmann::json& obj,
                                          std::uint64_t default_seed) {
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(cfgjson::integer_or(obj, "epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(cfgjson::integer_or(obj, "batch_size", cfg.batch_size));
  cfg.learning_rate = cfgjson::number_or(obj, "learning_rate", cfg.learning_rate);
  cfg.hidden_dim = static_cast<int>(cfgjson::integer_or(obj, "hidden_dim", cfg.hidden_dim));
  cfg.weight_init_scale =
      cfgjson::number_or(obj, "weight_init_scale", cfg.weight_init_scale);
  cfg.seed = static_cast<std::uint64_t>(cfgjson::integer_or(
      obj, "seed", static_cast<std::int64_t>(default_seed)));
  validate(cfg);
  return cfg;
}

inline FullPipelineConfig pipeline_config_from_json(const nlohmann::json& obj) {
  FullPipelineConfig full;
  full.pipeline.alpha = cfgjson::number_or(obj, "alpha", full.pipeline.alpha);
  full.pipeline.beta = cfgjson::number_or(obj, "beta", full.pipeline.beta);
  full.pipeline.transform_mode = transform_mode_from_string(
      cfgjson::text_or(obj, "transform_mode", to_string(full.pipeline.transform_mode)));
  full.pipeline.pca_dim =
      static_cast<std::size_t>(cfgjson::integer_or(obj, "pca_dim", 32));
  full.pipeline.tau_floor = cfgjson::number_or(obj, "tau_floor", full.pipeline.tau_floor);
  full.pipeline.seed =
      static_cast<std::uint64_t>(cfgjson::integer_or(obj, "seed", 0));
  validate(full.pipeline);

  full.split.seed = full.pipeline.seed;
  if (obj.contains("split")) {
    const auto& split = obj["split"];
    const auto props = cfgjson::real_vector(split, "proportions");
    if (props.size() != 3)
      throw ConfigError("config: split proportions must have 3 entries");
    full.split.proportions = {props[0], props[1], props[2]};
    full.split.seed = static_cast<std::uint64_t>(cfgjson::integer_or(
        split, "seed", static_cast<std::int64_t>(full.pipeline.seed)));
  }
  validate(full.split);

  full.train.seed = full.pipeline.seed;
  if (obj.contains("train"))
    full.train = train_config_from_json(obj["train"], full.pipeline.seed);
  return full;
}

inline nlohmann::json to_json(const FullPipelineConfig& full) {
  return {{"alpha", full.pipeline.alpha},
          {"beta", full.pipeline.beta},
          {"transform_mode", to_string(full.pipeline.transform_mode)},
          {"pca_dim", full.pipeline.pca_dim},
          {"tau_floor", full.pipeline.tau_floor},
          {"seed", full.pipeline.seed},
          {"split",
           {{"proportions", full.split.proportions}, {"seed", full.split.seed}}},
          {"train",
           {{"epochs", full.train.epochs},
            {"batch_size", full.train.batch_size},
            {"learning_rate", full.train.learning_rate},
            {"hidden_dim", full.train.hidden_dim},
            {"weight_init_scale", full.train.weight_init_scale},
            {"seed", full.train.seed}}}};
}

inline SyntheticCategorySpec category_spec_from_json(const nlohmann::json& obj) {
  SyntheticCategorySpec spec;
  spec.name = cfgjson::text(obj, "name");
  spec.embedding_center = cfgjson::real_vector(obj, "embedding_center");
  spec.embedding_noise = cfgjson::number_or(obj, "embedding_noise", spec.embedding_noise);
  spec.claims_min = static_cast<int>(cfgjson::integer_or(obj, "claims_min", spec.claims_min));
  spec.claims_max = static_cast<int>(cfgjson::integer_or(obj, "claims_max", spec.claims_max));
  spec.uncertainty_scale =
      cfgjson::number_or(obj, "uncertainty_scale", spec.uncertainty_scale);
  spec.incorrect_rate = cfgjson::number_or(obj, "incorrect_rate", spec.incorrect_rate);
  spec.sharpness = cfgjson::number_or(obj, "sharpness", spec.sharpness);
  spec.num_classes = static_cast<int>(cfgjson::integer_or(obj, "num_classes", spec.num_classes));
  validate(spec);
  return spec;
}

struct SynthSpec {
  Task task = Task::longform;
  std::size_t n_per_category = 100;
  std::uint64_t seed = 0;
  std::vector<SyntheticCategorySpec> categories;
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& obj) {
  SynthSpec spec;
  spec.task = task_from_string(cfgjson::text(obj, "task"));
  spec.n_per_category =
      static_cast<std::size_t>(cfgjson::integer(obj, "n_per_category"));
  spec.seed = static_cast<std::uint64_t>(cfgjson::integer_or(obj, "seed", 0));
  const auto& cats = cfgjson::require(obj, "categories");
  if (!cats.is_array() || cats.empty())
    throw ConfigError("config: field \"categories\" must be a non-empty array");
  for (const auto& c : cats) spec.categories.push_back(category_spec_from_json(c));
  return spec;
}

inline TrialConfig trial_config_from_json(const nlohmann::json& obj) {
  TrialConfig cfg;
  cfg.task = task_from_string(cfgjson::text(obj, "task"));
  cfg.alpha = cfgjson::number(obj, "alpha");
  cfg.n_cal1 = static_cast<std::size_t>(cfgjson::integer_or(obj, "n_cal1", 100));
  cfg.n_cal2 = static_cast<std::size_t>(cfgjson::integer(obj, "n_cal2"));
  cfg.trials = static_cast<std::size_t>(cfgjson::integer(obj, "trials"));
  cfg.method = trial_method_from_string(cfgjson::text(obj, "method"));
  cfg.mode = transform_mode_from_string(
      cfgjson::text_or(obj, "transform_mode", to_string(cfg.mode)));
  cfg.pca_dim = static_cast<std::size_t>(cfgjson::integer_or(obj, "pca_dim", 2));
  cfg.tau_floor = cfgjson::number_or(obj, "tau_floor", cfg.tau_floor);
  cfg.seed = static_cast<std::uint64_t>(cfgjson::integer_or(obj, "seed", 0));
  if (obj.contains("train")) cfg.train = train_config_from_json(obj["train"], cfg.seed);
  return cfg;
}

// ---------------------------------------------------------------------
// File helpers.
// ---------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp);
    out << content;
    if (!out) throw DataError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot rename " + tmp + " to " + path);
}

inline nlohmann::json load_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path + ": " + e.what());
  }
}

// Same loader, but problems with a user-supplied config file are config
// errors, not data errors.
inline nlohmann::json load_config_file(const std::string& path) {
  try {
    return load_json_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

inline void save_predictor_file(const std::string& path, const CalibratedPredictor& pred) {
  atomic_write_file(path, to_json(pred).dump(2) + "\n");
}

inline CalibratedPredictor load_predictor_file(const std::string& path) {
  return predictor_from_json(load_json_file(path));
}

}  // namespace acp
