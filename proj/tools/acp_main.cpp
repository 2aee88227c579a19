// acp: prompt-adaptive conformal calibration for LLM factuality.
//
// Subcommands: synth, calibrate, filter, evaluate, profile,
// coverage-trials. Every run is reproducible: same inputs and seed give
// byte-identical outputs. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numeric failure.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acp/common.hpp"
#include "acp/conformal.hpp"
#include "acp/data.hpp"
#include "acp/eval.hpp"
#include "acp/persist.hpp"
#include "acp/synth.hpp"

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string digest_hex(const std::string& content) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64,
                acp::fnv1a64(content.data(), content.size()));
  return buf;
}

// Records inputs before any computation; written atomically at run end.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  json config = json::object();
  json inputs = json::object();
  std::vector<std::string> artifacts;

  void add_input(const std::string& path) {
    inputs[path] = "fnv1a64:" + digest_hex(acp::read_file(path));
  }

  void write(const std::string& out_dir) const {
    json obj = {{"tool_version", acp::kToolVersion}, {"command", command},
                {"seed", seed},           {"config", config},
                {"inputs", inputs},       {"artifacts", artifacts}};
    acp::atomic_write_file(out_dir + "/manifest.json", obj.dump(2) + "\n");
  }
};

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw acp::DataError("cannot create output directory " + out_dir);
}

// An unreadable config file is a config error, not a data error.
void add_config_input(RunManifest& manifest, const std::string& path) {
  try {
    manifest.add_input(path);
  } catch (const acp::DataError& e) {
    throw acp::ConfigError(e.what());
  }
}

acp::Task detect_task(const std::string& data_path) {
  std::ifstream in(data_path);
  if (!in) throw acp::DataError("cannot open file: " + data_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      if (obj.contains("claims")) return acp::Task::longform;
      if (obj.contains("probs")) return acp::Task::mcqa;
    } catch (const json::exception& e) {
      throw acp::DataError(std::string("line 1: malformed JSON: ") + e.what());
    }
    break;
  }
  throw acp::DataError("cannot detect task from " + data_path +
                       " (no claims/probs field); pass --task");
}

std::vector<acp::LongFormRecord> load_longform(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw acp::DataError("cannot open file: " + path);
  return acp::parse_longform_dataset(in);
}

std::vector<acp::McqaRecord> load_mcqa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw acp::DataError("cannot open file: " + path);
  return acp::parse_mcqa_dataset(in);
}

std::vector<double> parse_alpha_grid(const std::string& text) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 ||
      !(step > 0.0) || hi < lo)
    throw acp::ConfigError("--alphas expects lo:hi:step, got \"" + text + "\"");
  std::vector<double> out;
  for (double a = lo; a <= hi + step * 0.5; a += step) out.push_back(a);
  return out;
}

std::string coverage_csv(const acp::CoverageReport& report) {
  std::ostringstream out;
  out << "category,n,coverage,removed_fraction\n";
  for (const auto& [cat, stats] : report.per_category)
    out << cat << ',' << stats.n << ',' << format_double(stats.coverage) << ','
        << format_double(stats.removed_fraction) << '\n';
  std::size_t total = 0;
  for (const auto& [cat, stats] : report.per_category) total += stats.n;
  out << "marginal," << total << ',' << format_double(report.marginal_coverage)
      << ',' << format_double(report.marginal_removed) << '\n';
  return out.str();
}

void print_coverage(const acp::CoverageReport& report) {
  std::printf("target coverage %.4f\n", 1.0 - report.alpha);
  for (const auto& [cat, stats] : report.per_category)
    std::printf("  %-16s n=%-6zu coverage=%.4f removed=%.4f\n", cat.c_str(),
                stats.n, stats.coverage, stats.removed_fraction);
  std::printf("  %-16s coverage=%.4f removed=%.4f\n", "marginal",
              report.marginal_coverage, report.marginal_removed);
}

struct CommonFlags {
  std::string data_path;
  std::string config_path;
  std::string out_dir;
  std::string task_name;  // empty = auto-detect
  std::string subset = "test";
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::string> mode;            // original | adaptive
  std::optional<std::string> transform_mode;  // exact mode override
  std::optional<std::uint64_t> pca_dim;
  std::optional<double> tau_floor;
  std::optional<std::uint64_t> seed;
};

// Applies CLI overrides on top of the config file.
acp::FullPipelineConfig resolve_pipeline_config(const CommonFlags& flags) {
  acp::FullPipelineConfig full;
  if (!flags.config_path.empty())
    full = acp::pipeline_config_from_json(acp::load_config_file(flags.config_path));
  if (flags.alpha) full.pipeline.alpha = *flags.alpha;
  if (flags.beta) full.pipeline.beta = *flags.beta;
  if (flags.pca_dim) full.pipeline.pca_dim = *flags.pca_dim;
  if (flags.tau_floor) full.pipeline.tau_floor = *flags.tau_floor;
  if (flags.seed) {
    full.pipeline.seed = *flags.seed;
    full.split.seed = *flags.seed;
    full.train.seed = *flags.seed;
  }
  if (flags.transform_mode)
    full.pipeline.transform_mode = acp::transform_mode_from_string(*flags.transform_mode);
  if (flags.mode) {
    if (*flags.mode == "original") {
      full.pipeline.transform_mode = acp::TransformMode::none;
    } else if (*flags.mode == "adaptive") {
      if (full.pipeline.transform_mode == acp::TransformMode::none)
        full.pipeline.transform_mode = acp::TransformMode::multiplicative;
    } else {
      throw acp::ConfigError("--mode expects original or adaptive");
    }
  }
  validate(full.pipeline);
  validate(full.split);
  validate(full.train);
  return full;
}

std::string method_name(acp::TransformMode mode) {
  return mode == acp::TransformMode::none ? "original" : "adaptive";
}

// ---------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------

int cmd_synth(const CommonFlags& flags) {
  if (flags.config_path.empty()) throw acp::ConfigError("synth requires --config");
  RunManifest manifest;
  manifest.command = "synth";
  add_config_input(manifest, flags.config_path);

  acp::SynthSpec spec = acp::synth_spec_from_json(acp::load_config_file(flags.config_path));
  if (flags.seed) spec.seed = *flags.seed;
  manifest.seed = spec.seed;
  manifest.config = acp::load_config_file(flags.config_path);
  manifest.config["seed"] = spec.seed;

  ensure_out_dir(flags.out_dir);
  const std::string data_path = flags.out_dir + "/data.jsonl";
  std::ostringstream body;
  if (spec.task == acp::Task::longform)
    acp::write_jsonl(body, acp::gen_longform(spec.categories, spec.n_per_category, spec.seed));
  else
    acp::write_jsonl(body, acp::gen_mcqa(spec.categories, spec.n_per_category, spec.seed));
  acp::atomic_write_file(data_path, body.str());
  manifest.artifacts.push_back(data_path);
  manifest.write(flags.out_dir);
  std::printf("wrote %s (%zu categories x %zu records, task=%s, seed=%" PRIu64 ")\n",
              data_path.c_str(), spec.categories.size(), spec.n_per_category,
              acp::to_string(spec.task).c_str(), spec.seed);
  return 0;
}

// ---------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------

int cmd_calibrate(const CommonFlags& flags) {
  if (flags.data_path.empty()) throw acp::ConfigError("calibrate requires --data");
  RunManifest manifest;
  manifest.command = "calibrate";
  manifest.add_input(flags.data_path);
  if (!flags.config_path.empty()) add_config_input(manifest, flags.config_path);

  const acp::FullPipelineConfig full = resolve_pipeline_config(flags);
  manifest.seed = full.pipeline.seed;
  manifest.config = acp::to_json(full);

  const acp::Task task = flags.task_name.empty()
                             ? detect_task(flags.data_path)
                             : acp::task_from_string(flags.task_name);

  acp::CalibratedPredictor pred;
  if (task == acp::Task::longform) {
    const auto records = load_longform(flags.data_path);
    const auto split = acp::split_dataset(records, full.split);
    pred = acp::calibrate_longform(split.cal1, split.cal2, full.pipeline, full.train);
  } else {
    const auto records = load_mcqa(flags.data_path);
    const auto split = acp::split_dataset(records, full.split);
    pred = acp::calibrate_mcqa(split.cal1, split.cal2, full.pipeline, full.train);
  }

  ensure_out_dir(flags.out_dir);
  const std::string pred_path = flags.out_dir + "/predictor.json";
  acp::save_predictor_file(pred_path, pred);
  manifest.artifacts.push_back(pred_path);
  manifest.write(flags.out_dir);
  std::printf("calibrated %s predictor: mode=%s alpha=%s threshold=%s n_cal2=%zu\n",
              acp::to_string(task).c_str(), acp::to_string(pred.mode).c_str(),
              format_short(pred.alpha).c_str(), format_short(pred.threshold).c_str(),
              pred.calibration_size);
  return 0;
}

// ---------------------------------------------------------------------
// filter / evaluate share subset selection
// ---------------------------------------------------------------------

template <typename Record>
std::vector<Record> select_subset(std::vector<Record> records, const CommonFlags& flags,
                                  const acp::FullPipelineConfig& full) {
  if (flags.subset == "all") return records;
  if (flags.subset != "test")
    throw acp::ConfigError("--subset expects test or all");
  auto split = acp::split_dataset(records, full.split);
  return std::move(split.test);
}

// ---------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------

struct ProfileProblem {
  std::string category;
  std::uint64_t seed = 0;
  double alpha = 0.0;
};

template <typename Record>
void profile_collect(const std::vector<Record>& records,
                     const acp::FullPipelineConfig& base,
                     const std::vector<double>& alphas, std::uint64_t n_seeds,
                     std::vector<ProfileProblem>& problems,
                     std::vector<std::array<double, 2>>& errors) {
  for (std::uint64_t s = 0; s < n_seeds; ++s) {
    acp::SplitSpec split_spec = base.split;
    split_spec.seed = acp::derive_seed(base.split.seed, s);
    const auto split = acp::split_dataset(records, split_spec);
    if (split.test.empty()) throw acp::DataError("profile: empty test split");

    for (double alpha : alphas) {
      std::map<std::string, std::array<double, 2>> per_category;
      for (int m = 0; m < 2; ++m) {
        acp::PipelineConfig cfg = base.pipeline;
        cfg.alpha = alpha;
        cfg.transform_mode = m == 0 ? acp::TransformMode::none
                                    : (base.pipeline.transform_mode ==
                                               acp::TransformMode::none
                                           ? acp::TransformMode::multiplicative
                                           : base.pipeline.transform_mode);
        acp::TrainConfig train = base.train;
        train.seed = acp::derive_seed(base.train.seed, s);
        acp::CalibratedPredictor pred;
        if constexpr (std::is_same_v<Record, acp::LongFormRecord>)
          pred = acp::calibrate_longform(split.cal1, split.cal2, cfg, train);
        else
          pred = acp::calibrate_mcqa(split.cal1, split.cal2, cfg, train);
        const auto report =
            acp::coverage_by_group(acp::evaluate_records(pred, split.test), alpha);
        for (const auto& [cat, stats] : report.per_category)
          per_category[cat][static_cast<std::size_t>(m)] =
              acp::calibration_error(stats.coverage, alpha);
      }
      for (const auto& [cat, errs] : per_category) {
        problems.push_back({cat, s, alpha});
        errors.push_back(errs);
      }
    }
  }
}

int cmd_profile(const CommonFlags& flags, const std::string& alphas_text,
                std::uint64_t n_seeds) {
  if (flags.data_path.empty()) throw acp::ConfigError("profile requires --data");
  RunManifest manifest;
  manifest.command = "profile";
  manifest.add_input(flags.data_path);
  if (!flags.config_path.empty()) add_config_input(manifest, flags.config_path);

  const acp::FullPipelineConfig base = resolve_pipeline_config(flags);
  const std::vector<double> alphas = parse_alpha_grid(alphas_text);
  if (n_seeds < 1) throw acp::ConfigError("--seeds must be at least 1");
  manifest.seed = base.pipeline.seed;
  manifest.config = acp::to_json(base);
  manifest.config["alphas"] = alphas;
  manifest.config["n_seeds"] = n_seeds;

  const acp::Task task = flags.task_name.empty()
                             ? detect_task(flags.data_path)
                             : acp::task_from_string(flags.task_name);

  std::vector<ProfileProblem> problems;
  std::vector<std::array<double, 2>> errors;
  if (task == acp::Task::longform)
    profile_collect(load_longform(flags.data_path), base, alphas, n_seeds,
                    problems, errors);
  else
    profile_collect(load_mcqa(flags.data_path), base, alphas, n_seeds,
                    problems, errors);

  acp::Matrix error_matrix(errors.size(), 2);
  for (std::size_t p = 0; p < errors.size(); ++p) {
    error_matrix(p, 0) = errors[p][0];
    error_matrix(p, 1) = errors[p][1];
  }
  const acp::PerformanceProfile profile =
      acp::dolan_more(error_matrix, acp::log_delta_grid());
  const std::array<std::string, 2> methods = {"original", "adaptive"};

  ensure_out_dir(flags.out_dir);
  std::ostringstream rho_csv;
  rho_csv << "method,delta,rho\n";
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t g = 0; g < profile.delta_grid.size(); ++g)
      rho_csv << methods[m] << ',' << format_double(profile.delta_grid[g]) << ','
              << format_double(profile.rho(m, g)) << '\n';
  const std::string rho_path = flags.out_dir + "/profile_rho.csv";
  acp::atomic_write_file(rho_path, rho_csv.str());

  std::ostringstream ratio_csv;
  ratio_csv << "category,seed,alpha,method,error,ratio\n";
  for (std::size_t p = 0; p < problems.size(); ++p)
    for (std::size_t m = 0; m < methods.size(); ++m)
      ratio_csv << problems[p].category << ',' << problems[p].seed << ','
                << format_short(problems[p].alpha) << ',' << methods[m] << ','
                << format_double(error_matrix(p, m)) << ','
                << format_double(profile.ratios(p, m)) << '\n';
  const std::string ratio_path = flags.out_dir + "/profile_ratios.csv";
  acp::atomic_write_file(ratio_path, ratio_csv.str());

  manifest.artifacts.push_back(rho_path);
  manifest.artifacts.push_back(ratio_path);
  manifest.write(flags.out_dir);

  for (std::size_t m = 0; m < methods.size(); ++m)
    std::printf("rho_%s(1) = %.4f over %zu problems\n", methods[m].c_str(),
                profile.rho(m, 0), problems.size());
  return 0;
}

// ---------------------------------------------------------------------
// coverage-trials
// ---------------------------------------------------------------------

int cmd_coverage_trials(const CommonFlags& flags) {
  if (flags.config_path.empty())
    throw acp::ConfigError("coverage-trials requires --config");
  RunManifest manifest;
  manifest.command = "coverage-trials";
  add_config_input(manifest, flags.config_path);

  const json cfg_json = acp::load_config_file(flags.config_path);
  acp::TrialConfig cfg = acp::trial_config_from_json(cfg_json);
  std::vector<acp::SyntheticCategorySpec> specs;
  const auto& cats = acp::cfgjson::require(cfg_json, "categories");
  if (!cats.is_array() || cats.empty())
    throw acp::ConfigError("config: field \"categories\" must be a non-empty array");
  for (const auto& c : cats) specs.push_back(acp::category_spec_from_json(c));
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.alpha) cfg.alpha = *flags.alpha;
  manifest.seed = cfg.seed;
  manifest.config = cfg_json;
  manifest.config["seed"] = cfg.seed;
  manifest.config["alpha"] = cfg.alpha;

  const acp::TrialReport report = acp::run_coverage_trials(specs, cfg);

  ensure_out_dir(flags.out_dir);
  std::ostringstream csv;
  csv << "category,trials,success_rate,band_low,band_high\n";
  for (const auto& [cat, rate] : report.per_category_rates)
    csv << cat << ',' << report.per_category_trials.at(cat) << ','
        << format_double(rate) << ',' << format_double(report.band_low) << ','
        << format_double(report.band_high) << '\n';
  csv << "marginal," << report.trials << ',' << format_double(report.success_rate)
      << ',' << format_double(report.band_low) << ','
      << format_double(report.band_high) << '\n';
  const std::string stem = flags.out_dir + "/trials_a" + format_short(cfg.alpha) +
                           "_s" + std::to_string(cfg.seed) + "_" +
                           acp::to_string(cfg.method);
  acp::atomic_write_file(stem + ".csv", csv.str());
  json report_json = {{"trials", report.trials},
                      {"success_rate", report.success_rate},
                      {"per_category_rates", report.per_category_rates},
                      {"per_category_trials", report.per_category_trials},
                      {"theoretical_band", {report.band_low, report.band_high}},
                      {"method", acp::to_string(cfg.method)},
                      {"alpha", cfg.alpha},
                      {"n_cal2", cfg.n_cal2},
                      {"seed", cfg.seed}};
  acp::atomic_write_file(stem + ".json", report_json.dump(2) + "\n");
  manifest.artifacts.push_back(stem + ".csv");
  manifest.artifacts.push_back(stem + ".json");
  manifest.write(flags.out_dir);

  std::printf("method=%s trials=%zu success=%.4f band=[%.4f, %.4f)\n",
              acp::to_string(cfg.method).c_str(), report.trials,
              report.success_rate, report.band_low, report.band_high);
  for (const auto& [cat, rate] : report.per_category_rates)
    std::printf("  %-16s trials=%-6zu success=%.4f\n", cat.c_str(),
                report.per_category_trials.at(cat), rate);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive conformal calibration for LLM factuality"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string predictor_path;
  std::string alphas_text = "0.5:0.8:0.05";
  std::uint64_t n_seeds = 20;
  double alpha_flag = 0.0;
  double beta_flag = 1.0;
  double tau_floor_flag = 0.0;
  std::uint64_t pca_dim_flag = 0;
  std::uint64_t seed_flag = 0;
  std::string mode_flag;
  std::string transform_flag;

  auto add_common = [&](CLI::App* cmd, bool with_data, bool pipeline_flags) {
    if (with_data) cmd->add_option("--data", flags.data_path, "input JSONL dataset");
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--out", flags.out_dir, "output directory")->required();
    auto* seed_opt = cmd->add_option("--seed", seed_flag, "seed override");
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* beta_opt = nullptr;
    CLI::Option* pca_opt = nullptr;
    CLI::Option* floor_opt = nullptr;
    CLI::Option* mode_opt = nullptr;
    CLI::Option* transform_opt = nullptr;
    if (pipeline_flags) {
      cmd->add_option("--task", flags.task_name, "longform or mcqa (default: auto)");
      alpha_opt = cmd->add_option("--alpha", alpha_flag, "miscoverage level override");
      beta_opt = cmd->add_option("--beta", beta_flag, "factuality threshold override");
      pca_opt = cmd->add_option("--pca-dim", pca_dim_flag, "PCA output dimension override");
      floor_opt = cmd->add_option("--tau-floor", tau_floor_flag, "tau clamp override");
      mode_opt = cmd->add_option("--mode", mode_flag, "original or adaptive");
      transform_opt = cmd->add_option("--transform-mode", transform_flag,
                                      "multiplicative, additive or none");
    }
    cmd->callback([&, seed_opt, alpha_opt, beta_opt, pca_opt, floor_opt, mode_opt,
                   transform_opt]() {
      if (seed_opt->count()) flags.seed = seed_flag;
      if (alpha_opt && alpha_opt->count()) flags.alpha = alpha_flag;
      if (beta_opt && beta_opt->count()) flags.beta = beta_flag;
      if (pca_opt && pca_opt->count()) flags.pca_dim = pca_dim_flag;
      if (floor_opt && floor_opt->count()) flags.tau_floor = tau_floor_flag;
      if (mode_opt && mode_opt->count()) flags.mode = mode_flag;
      if (transform_opt && transform_opt->count()) flags.transform_mode = transform_flag;
    });
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, false, false);

  auto* calibrate = app.add_subcommand("calibrate", "fit and calibrate a predictor");
  add_common(calibrate, true, true);

  auto* filter = app.add_subcommand("filter", "apply a predictor to a dataset");
  add_common(filter, true, true);
  filter->add_option("--predictor", predictor_path, "predictor artifact")->required();
  filter->add_option("--subset", flags.subset, "test or all (default all for filter)");

  auto* evaluate = app.add_subcommand("evaluate", "coverage report on a dataset");
  add_common(evaluate, true, true);
  evaluate->add_option("--predictor", predictor_path, "predictor artifact")->required();
  evaluate->add_option("--subset", flags.subset, "test or all (default test)");

  auto* profile = app.add_subcommand("profile", "Dolan-More profile over (category, seed, alpha)");
  add_common(profile, true, true);
  profile->add_option("--alphas", alphas_text, "alpha grid lo:hi:step");
  profile->add_option("--seeds", n_seeds, "number of seeds");

  auto* trials = app.add_subcommand("coverage-trials", "Monte Carlo coverage verification");
  add_common(trials, false, true);

  std::string subcommand;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(flags);
    if (calibrate->parsed()) return cmd_calibrate(flags);
    if (profile->parsed()) return cmd_profile(flags, alphas_text, n_seeds);
    if (trials->parsed()) return cmd_coverage_trials(flags);

    // filter / evaluate share loading
    if (filter->parsed() || evaluate->parsed()) {
      const bool is_filter = filter->parsed();
      if (flags.data_path.empty())
        throw acp::ConfigError(std::string(is_filter ? "filter" : "evaluate") +
                               " requires --data");
      RunManifest manifest;
      manifest.command = is_filter ? "filter" : "evaluate";
      manifest.add_input(flags.data_path);
      manifest.add_input(predictor_path);
      if (!flags.config_path.empty()) add_config_input(manifest, flags.config_path);

      const acp::CalibratedPredictor pred = acp::load_predictor_file(predictor_path);
      if (!flags.task_name.empty() &&
          acp::task_from_string(flags.task_name) != pred.task)
        throw acp::DataError("task mismatch: predictor is " + acp::to_string(pred.task));
      const acp::Task data_task = detect_task(flags.data_path);
      if (data_task != pred.task)
        throw acp::DataError("task mismatch: predictor is " + acp::to_string(pred.task) +
                             " but dataset is " + acp::to_string(data_task));
      if (is_filter && filter->get_option("--subset")->count() == 0)
        flags.subset = "all";

      const acp::FullPipelineConfig full = resolve_pipeline_config(flags);
      manifest.seed = flags.seed.value_or(full.split.seed);
      manifest.config = {{"alpha", pred.alpha},
                         {"transform_mode", acp::to_string(pred.mode)},
                         {"subset", flags.subset}};
      ensure_out_dir(flags.out_dir);

      if (pred.task == acp::Task::longform) {
        const auto records = select_subset(load_longform(flags.data_path), flags, full);
        if (records.empty()) throw acp::DataError("empty test split");
        if (is_filter) {
          std::ostringstream out;
          for (const auto& rec : records) {
            const auto kept = acp::filter_test_longform(pred, rec);
            json obj = {{"id", rec.id}, {"category", rec.category}, {"retained", kept}};
            out << obj.dump() << '\n';
          }
          const std::string path = flags.out_dir + "/filtered.jsonl";
          acp::atomic_write_file(path, out.str());
          manifest.artifacts.push_back(path);
          std::printf("filtered %zu records -> %s\n", records.size(), path.c_str());
        } else {
          const auto report =
              acp::coverage_by_group(acp::evaluate_records(pred, records), pred.alpha);
          const std::string path = flags.out_dir + "/coverage_a" +
                                   format_short(pred.alpha) + "_s" +
                                   std::to_string(manifest.seed) + "_" +
                                   method_name(pred.mode) + ".csv";
          acp::atomic_write_file(path, coverage_csv(report));
          manifest.artifacts.push_back(path);
          print_coverage(report);
        }
      } else {
        const auto records = select_subset(load_mcqa(flags.data_path), flags, full);
        if (records.empty()) throw acp::DataError("empty test split");
        if (is_filter) {
          std::ostringstream out;
          for (const auto& rec : records) {
            const auto set = acp::predict_set_mcqa(pred, rec);
            json obj = {{"id", rec.id}, {"category", rec.category}, {"prediction_set", set}};
            out << obj.dump() << '\n';
          }
          const std::string path = flags.out_dir + "/predictions.jsonl";
          acp::atomic_write_file(path, out.str());
          manifest.artifacts.push_back(path);
          std::printf("predicted %zu records -> %s\n", records.size(), path.c_str());
        } else {
          const auto report =
              acp::coverage_by_group(acp::evaluate_records(pred, records), pred.alpha);
          const std::string path = flags.out_dir + "/coverage_a" +
                                   format_short(pred.alpha) + "_s" +
                                   std::to_string(manifest.seed) + "_" +
                                   method_name(pred.mode) + ".csv";
          acp::atomic_write_file(path, coverage_csv(report));
          manifest.artifacts.push_back(path);
          print_coverage(report);
        }
      }
      manifest.write(flags.out_dir);
      return 0;
    }
  } catch (const acp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const acp::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const acp::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
