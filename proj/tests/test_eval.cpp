#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "acp/eval.hpp"
#include "acp/rng.hpp"
#include "test_oracles.hpp"

using namespace acp;

TEST_CASE("coverage_by_group aggregates per category and marginally") {
  std::vector<EvalRow> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({"a", i < 8, 0.5});
  for (int i = 0; i < 5; ++i) rows.push_back({"b", true, 0.2});
  const auto report = coverage_by_group(rows, 0.2);
  CHECK(report.per_category.at("a").coverage == Catch::Approx(0.8));
  CHECK(report.per_category.at("a").removed_fraction == Catch::Approx(0.5));
  CHECK(report.per_category.at("b").coverage == 1.0);
  CHECK(report.per_category.at("b").n == 5);

  // marginal equals the n-weighted mean of per-category coverages
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& [cat, stats] : report.per_category) {
    weighted += stats.coverage * static_cast<double>(stats.n);
    total += stats.n;
  }
  CHECK(std::abs(report.marginal_coverage - weighted / static_cast<double>(total)) < 1e-12);
  CHECK_THROWS_AS(coverage_by_group({}, 0.2), DataError);
}

TEST_CASE("removed fraction arithmetic") {
  CHECK(removed_fraction(4, 2) == 0.5);
  CHECK(removed_fraction(4, 4) == 0.0);
  CHECK(removed_fraction(4, 0) == 1.0);
  CHECK_THROWS_AS(removed_fraction(2, 3), DataError);

  LongFormRecord rec;
  rec.claims = {{"a", 0.1, 1}, {"b", 0.2, 1}, {"c", 0.3, 1}, {"d", 0.4, 1}};
  CHECK(removed_fraction(rec, {0, 2}) == 0.5);
}

TEST_CASE("pr_auc is 1 for a perfect ranking and errors without positives") {
  CHECK(pr_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK_THROWS_AS(pr_auc({0.5, 0.4}, {0, 0}), DataError);
  CHECK_THROWS_AS(pr_auc({}, {}), DataError);
}

TEST_CASE("pr_auc equals the exhaustive threshold oracle") {
  Rng rng(2718);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rng.uniform_index(19);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool any_pos = false;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid forces frequent score ties
      scores[i] = static_cast<double>(rng.uniform_index(6)) / 5.0;
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
      any_pos |= labels[i] == 1;
    }
    if (!any_pos) labels[rng.uniform_index(n)] = 1;
    const double expected = oracle::exhaustive_pr_auc(scores, labels);
    CHECK(std::abs(pr_auc(scores, labels) - expected) < 1e-12);
  }
}

TEST_CASE("pr_auc is invariant under strictly increasing score transforms") {
  Rng rng(314);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 5 + rng.uniform_index(15);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform();
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    labels[0] = 1;
    std::vector<double> warped(n);
    for (std::size_t i = 0; i < n; ++i)
      warped[i] = std::exp(3.0 * scores[i]) + scores[i];
    CHECK(pr_auc(scores, labels) == Catch::Approx(pr_auc(warped, labels)).margin(1e-12));
  }
}

TEST_CASE("calibration error is the absolute deviation from target") {
  CHECK(calibration_error(0.83, 0.2) == Catch::Approx(0.03));
  CHECK(calibration_error(0.8, 0.2) == Catch::Approx(0.0).margin(1e-15));
  CHECK(calibration_error(0.5, 0.2) == Catch::Approx(0.3));
  CHECK_THROWS_AS(calibration_error(1.2, 0.2), DataError);
}

TEST_CASE("dolan_more matches the hand-enumerated two-method case") {
  Matrix errors(2, 2);
  errors(0, 0) = 1.0;
  errors(0, 1) = 2.0;
  errors(1, 0) = 2.0;
  errors(1, 1) = 2.0;
  const auto profile = dolan_more(errors, log_delta_grid(50));
  CHECK(profile.ratios(0, 0) == 1.0);
  CHECK(profile.ratios(0, 1) == Catch::Approx(2.0));
  CHECK(profile.ratios(1, 0) == 1.0);
  CHECK(profile.ratios(1, 1) == 1.0);
  CHECK(profile.rho(0, 0) == 1.0);  // rho_A(1)
  CHECK(profile.rho(1, 0) == 0.5);  // rho_B(1)
}

TEST_CASE("dolan_more single method is best everywhere") {
  Matrix errors(3, 1);
  errors(0, 0) = 0.4;
  errors(1, 0) = 0.1;
  errors(2, 0) = 0.9;
  const auto profile = dolan_more(errors, log_delta_grid(10));
  for (std::size_t g = 0; g < profile.delta_grid.size(); ++g)
    CHECK(profile.rho(0, g) == 1.0);
}

TEST_CASE("dolan_more zero-error epsilon floor and cap") {
  Matrix errors(1, 2);
  errors(0, 0) = 0.0;
  errors(0, 1) = 0.1;
  const auto profile = dolan_more(errors, log_delta_grid(10));
  CHECK(profile.ratios(0, 0) == 1.0);         // (0+eps)/(0+eps)
  CHECK(profile.ratios(0, 1) == kRatioCap);   // ~1e11 capped at 1e6
}

TEST_CASE("dolan_more invariants on random error matrices") {
  Rng rng(1618);
  const auto grid = log_delta_grid(40);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t problems = 1 + rng.uniform_index(8);
    const std::size_t methods = 1 + rng.uniform_index(4);
    Matrix errors(problems, methods);
    for (double& e : errors.data)
      e = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 2.0);
    const auto profile = dolan_more(errors, grid);

    for (std::size_t p = 0; p < problems; ++p) {
      double best_ratio = kInfinity;
      for (std::size_t s = 0; s < methods; ++s) {
        CHECK(profile.ratios(p, s) >= 1.0);
        best_ratio = std::min(best_ratio, profile.ratios(p, s));
      }
      CHECK(best_ratio == 1.0);
    }
    for (std::size_t s = 0; s < methods; ++s) {
      for (std::size_t g = 1; g < grid.size(); ++g)
        CHECK(profile.rho(s, g) >= profile.rho(s, g - 1));
      CHECK(profile.rho(s, grid.size() - 1) == 1.0);  // cap reaches everyone
    }
  }
}

TEST_CASE("log delta grid spans [1, cap]") {
  const auto grid = log_delta_grid();
  REQUIRE(grid.size() == 200);
  CHECK(grid.front() == 1.0);
  CHECK(grid.back() == kRatioCap);
  for (std::size_t g = 1; g < grid.size(); ++g) CHECK(grid[g] > grid[g - 1]);
}
