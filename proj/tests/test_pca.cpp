#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "acp/pca.hpp"
#include "acp/rng.hpp"
#include "test_oracles.hpp"

using namespace acp;

namespace {

std::vector<std::vector<double>> make_gaussian_data(std::size_t n, std::size_t d,
                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> data(n, std::vector<double>(d));
  // anisotropic so eigenvalues are well separated
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      data[i][j] = rng.gaussian() * (1.0 + static_cast<double>(j));
  return data;
}

double orthonormality_defect(const Matrix& components) {
  double worst = 0.0;
  for (std::size_t a = 0; a < components.rows; ++a) {
    for (std::size_t b = 0; b < components.rows; ++b) {
      double g = 0.0;
      for (std::size_t j = 0; j < components.cols; ++j)
        g += components(a, j) * components(b, j);
      worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("pca recovers the dominant axis of axis-aligned data") {
  const std::vector<std::vector<double>> data = {
      {1.0, 0.0}, {-1.0, 0.0}, {0.0, 0.1}, {0.0, -0.1}};
  const PcaModel model = fit_pca(data, 1);
  CHECK(model.mean[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(model.mean[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(model.components(0, 0) == Catch::Approx(1.0).margin(1e-10));
  CHECK(model.components(0, 1) == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("pca components match the dense eigendecomposition oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto data = make_gaussian_data(50, 10, seed);
    const PcaModel model = fit_pca(data, 3);
    const auto expected = oracle::eigen_pca(data, 3);
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<double> row(model.components.cols);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = model.components(k, j);
      CHECK(oracle::eigenvector_distance(row, expected.eigenvectors[k]) < 1e-8);
    }
    CHECK(orthonormality_defect(model.components) < 1e-8);
  }
}

TEST_CASE("full-rank pca is an orthogonal change of basis") {
  const auto data = make_gaussian_data(30, 6, 42);
  const PcaModel model = fit_pca(data, 6);
  CHECK(orthonormality_defect(model.components) < 1e-8);
  for (const auto& x : data) {
    const auto z = transform_pca(model, x);
    // reconstruct via the transpose and compare
    for (std::size_t j = 0; j < 6; ++j) {
      double rec = model.mean[j];
      for (std::size_t k = 0; k < 6; ++k) rec += model.components(k, j) * z[k];
      CHECK(rec == Catch::Approx(x[j]).margin(1e-8));
    }
  }
}

TEST_CASE("transform centers the mean to zero") {
  const auto data = make_gaussian_data(25, 5, 9);
  const PcaModel model = fit_pca(data, 3);
  const auto z = transform_pca(model, model.mean);
  for (double v : z) CHECK(v == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("per-component variances of transformed data equal the eigenvalues") {
  const auto data = make_gaussian_data(200, 8, 17);
  const PcaModel model = fit_pca(data, 4);
  const auto expected = oracle::eigen_pca(data, 4);

  std::vector<std::vector<double>> z;
  for (const auto& x : data) z.push_back(transform_pca(model, x));
  for (std::size_t k = 0; k < 4; ++k) {
    double var = 0.0;
    for (const auto& row : z) var += row[k] * row[k];
    var /= static_cast<double>(z.size() - 1);
    CHECK(var == Catch::Approx(expected.eigenvalues[k]).margin(1e-6));
  }
}

TEST_CASE("transform rejects wrong dimensions, including double application") {
  const auto data = make_gaussian_data(20, 5, 3);
  const PcaModel model = fit_pca(data, 2);
  const auto z = transform_pca(model, data[0]);
  REQUIRE(z.size() == 2);
  CHECK_THROWS_AS(transform_pca(model, z), DataError);
}

TEST_CASE("captured variance is non-decreasing in output_dim") {
  const auto data = make_gaussian_data(60, 7, 8);
  double prev = -1.0;
  for (std::size_t k = 1; k <= 7; ++k) {
    const PcaModel model = fit_pca(data, k);
    double total = 0.0;
    for (const auto& x : data) {
      const auto z = transform_pca(model, x);
      for (double v : z) total += v * v;
    }
    CHECK(total >= prev - 1e-9);
    prev = total;
  }
}

TEST_CASE("transform is affine") {
  const auto data = make_gaussian_data(20, 6, 21);
  const PcaModel model = fit_pca(data, 3);
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> a(6), b(6), diff(6);
    for (std::size_t j = 0; j < 6; ++j) {
      a[j] = rng.gaussian();
      b[j] = rng.gaussian();
      diff[j] = a[j] - b[j];
    }
    const auto za = transform_pca(model, a);
    const auto zb = transform_pca(model, b);
    const auto direct = matvec(model.components, diff);
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(za[k] - zb[k] == Catch::Approx(direct[k]).margin(1e-10));
  }
}

TEST_CASE("rank-deficient data still yields orthonormal components") {
  // 2-dimensional data embedded in 5 dimensions
  Rng rng(13);
  std::vector<std::vector<double>> data;
  for (int i = 0; i < 30; ++i) {
    const double u = rng.gaussian();
    const double v = rng.gaussian();
    data.push_back({u, v, u + v, 2.0 * u - v, 0.5 * u});
  }
  const PcaModel model = fit_pca(data, 4);
  CHECK(orthonormality_defect(model.components) < 1e-8);
}

TEST_CASE("refitting is byte-stable and signs follow the convention") {
  const auto data = make_gaussian_data(40, 6, 77);
  const PcaModel a = fit_pca(data, 4);
  const PcaModel b = fit_pca(data, 4);
  CHECK(a == b);
  for (std::size_t k = 0; k < a.output_dim; ++k) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < a.input_dim; ++j)
      if (std::abs(a.components(k, j)) > std::abs(a.components(k, arg))) arg = j;
    CHECK(a.components(k, arg) > 0.0);
  }
}

TEST_CASE("fit_pca validates its inputs") {
  CHECK_THROWS_AS(fit_pca({{1.0, 2.0}}, 1), DataError);
  CHECK_THROWS_AS(fit_pca({{1.0, 2.0}, {1.0}}, 1), DataError);
  CHECK_THROWS_AS(fit_pca({{1.0, 2.0}, {0.0, 1.0}}, 3), ConfigError);
}
