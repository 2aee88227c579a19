#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "acp/common.hpp"
#include "acp/linalg.hpp"

namespace acp {

// Principal-component reduction of prompt embeddings (e.g. 768 -> 32).
// Rows of `components` are orthonormal principal directions, ordered by
// descending eigenvalue of the sample covariance.
struct PcaModel {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> mean;
  Matrix components;  // output_dim x input_dim

  bool operator==(const PcaModel&) const = default;
};

// Fits mean and top principal directions from centered data. Covariance
// uses 1/(n-1); the d x d eigenproblem is solved directly, which is cheap
// at embedding scale. Rank deficiency is fine: trailing directions for
// zero eigenvalues are still orthonormal.
inline PcaModel fit_pca(const std::vector<std::vector<double>>& embeddings,
                        std::size_t output_dim) {
  if (embeddings.size() < 2)
    throw DataError("fit_pca needs at least 2 embeddings");
  const std::size_t d = embeddings.front().size();
  for (const auto& e : embeddings)
    if (e.size() != d)
      throw DataError("fit_pca: embeddings have inconsistent dimensions");
  if (output_dim < 1 || output_dim > d)
    throw ConfigError("fit_pca: output_dim must lie in [1, input_dim=" +
                      std::to_string(d) + "]");

  const double n = static_cast<double>(embeddings.size());
  std::vector<double> mean(d, 0.0);
  for (const auto& e : embeddings)
    for (std::size_t j = 0; j < d; ++j) mean[j] += e[j];
  for (double& m : mean) m /= n;

  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (const auto& e : embeddings) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = e[j] - mean[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += ci * centered[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= (n - 1.0);
      cov(j, i) = cov(i, j);
    }

  const SymmetricEigen eig = jacobi_eigen_symmetric(cov);

  PcaModel model;
  model.input_dim = d;
  model.output_dim = output_dim;
  model.mean = std::move(mean);
  model.components = Matrix(output_dim, d);
  for (std::size_t k = 0; k < output_dim; ++k) {
    // Sign convention: the largest-magnitude entry is positive, so
    // persisted models are byte-stable across refits.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(eig.vectors(i, k)) > std::abs(eig.vectors(arg, k))) arg = i;
    const double sign = eig.vectors(arg, k) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i)
      model.components(k, i) = sign * eig.vectors(i, k);
  }
  return model;
}

// components * (x - mean)
inline std::vector<double> transform_pca(const PcaModel& model,
                                         const std::vector<double>& x) {
  if (x.size() != model.input_dim)
    throw DataError("transform_pca: expected dimension " +
                    std::to_string(model.input_dim) + ", got " +
                    std::to_string(x.size()));
  std::vector<double> centered(model.input_dim);
  for (std::size_t j = 0; j < model.input_dim; ++j) centered[j] = x[j] - model.mean[j];
  return matvec(model.components, centered);
}

}  // namespace acp
