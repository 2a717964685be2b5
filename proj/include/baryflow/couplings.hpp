#pragma once

#include "baryflow/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace baryflow {

/// Conditioning variable attached to every sample: class labels or vectors.
struct Covariates {
  enum class Kind { Categorical, Continuous };

  Kind kind = Kind::Categorical;
  /// Dense class ids 0..num_classes-1 (categorical only).
  std::vector<int> labels;
  /// Original label spelling for each class id, used when writing results.
  std::vector<std::string> class_names;
  /// N x m covariate vectors (continuous only).
  Matrix values;
  /// Kernel bandwidth in covariate space; nullopt means the median heuristic.
  std::optional<double> bandwidth;

  static Covariates categorical(const std::vector<std::string>& names);
  static Covariates categorical(const std::vector<int>& ids);
  static Covariates continuous(Matrix values, std::optional<double> bandwidth = std::nullopt);

  std::size_t size() const;
  int num_classes() const { return static_cast<int>(class_names.size()); }
  void validate() const;
};

struct CouplingMatrices {
  Matrix Z;
  Matrix C;
};

struct SinkhornResult {
  Matrix Z;
  Vector scaling;
  int iterations = 0;
  double residual = 0.0;
};

/// Isotropic Gaussian density (2 pi a^2)^(-d/2) exp(-|u - v|^2 / (2 a^2)).
double gaussian_kernel(const Vector& u, const Vector& v, double bandwidth);

/// K(i, k) = gaussian_kernel(p_i, p_k, bandwidth).
Matrix kernel_matrix(const Points& points, double bandwidth);

/// Symmetric Sinkhorn scaling: finds positive d with Z = D K D bi-stochastic.
/// K must be symmetric with non-negative entries and a positive diagonal.
/// Throws ConvergenceError if the max row-sum residual stays above tol.
SinkhornResult sinkhorn_bistochastic(const Matrix& K, double tol = 1e-10, int max_iter = 10000);

/// Z(i, j) = 1/N_i when labels agree, 0 otherwise.
Matrix categorical_coupling(const std::vector<int>& labels);

/// C(i, l) = Z(i, l) - (1/N) sum_k Z(i, k).
Matrix centering_matrix(const Matrix& Z);

/// Median pairwise distance divided by sqrt(2).
double median_bandwidth(const Points& points);

/// Z from covariates (Sinkhorn-normalized Gaussian kernel for continuous
/// covariates, class indicator for categorical) and its centering matrix.
CouplingMatrices build_couplings(const Covariates& cov);

}  // namespace baryflow
