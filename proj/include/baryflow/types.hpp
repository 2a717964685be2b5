#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace baryflow {

/// N x d point cloud, one sample per row. Column-major, so each coordinate is
/// a contiguous run over the samples (the layout the SIMD kernels expect).
using Points = Eigen::MatrixXd;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, non-finite or out-of-range input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// An iterative routine ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// A non-finite value appeared in the middle of a computation.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int iteration)
      : Error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Second derivatives of a scalar function of an N x d point cloud.
///
/// `diag[i]` is the d x d block d^2/dy_i^2 of the part that couples a point
/// only with itself. `cross`, when present, is a dense (N d) x (N d) matrix
/// (point-major index i*d + j) holding every remaining contribution,
/// including any i == k blocks that come from the kernel-center slot. The
/// full Hessian is blockdiag(diag) + cross.
struct HessianBlocks {
  std::vector<Matrix> diag;
  Matrix cross;

  bool has_cross() const { return cross.size() > 0; }
  std::size_t points() const { return diag.size(); }
  Matrix assemble() const;
};

inline Matrix HessianBlocks::assemble() const {
  const auto n = static_cast<Eigen::Index>(diag.size());
  const Eigen::Index d = n > 0 ? diag.front().rows() : 0;
  Matrix full = has_cross() ? cross : Matrix::Zero(n * d, n * d);
  for (Eigen::Index i = 0; i < n; ++i) full.block(i * d, i * d, d, d) += diag[static_cast<std::size_t>(i)];
  return full;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace baryflow
