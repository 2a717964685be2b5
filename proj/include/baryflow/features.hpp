#pragma once

#include "baryflow/types.hpp"

#include <memory>
#include <vector>

namespace baryflow {

/// A finite family of twice-differentiable test features f_l: R^d -> R.
class FeatureBasis {
 public:
  virtual ~FeatureBasis() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t dim() const = 0;

  /// values[l] = f_l(y); jac(l, j) = df_l/dy_j; hessians[l](j, k) when requested.
  virtual void evaluate(const Vector& y, Vector& values, Matrix& jac,
                        std::vector<Matrix>* hessians) const = 0;
};

/// All monomials y^alpha with 1 <= |alpha| <= degree, ordered by degree and
/// then lexicographically (degree 2 in 2D: y1, y2, y1^2, y1 y2, y2^2).
class MonomialBasis final : public FeatureBasis {
 public:
  MonomialBasis(std::size_t dim, int degree);

  std::size_t size() const override { return exponents_.size(); }
  std::size_t dim() const override { return dim_; }
  int degree() const { return degree_; }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  void evaluate(const Vector& y, Vector& values, Matrix& jac,
                std::vector<Matrix>* hessians) const override;

 private:
  std::size_t dim_;
  int degree_;
  std::vector<std::vector<int>> exponents_;
};

/// Feature values at every sample: F(i, l) = f_l(y_i).
Matrix feature_values(const FeatureBasis& basis, const Points& y);

}  // namespace baryflow
