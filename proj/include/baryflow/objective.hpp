#pragma once

#include "baryflow/costs.hpp"
#include "baryflow/features.hpp"
#include "baryflow/types.hpp"

#include <memory>
#include <vector>

namespace baryflow {

enum class Problem { Kde, Features };

/// Test-function family enforcing the pushforward condition.
///
/// Kde: conditional kernel density estimate with Gaussian bandwidth a; the
/// test component is L_F = sum_{i,k} K_a(y_i, y_k) C_ik.
/// Features: L_F = sum_l w_l f_l^T C f_l with f_l the feature values at the
/// samples; the weights default to 1.
struct TestFunctionSpec {
  Problem mode = Problem::Kde;
  double bandwidth_a = 1.0;
  std::shared_ptr<const FeatureBasis> features;
  Vector weights;

  static TestFunctionSpec kde(double bandwidth);
  static TestFunctionSpec monomials(std::size_t dim, int degree);
  static TestFunctionSpec with_features(std::shared_ptr<const FeatureBasis> basis,
                                        Vector weights = {});

  double feature_weight(std::size_t l) const;
  void validate(std::size_t dim) const;
};

/// Lagrangian L = L_C + lambda * L_F and its derivatives at one state.
/// Gradients are split so the penalty update can use both pieces.
struct ObjectiveEval {
  double L = 0.0;
  double L_C = 0.0;
  double L_F = 0.0;
  double lambda = 0.0;
  Points grad;
  Points grad_C;
  Points grad_F;
  /// Hessian of L (cost plus lambda times the test term). `diag` holds the
  /// point-wise second derivatives with kernel centers held fixed; `cross`
  /// holds the center-slot terms and any coupling between points.
  HessianBlocks hess;
  /// Hessian of L_F alone (same block layout), so callers can rescale lambda.
  HessianBlocks hess_F;
};

enum class EvalLevel { Value, Gradient, Hessian };

/// sum_{i,l} K_a(y_l, y_i) C_il.
double lf_kde(const Points& y, const Matrix& C, double bandwidth);

/// sum_{i,k} K_a(y_i, w_k) C_ik, kernel centers w held separately from the
/// evaluation points y.
double lf_kde_frozen(const Points& y, const Points& centers, const Matrix& C, double bandwidth);

/// Per-feature terms f_l^T C f_l (unweighted).
Vector lf_feature_terms(const Points& y, const Matrix& C, const FeatureBasis& basis);

/// sum_l w_l f_l^T C f_l.
double lf_features(const Points& y, const Matrix& C, const TestFunctionSpec& spec);

/// Everything needed to evaluate the Lagrangian of one barycenter problem.
/// References are held, not copied; the referents must outlive the object.
class Objective {
 public:
  /// `x_cost` is the reference cloud for the transport cost; `pairing` is Z
  /// and is only consulted by costs that require it.
  Objective(const Points& x_cost, const Matrix& C, const Matrix& Z, const CostModel& cost,
            const TestFunctionSpec& spec);

  ObjectiveEval evaluate(const Points& y, double lambda, EvalLevel level = EvalLevel::Gradient) const;

  /// L_F only.
  double test_value(const Points& y) const;

  /// L with the kernel centers of the test function placed at `centers`
  /// (equal to the plain value in feature mode).
  double value_with_centers(const Points& y, const Points& centers, double lambda) const;

  /// Gradient with kernel centers fixed at `centers` (KDE) — the descent
  /// direction used by the flow. Equals evaluate().grad when centers == y.
  Points gradient_with_centers(const Points& y, const Points& centers, double lambda) const;

  /// Full Hessian of L_F alone (lambda = 1, no cost), assembled.
  Matrix test_hessian(const Points& y) const;

  const CostModel& cost() const { return cost_; }
  const TestFunctionSpec& spec() const { return spec_; }
  const Matrix& centering() const { return C_; }
  const Points& x_cost() const { return x_; }

 private:
  const Matrix* pairing() const { return cost_.requires_pairing() ? &Z_ : nullptr; }

  void kde_terms(const Points& y, const Points& centers, bool gradient, bool hessian,
                 double& value, Points* grad, HessianBlocks* hess) const;
  void feature_terms(const Points& y, bool gradient, bool hessian, double& value, Points* grad,
                     HessianBlocks* hess) const;

  const Points& x_;
  const Matrix& C_;
  const Matrix& Z_;
  CostModel cost_;
  TestFunctionSpec spec_;
  Matrix Ct_;  // C transposed: column i holds row i of C contiguously
  Matrix S_;   // C + C^T
};

}  // namespace baryflow
