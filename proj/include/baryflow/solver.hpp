#pragma once

#include "baryflow/couplings.hpp"
#include "baryflow/costs.hpp"
#include "baryflow/objective.hpp"
#include "baryflow/types.hpp"

#include <optional>
#include <vector>

namespace baryflow {

enum class UpdateRule { Explicit, Implicit };

enum class PreconditionMode {
  MeanShift,     // class means, or kernel-weighted conditional means
  LinearSolve,   // a full solve with linear features and the squared cost
};

struct SolverConfig {
  UpdateRule update = UpdateRule::Implicit;
  /// Upper bound of the learning rate. Empty: 10 N, which puts the implicit
  /// step of the 1/N-normalized cost close to a Newton step.
  std::optional<double> eta0;
  int niter = 2000;
  std::optional<double> lambda0;  // empty: estimated from the test Hessian
  double lambda_max = 1e6;
  double omega_alpha = 0.5;
  double tol_y = 1e-6;
  double tol_LF = 1e-6;
  bool precondition = false;
  PreconditionMode precondition_mode = PreconditionMode::MeanShift;
  int max_halvings = 60;
  /// Implicit steps fall back to explicit ones above this many unknowns.
  long implicit_max_unknowns = 6000;

  void validate() const;
  double eta0_for(Eigen::Index n) const { return eta0 ? *eta0 : 10.0 * static_cast<double>(n); }
};

/// One accepted (or abandoned) iteration.
struct HistoryRecord {
  int iter = 0;
  double L = 0.0;    // at the accepted point, with the updated lambda
  double L_C = 0.0;
  double L_F = 0.0;
  double lambda = 0.0;
  double eta = 0.0;  // learning rate of the accepted step
  int eta_halvings = 0;

  // Multiplier update diagnostics, all at the pre-step point.
  double lambda_prev = 0.0;
  double alpha = 0.0;
  double gc_gf = 0.0;  // <grad L_C, grad L_F>
  double gf_gf = 0.0;  // <grad L_F, grad L_F>
  bool lambda_skipped = false;
  bool lambda_at_max = false;

  // Both sides of the descent check for the accepted step.
  double descent_new = 0.0;
  double descent_old = 0.0;
  bool explicit_fallback = false;
  bool accepted = true;
  double rel_change = 0.0;
};

struct FlowState {
  Points y;
  double lambda = 0.0;
  double eta = 0.0;
  int n = 0;
  std::vector<HistoryRecord> history;
};

struct BarycenterResult {
  Points y_final;
  bool converged = false;
  int iterations = 0;
  std::vector<HistoryRecord> history;
  std::optional<Points> precondition_shift;
  Points x_original;
  double lambda0 = 0.0;
  double bandwidth_a = 0.0;  // KDE bandwidth actually used (0 in feature mode)
};

/// Raised when the flow produces non-finite values; keeps the last finite state.
class FlowDiverged : public NumericError {
 public:
  FlowDiverged(const std::string& what, int iteration, FlowState last)
      : NumericError(what, iteration), last_(std::move(last)) {}
  const FlowState& last_state() const noexcept { return last_; }

 private:
  FlowState last_;
};

struct MeanShift {
  Points w;
  Points shift;  // w - x
};

MeanShift precondition_mean_shift(const Points& x, const Covariates& cov, const Matrix& Z);

struct LambdaUpdate {
  double lambda = 0.0;
  double alpha = 0.0;
  double lambda_min = 0.0;
  double gc_gf = 0.0;
  double gf_gf = 0.0;
  bool skipped = false;
  bool at_max = false;
};

/// Lower-bound rule for the multiplier: lambda never decreases, and after the
/// update <grad L_C + lambda grad L_F, grad L_F> >= alpha <grad L_F, grad L_F>
/// unless lambda_max is reached.
LambdaUpdate lambda_update(double lambda, const Points& grad_C, const Points& grad_F,
                           const SolverConfig& config);

/// Sum over samples of pointwise inner products.
double field_dot(const Points& a, const Points& b);

Points step_explicit(const Points& y, const Points& grad, double eta);

struct ImplicitStep {
  Points y;
  bool fell_back = false;
  double rcond = 0.0;
};

/// Solves (I + eta H) delta = eta grad and returns y - delta.
ImplicitStep step_implicit(const Points& y, const Points& grad, const HessianBlocks& hess,
                           double eta, long max_unknowns = 6000);

struct DescentSides {
  double new_value = 0.0;  // L(y_new), centers at y_new
  double old_value = 0.0;  // L(y_old), centers at y_new
  bool ok() const;
};

DescentSides descent_check(const Objective& objective, const Points& y_old, const Points& y_new,
                           double lambda);

/// Largest |eigenvalue| of the assembled test Hessian by power iteration.
double test_hessian_radius(const Objective& objective, const Points& y, int steps = 50);

/// Full penalty flow. The KDE bandwidth in `spec` is used as given.
BarycenterResult solve(const Points& x, const Covariates& cov, const CostModel& cost,
                       const TestFunctionSpec& spec, const SolverConfig& config);

}  // namespace baryflow
