#include "baryflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace baryflow {

void SolverConfig::validate() const {
  if (eta0 && (!(*eta0 > 0.0) || !std::isfinite(*eta0))) throw InvalidInput("solver: eta0 must be positive");
  if (niter < 1) throw InvalidInput("solver: niter must be at least 1");
  if (!(omega_alpha > 0.0 && omega_alpha < 1.0))
    throw InvalidInput("solver: omega_alpha must lie in (0, 1)");
  if (!(lambda_max > 0.0)) throw InvalidInput("solver: lambda_max must be positive");
  if (lambda0 && !(*lambda0 > 0.0 && *lambda0 <= lambda_max))
    throw InvalidInput("solver: lambda0 must lie in (0, lambda_max]");
  if (!(tol_y > 0.0) || !(tol_LF > 0.0)) throw InvalidInput("solver: tolerances must be positive");
  if (max_halvings < 0) throw InvalidInput("solver: max_halvings must be non-negative");
}

MeanShift precondition_mean_shift(const Points& x, const Covariates& cov, const Matrix& Z) {
  cov.validate();
  const Eigen::Index n = x.rows();
  if (static_cast<Eigen::Index>(cov.size()) != n)
    throw InvalidInput("precondition: covariates do not match the number of points");
  const Eigen::RowVectorXd global = x.colwise().mean();
  Points cond(n, x.cols());
  if (cov.kind == Covariates::Kind::Categorical) {
    Matrix sums = Matrix::Zero(cov.num_classes(), x.cols());
    std::vector<double> counts(static_cast<std::size_t>(cov.num_classes()), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = cov.labels[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      counts[static_cast<std::size_t>(c)] += 1.0;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = cov.labels[static_cast<std::size_t>(i)];
      cond.row(i) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    }
  } else {
    if (Z.rows() != n || Z.cols() != n) throw InvalidInput("precondition: Z has the wrong size");
    cond.noalias() = Z.transpose() * x;
  }
  MeanShift out;
  out.shift = (-cond).rowwise() + global;
  out.w = x + out.shift;
  return out;
}

double field_dot(const Points& a, const Points& b) { return (a.array() * b.array()).sum(); }

LambdaUpdate lambda_update(double lambda, const Points& grad_C, const Points& grad_F,
                           const SolverConfig& config) {
  LambdaUpdate u;
  u.lambda = lambda;
  u.alpha = config.omega_alpha * lambda;
  u.gc_gf = field_dot(grad_C, grad_F);
  u.gf_gf = field_dot(grad_F, grad_F);
  if (u.gf_gf < 1e-30) {
    u.skipped = true;
    u.lambda_min = lambda;
    return u;
  }
  u.lambda_min = u.alpha - u.gc_gf / u.gf_gf;
  if (u.lambda_min > config.lambda_max) {
    u.lambda = std::max(lambda, config.lambda_max);
    u.at_max = true;
  } else if (u.lambda_min > lambda) {
    u.lambda = u.lambda_min;
  }
  return u;
}

Points step_explicit(const Points& y, const Points& grad, double eta) { return y - eta * grad; }

namespace {

// Point-major flattening: entry i*d + j holds (i, j).
Vector flatten(const Points& p) {
  Vector v(p.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) v[i * p.cols() + j] = p(i, j);
  return v;
}

Points unflatten(const Vector& v, Eigen::Index n, Eigen::Index d) {
  Points p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = v[i * d + j];
  return p;
}

double max_abs(const Points& p) { return p.size() ? p.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

ImplicitStep step_implicit(const Points& y, const Points& grad, const HessianBlocks& hess,
                           double eta, long max_unknowns) {
  ImplicitStep out;
  const Eigen::Index n = y.rows();
  const Eigen::Index d = y.cols();
  if (grad.rows() != n || grad.cols() != d) throw InvalidInput("implicit step: gradient shape");
  if (static_cast<Eigen::Index>(hess.diag.size()) != n)
    throw InvalidInput("implicit step: Hessian has the wrong number of blocks");
  if (max_abs(grad) == 0.0) {
    out.y = y;
    out.rcond = 1.0;
    return out;
  }
  if (n * d > max_unknowns) {
    out.y = step_explicit(y, grad, eta);
    out.fell_back = true;
    return out;
  }

  Matrix A = eta * hess.assemble();
  A.diagonal().array() += 1.0;
  const Vector rhs = eta * flatten(grad);

  Vector delta;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success) {
    out.rcond = llt.rcond();
    if (out.rcond >= 1e-12) delta = llt.solve(rhs);
  } else {
    Eigen::PartialPivLU<Matrix> lu(A);
    out.rcond = lu.rcond();
    if (out.rcond >= 1e-12) delta = lu.solve(rhs);
  }
  if (delta.size() == 0 || !delta.allFinite()) {
    out.y = step_explicit(y, grad, eta);
    out.fell_back = true;
    return out;
  }
  out.y = y - unflatten(delta, n, d);
  return out;
}

bool DescentSides::ok() const {
  const double slack =
      4.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(new_value), std::abs(old_value)});
  return new_value <= old_value + slack;
}

DescentSides descent_check(const Objective& objective, const Points& y_old, const Points& y_new,
                           double lambda) {
  DescentSides s;
  s.new_value = objective.value_with_centers(y_new, y_new, lambda);
  s.old_value = objective.value_with_centers(y_old, y_new, lambda);
  return s;
}

double test_hessian_radius(const Objective& objective, const Points& y, int steps) {
  const Matrix H = objective.test_hessian(y);
  if (H.size() == 0 || H.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  Vector v(H.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  v.normalize();
  double radius = 0.0;
  for (int s = 0; s < steps; ++s) {
    Vector w = H * v;
    radius = w.norm();
    if (!(radius > 0.0)) return 0.0;
    v = w / radius;
  }
  return radius;
}

BarycenterResult solve(const Points& x, const Covariates& cov, const CostModel& cost,
                       const TestFunctionSpec& spec, const SolverConfig& config) {
  config.validate();
  cost.validate();
  cov.validate();
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 1 || d < 1) throw InvalidInput("solve: empty point cloud");
  if (!x.allFinite()) throw InvalidInput("solve: non-finite sample");
  if (static_cast<Eigen::Index>(cov.size()) != n)
    throw InvalidInput("solve: covariates do not match the number of points");
  spec.validate(static_cast<std::size_t>(d));

  const CouplingMatrices coup = build_couplings(cov);

  BarycenterResult result;
  result.x_original = x;
  result.bandwidth_a = spec.mode == Problem::Kde ? spec.bandwidth_a : 0.0;

  Points start = x;
  Points x_cost = x;
  if (config.precondition) {
    if (config.precondition_mode == PreconditionMode::MeanShift) {
      start = precondition_mean_shift(x, cov, coup.Z).w;
    } else {
      SolverConfig sub = config;
      sub.precondition = false;
      sub.update = UpdateRule::Implicit;
      start = solve(x, cov, CostModel::sq_euclidean(), TestFunctionSpec::monomials(static_cast<std::size_t>(d), 1), sub)
                  .y_final;
    }
    result.precondition_shift = start - x;
    // Only the canonical cost is invariant under the shift; any other cost
    // keeps measuring against the original samples.
    if (cost.is_canonical()) x_cost = start;
  }

  Objective objective(x_cost, coup.C, coup.Z, cost, spec);

  FlowState state;
  state.y = start;
  project_to_domain(cost, state.y);
  if (config.lambda0) {
    state.lambda = *config.lambda0;
  } else {
    const double radius = test_hessian_radius(objective, state.y);
    state.lambda = (radius > 0.0 && std::isfinite(radius)) ? 1.0 / radius : 1.0;
    state.lambda = std::min(state.lambda, config.lambda_max);
  }
  result.lambda0 = state.lambda;
  const double eta0 = config.eta0_for(n);
  state.eta = eta0;

  const bool implicit = config.update == UpdateRule::Implicit;
  try {
    for (int it = 1; it <= config.niter; ++it) {
      state.n = it;
      state.eta = std::min(2.01 * state.eta, eta0);

      ObjectiveEval ev =
          objective.evaluate(state.y, state.lambda, implicit ? EvalLevel::Hessian : EvalLevel::Gradient);
      const LambdaUpdate lu = lambda_update(state.lambda, ev.grad_C, ev.grad_F, config);
      const double dl = lu.lambda - state.lambda;
      const Points grad = ev.grad_C + lu.lambda * ev.grad_F;
      if (implicit && dl != 0.0) {
        for (std::size_t i = 0; i < ev.hess.diag.size(); ++i) ev.hess.diag[i] += dl * ev.hess_F.diag[i];
        if (ev.hess_F.has_cross()) ev.hess.cross += dl * ev.hess_F.cross;
      }

      HistoryRecord rec;
      rec.iter = it;
      rec.lambda_prev = state.lambda;
      rec.lambda = lu.lambda;
      rec.alpha = lu.alpha;
      rec.gc_gf = lu.gc_gf;
      rec.gf_gf = lu.gf_gf;
      rec.lambda_skipped = lu.skipped;
      rec.lambda_at_max = lu.at_max;

      Points candidate;
      DescentSides sides;
      bool accepted = false;
      for (int h = 0;; ++h) {
        if (implicit) {
          ImplicitStep st = step_implicit(state.y, grad, ev.hess, state.eta, config.implicit_max_unknowns);
          candidate = std::move(st.y);
          rec.explicit_fallback = rec.explicit_fallback || st.fell_back;
        } else {
          candidate = step_explicit(state.y, grad, state.eta);
        }
        project_to_domain(cost, candidate);
        if (!candidate.allFinite()) throw NumericError("solve: non-finite step", it);
        sides = descent_check(objective, state.y, candidate, lu.lambda);
        rec.eta_halvings = h;
        if (sides.ok()) {
          accepted = true;
          break;
        }
        if (h == config.max_halvings) break;
        state.eta *= 0.5;
      }

      rec.eta = state.eta;
      rec.descent_new = sides.new_value;
      rec.descent_old = sides.old_value;
      state.lambda = lu.lambda;
      if (!accepted) {
        // No admissible step even at the smallest rate: stop here, unconverged.
        rec.accepted = false;
        rec.L_C = cost_value(cost, x_cost, state.y, cost.requires_pairing() ? &coup.Z : nullptr);
        rec.L_F = objective.test_value(state.y);
        rec.L = rec.L_C + state.lambda * rec.L_F;
        state.history.push_back(rec);
        break;
      }

      rec.rel_change = max_abs(candidate - state.y) / std::max(1.0, max_abs(state.y));
      state.y = std::move(candidate);
      rec.L_C = cost_value(cost, x_cost, state.y, cost.requires_pairing() ? &coup.Z : nullptr);
      rec.L_F = objective.test_value(state.y);
      rec.L = rec.L_C + state.lambda * rec.L_F;
      if (!std::isfinite(rec.L)) throw NumericError("solve: non-finite objective", it);
      state.history.push_back(rec);

      if (rec.rel_change < config.tol_y && rec.L_F < config.tol_LF) {
        result.converged = true;
        break;
      }
    }
  } catch (const NumericError& e) {
    throw FlowDiverged(e.what(), state.n, state);
  }

  result.y_final = state.y;
  result.iterations = state.n;
  result.history = std::move(state.history);
  return result;
}

}  // namespace baryflow
