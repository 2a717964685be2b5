#include "doctest.h"

#include "baryflow/datagen.hpp"
#include "baryflow/solver.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace baryflow;

namespace {

Points column(std::initializer_list<double> v) {
  Points p(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) p(i++, 0) = x;
  return p;
}

}  // namespace

TEST_CASE("precondition: single class, two singletons, ellipse class means") {
  std::mt19937_64 rng(1);
  const Points x = oracle::random_points(rng, 6, 2);
  const Covariates one = Covariates::categorical(std::vector<int>(6, 0));
  const MeanShift s1 = precondition_mean_shift(x, one, categorical_coupling(one.labels));
  CHECK(s1.shift.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((s1.w - x).cwiseAbs().maxCoeff() <= 1e-15);

  const Covariates two = Covariates::categorical(std::vector<int>{0, 1});
  const MeanShift s2 = precondition_mean_shift(column({0.0, 2.0}), two, categorical_coupling(two.labels));
  CHECK(s2.w(0, 0) == 1.0);
  CHECK(s2.w(1, 0) == 1.0);

  const Dataset ds = gen_ellipses(3);
  const MeanShift s3 = precondition_mean_shift(ds.x, ds.z, categorical_coupling(ds.z.labels));
  const Eigen::RowVectorXd global = ds.x.colwise().mean();
  for (int c = 0; c < 3; ++c) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(2);
    int cnt = 0;
    for (Eigen::Index i = 0; i < ds.x.rows(); ++i)
      if (ds.z.labels[static_cast<std::size_t>(i)] == c) {
        m += s3.w.row(i);
        ++cnt;
      }
    CHECK((m / cnt - global).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("precondition with continuous covariates uses kernel-weighted means") {
  std::mt19937_64 rng(2);
  const Points x = oracle::random_points(rng, 20, 2);
  const Covariates z = Covariates::continuous(oracle::random_points(rng, 20, 1));
  const CouplingMatrices cm = build_couplings(z);
  const MeanShift s = precondition_mean_shift(x, z, cm.Z);
  const Eigen::RowVectorXd global = x.colwise().mean();
  for (Eigen::Index k = 0; k < 20; ++k) {
    Eigen::RowVectorXd cond = Eigen::RowVectorXd::Zero(2);
    for (Eigen::Index i = 0; i < 20; ++i) cond += cm.Z(i, k) * x.row(i);
    CHECK((s.w.row(k) - (x.row(k) + global - cond)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("lambda update branches") {
  SolverConfig cfg;
  cfg.omega_alpha = 0.5;
  cfg.lambda_max = 5.0;
  std::mt19937_64 rng(3);
  const Points gF = oracle::random_points(rng, 7, 2);

  // Stationary point of L(., lambda): grad_C = -lambda grad_F -> lambda_min = alpha + lambda.
  const LambdaUpdate st = lambda_update(2.0, -2.0 * gF, gF, cfg);
  CHECK(st.lambda_min == doctest::Approx(1.0 + 2.0).epsilon(1e-14));
  CHECK(st.lambda == doctest::Approx(3.0).epsilon(1e-14));

  // grad_C = 0: lambda_min = alpha = lambda / 2 < lambda, unchanged.
  const LambdaUpdate low = lambda_update(2.0, Points::Zero(7, 2), gF, cfg);
  CHECK(low.lambda == 2.0);
  CHECK(low.lambda_min == doctest::Approx(1.0));

  // grad_C = -10 grad_F, lambda = 1: lambda_min = 10.5 > lambda_max -> lambda_max.
  const LambdaUpdate high = lambda_update(1.0, -10.0 * gF, gF, cfg);
  CHECK(high.lambda_min == doctest::Approx(10.5).epsilon(1e-14));
  CHECK(high.lambda == 5.0);
  CHECK(high.at_max);

  // Vanishing test gradient: skipped.
  const LambdaUpdate skip = lambda_update(1.0, gF, Points::Zero(7, 2), cfg);
  CHECK(skip.skipped);
  CHECK(skip.lambda == 1.0);
}

TEST_CASE("explicit step: trivial cases and a scalar oracle trajectory") {
  std::mt19937_64 rng(4);
  const Points y = oracle::random_points(rng, 5, 2);
  CHECK(step_explicit(y, Points::Zero(5, 2), 0.3) == y);
  CHECK(step_explicit(y, y, 0.0) == y);

  // Two 1D points, squared cost, linear features, fixed lambda: the gradient is
  // g1 = (y1 - x1)/2 + lambda (y1 - y2), g2 = (y2 - x2)/2 - lambda (y1 - y2).
  const Points x = column({0.0, 2.0});
  const Covariates z = Covariates::categorical(std::vector<int>{0, 1});
  const CouplingMatrices cm = build_couplings(z);
  const Objective obj(x, cm.C, cm.Z, CostModel::sq_euclidean(), TestFunctionSpec::monomials(1, 1));
  const double lambda = 0.8, eta = 0.3;
  Points yl = x;
  double a = 0.0, b = 2.0;
  for (int k = 0; k < 10; ++k) {
    yl = step_explicit(yl, obj.evaluate(yl, lambda).grad, eta);
    const double g1 = (a - 0.0) / 2 + lambda * (a - b);
    const double g2 = (b - 2.0) / 2 - lambda * (a - b);
    a = a - eta * g1;
    b = b - eta * g2;
    CHECK(yl(0, 0) == doctest::Approx(a).epsilon(1e-14));
    CHECK(yl(1, 0) == doctest::Approx(b).epsilon(1e-14));
  }
}

TEST_CASE("implicit step: zero gradient, small-eta limit and the identity resolvent") {
  std::mt19937_64 rng(5);
  const Dataset ds = gen_ellipses(5, {.n_per_class = 6});
  const CouplingMatrices cm = build_couplings(ds.z);
  const Objective obj(ds.x, cm.C, cm.Z, CostModel::sq_euclidean(), TestFunctionSpec::monomials(2, 2));
  const Points y = ds.x + oracle::random_points(rng, ds.x.rows(), 2, -0.2, 0.2);
  const ObjectiveEval e = obj.evaluate(y, 0.5, EvalLevel::Hessian);

  CHECK(step_implicit(y, Points::Zero(y.rows(), 2), e.hess, 10.0).y == y);

  const double eta = 1e-8;
  const ImplicitStep st = step_implicit(y, e.grad, e.hess, eta);
  CHECK(oracle::rel_err((y - st.y) / eta, e.grad) <= 1e-4);

  // lambda = 0, squared cost: Hessian I/N, so delta = eta / (1 + eta/N) grad.
  const Objective cost_only(ds.x, cm.C, cm.Z, CostModel::sq_euclidean(), TestFunctionSpec::kde(1.0));
  const ObjectiveEval e0 = cost_only.evaluate(y, 0.0, EvalLevel::Hessian);
  const double n = static_cast<double>(y.rows());
  for (double et : {0.5, 3.0, 40.0}) {
    const ImplicitStep s0 = step_implicit(y, e0.grad, e0.hess, et);
    CHECK(oracle::rel_err(s0.y, y - (et / (1.0 + et / n)) * e0.grad) <= 1e-14);
    CHECK_FALSE(s0.fell_back);
  }

  // Above the size limit the step is explicit.
  const ImplicitStep big = step_implicit(y, e.grad, e.hess, 0.1, 4);
  CHECK(big.fell_back);
  CHECK(big.y == step_explicit(y, e.grad, 0.1));
}

TEST_CASE("descent check: identity, tiny and huge steps on ellipse data") {
  const Dataset ds = gen_ellipses(7);
  const CouplingMatrices cm = build_couplings(ds.z);
  const Objective obj(ds.x, cm.C, cm.Z, CostModel::sq_euclidean(), TestFunctionSpec::kde(median_bandwidth(ds.x)));
  const double lambda = 50.0;
  CHECK(descent_check(obj, ds.x, ds.x, lambda).ok());
  const ObjectiveEval e = obj.evaluate(ds.x, lambda);
  CHECK(descent_check(obj, ds.x, step_explicit(ds.x, e.grad, 1e-6), lambda).ok());
  CHECK_FALSE(descent_check(obj, ds.x, step_explicit(ds.x, e.grad, 1e3), lambda).ok());

  // In the solver the huge rate triggers halvings.
  SolverConfig cfg;
  cfg.update = UpdateRule::Explicit;
  cfg.eta0 = 1e3;
  cfg.niter = 1;
  cfg.lambda0 = lambda;
  const BarycenterResult r = solve(ds.x, ds.z, CostModel::sq_euclidean(), TestFunctionSpec::kde(median_bandwidth(ds.x)), cfg);
  REQUIRE(r.history.size() == 1);
  CHECK(r.history[0].eta_halvings >= 1);
}

TEST_CASE("solve: a single class stays at the identity") {
  std::mt19937_64 rng(8);
  const Points x = oracle::random_points(rng, 20, 2);
  const Covariates z = Covariates::categorical(std::vector<int>(20, 0));
  const BarycenterResult r = solve(x, z, CostModel::sq_euclidean(), TestFunctionSpec::kde(0.5), SolverConfig{});
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK((r.y_final - x).cwiseAbs().maxCoeff() <= 1e-8);  // roundoff in the one-class test gradient
}

TEST_CASE("solve: two singletons meet at the midpoint") {
  const Points x = column({0.0, 2.0});
  const Covariates z = Covariates::categorical(std::vector<int>{0, 1});
  for (UpdateRule rule : {UpdateRule::Implicit, UpdateRule::Explicit}) {
    SolverConfig cfg;
    cfg.update = rule;
    const BarycenterResult r = solve(x, z, CostModel::sq_euclidean(), TestFunctionSpec::monomials(1, 1), cfg);
    CHECK(r.converged);
    CHECK(std::abs(r.y_final(0, 0) - 1.0) <= 1e-3);
    CHECK(std::abs(r.y_final(1, 0) - 1.0) <= 1e-3);
  }
}

TEST_CASE("solve: history invariants on a small ellipse run") {
  const Dataset ds = gen_ellipses(11, {.n_per_class = 20});
  SolverConfig cfg;
  cfg.niter = 300;
  const BarycenterResult r = solve(ds.x, ds.z, CostModel::p_norm(1.5), TestFunctionSpec::monomials(2, 2), cfg);
  CHECK(r.converged);
  double prev = r.lambda0;
  for (const HistoryRecord& h : r.history) {
    CHECK(h.lambda >= prev);
    prev = h.lambda;
    CHECK(h.L_F >= -1e-10);
    CHECK(h.descent_new <= h.descent_old + 1e-12);
    if (!h.lambda_skipped && !h.lambda_at_max)
      CHECK(h.gc_gf + h.lambda * h.gf_gf >= h.alpha * h.gf_gf - 1e-10 * std::max(1.0, std::abs(h.gc_gf)));
  }
  CHECK(r.history.back().L_F < cfg.tol_LF);
  CHECK(r.y_final.allFinite());
}

TEST_CASE("solve is deterministic") {
  const Dataset ds = gen_ellipses(12, {.n_per_class = 15});
  SolverConfig cfg;
  cfg.niter = 50;
  const auto a = solve(ds.x, ds.z, CostModel::sq_euclidean(), TestFunctionSpec::kde(1.0), cfg);
  const auto b = solve(ds.x, ds.z, CostModel::sq_euclidean(), TestFunctionSpec::kde(1.0), cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].L == b.history[k].L);
    CHECK(a.history[k].lambda == b.history[k].lambda);
  }
  CHECK(a.y_final == b.y_final);
}

TEST_CASE("solve keeps the original samples for non-canonical costs when preconditioning") {
  const Dataset ds = gen_ellipses(13, {.n_per_class = 10});
  SolverConfig cfg;
  cfg.precondition = true;
  cfg.niter = 5;
  const auto r = solve(ds.x, ds.z, CostModel::p_norm(3.0), TestFunctionSpec::monomials(2, 1), cfg);
  REQUIRE(r.precondition_shift.has_value());
  CHECK(r.x_original == ds.x);
  // The first recorded cost is measured against x, not against the shifted w.
  const CouplingMatrices cm = build_couplings(ds.z);
  (void)cm;
  CHECK(r.history.front().L_C > 0.0);

  cfg.precondition_mode = PreconditionMode::LinearSolve;
  cfg.niter = 200;
  const auto lin = solve(ds.x, ds.z, CostModel::sq_euclidean(), TestFunctionSpec::monomials(2, 2), cfg);
  CHECK(lin.precondition_shift.has_value());
  CHECK(lin.converged);
}

TEST_CASE("solver configuration is validated") {
  const Dataset ds = gen_ellipses(14, {.n_per_class = 5});
  auto run = [&](SolverConfig cfg) {
    return solve(ds.x, ds.z, CostModel::sq_euclidean(), TestFunctionSpec::kde(1.0), cfg);
  };
  SolverConfig c1;
  c1.omega_alpha = 1.0;
  CHECK_THROWS_AS(run(c1), InvalidInput);
  SolverConfig c2;
  c2.eta0 = -1.0;
  CHECK_THROWS_AS(run(c2), InvalidInput);
  SolverConfig c3;
  c3.lambda0 = 10.0;
  c3.lambda_max = 1.0;
  CHECK_THROWS_AS(run(c3), InvalidInput);
  SolverConfig c4;
  c4.tol_y = 0.0;
  CHECK_THROWS_AS(run(c4), InvalidInput);
}
