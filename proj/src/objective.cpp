#include "baryflow/objective.hpp"

#include "baryflow/simd/kernels.hpp"

#include <cmath>
#include <numbers>

namespace baryflow {

TestFunctionSpec TestFunctionSpec::kde(double bandwidth) {
  TestFunctionSpec s;
  s.mode = Problem::Kde;
  s.bandwidth_a = bandwidth;
  return s;
}

TestFunctionSpec TestFunctionSpec::monomials(std::size_t dim, int degree) {
  return with_features(std::make_shared<MonomialBasis>(dim, degree));
}

TestFunctionSpec TestFunctionSpec::with_features(std::shared_ptr<const FeatureBasis> basis,
                                                 Vector weights) {
  TestFunctionSpec s;
  s.mode = Problem::Features;
  s.features = std::move(basis);
  s.weights = std::move(weights);
  return s;
}

double TestFunctionSpec::feature_weight(std::size_t l) const {
  return weights.size() == 0 ? 1.0 : weights[static_cast<Eigen::Index>(l)];
}

void TestFunctionSpec::validate(std::size_t dim) const {
  if (mode == Problem::Kde) {
    if (!(bandwidth_a > 0.0) || !std::isfinite(bandwidth_a))
      throw InvalidInput("test function: KDE bandwidth must be positive");
    return;
  }
  if (!features) throw InvalidInput("test function: feature mode without a basis");
  if (features->dim() != dim) throw InvalidInput("test function: feature basis dimension mismatch");
  if (weights.size() != 0 && static_cast<std::size_t>(weights.size()) != features->size())
    throw InvalidInput("test function: one weight per feature expected");
  if (weights.size() != 0 && (weights.array() < 0.0).any())
    throw InvalidInput("test function: feature weights must be non-negative");
}

namespace {

double kde_norm(double a, Eigen::Index d) {
  return std::pow(2.0 * std::numbers::pi * a * a, -0.5 * static_cast<double>(d));
}

simd::SoaView view(const Points& p) {
  return {p.data(), static_cast<std::size_t>(p.rows()), static_cast<std::size_t>(p.cols())};
}

void check_kde_inputs(const Points& y, const Points& centers, const Matrix& C, double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidInput("lf_kde: bandwidth must be positive");
  if (C.rows() != y.rows() || C.cols() != centers.rows())
    throw InvalidInput("lf_kde: C does not match the number of points");
  if (y.cols() != centers.cols()) throw InvalidInput("lf_kde: dimension mismatch");
}

// Scalar fallback for dimensions above the vector kernels' limit.
void moments_any_dim(const Points& centers, const double* y_i, const double* weights, double s,
                     bool second_order, double& s0, Vector& s1, Matrix& s2) {
  const Eigen::Index d = centers.cols();
  s0 = 0.0;
  s1.setZero(d);
  s2.setZero(d, d);
  Vector diff(d);
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    if (weights[k] == 0.0) continue;
    for (Eigen::Index j = 0; j < d; ++j) diff[j] = centers(k, j) - y_i[j];
    const double e = weights[k] * std::exp(s * diff.squaredNorm());
    s0 += e;
    s1 += e * diff;
    if (second_order) s2.noalias() += e * diff * diff.transpose();
  }
}

}  // namespace

double lf_kde_frozen(const Points& y, const Points& centers, const Matrix& C, double bandwidth) {
  check_kde_inputs(y, centers, C, bandwidth);
  const Eigen::Index n = y.rows();
  const Eigen::Index d = y.cols();
  const Matrix Ct = C.transpose();
  const double s = -1.0 / (2.0 * bandwidth * bandwidth);
  const auto& kern = simd::kernels();
  double total = 0.0;
  Vector yi(d);
  simd::Moments m;
  for (Eigen::Index i = 0; i < n; ++i) {
    yi = y.row(i).transpose();
    if (static_cast<std::size_t>(d) <= simd::kMaxVectorDim) {
      kern.gaussian_moments(view(centers), yi.data(), Ct.col(i).data(), s, false, m);
      total += m.s0;
    } else {
      double s0;
      Vector s1;
      Matrix s2;
      moments_any_dim(centers, yi.data(), Ct.col(i).data(), s, false, s0, s1, s2);
      total += s0;
    }
  }
  return kde_norm(bandwidth, d) * total;
}

double lf_kde(const Points& y, const Matrix& C, double bandwidth) {
  return lf_kde_frozen(y, y, C, bandwidth);
}

Vector lf_feature_terms(const Points& y, const Matrix& C, const FeatureBasis& basis) {
  if (C.rows() != y.rows() || C.cols() != y.rows())
    throw InvalidInput("lf_features: C does not match the number of points");
  if (basis.dim() != static_cast<std::size_t>(y.cols()))
    throw InvalidInput("lf_features: feature basis dimension mismatch");
  const Matrix F = feature_values(basis, y);
  Vector terms(F.cols());
  for (Eigen::Index l = 0; l < F.cols(); ++l) terms[l] = F.col(l).dot(C * F.col(l));
  return terms;
}

double lf_features(const Points& y, const Matrix& C, const TestFunctionSpec& spec) {
  spec.validate(static_cast<std::size_t>(y.cols()));
  const Vector terms = lf_feature_terms(y, C, *spec.features);
  double total = 0.0;
  for (Eigen::Index l = 0; l < terms.size(); ++l)
    total += spec.feature_weight(static_cast<std::size_t>(l)) * terms[l];
  return total;
}

// ------------------------------------------------------------------ Objective

Objective::Objective(const Points& x_cost, const Matrix& C, const Matrix& Z, const CostModel& cost,
                     const TestFunctionSpec& spec)
    : x_(x_cost), C_(C), Z_(Z), cost_(cost), spec_(spec) {
  cost_.validate();
  spec_.validate(static_cast<std::size_t>(x_.cols()));
  if (C_.rows() != x_.rows() || C_.cols() != x_.rows())
    throw InvalidInput("objective: C does not match the number of points");
  if (cost_.requires_pairing() && (Z_.rows() != x_.rows() || Z_.cols() != x_.rows()))
    throw InvalidInput("objective: Z does not match the number of points");
  Ct_ = C_.transpose();
  S_ = C_ + Ct_;
}

void Objective::kde_terms(const Points& y, const Points& centers, bool gradient, bool hessian,
                          double& value, Points* grad, HessianBlocks* hess) const {
  const Eigen::Index n = y.rows();
  const Eigen::Index d = y.cols();
  const double a = spec_.bandwidth_a;
  const double a2 = a * a;
  const double norm = kde_norm(a, d);
  const double s = -1.0 / (2.0 * a2);
  const auto& kern = simd::kernels();
  const bool vector_path = static_cast<std::size_t>(d) <= simd::kMaxVectorDim;

  value = 0.0;
  if (grad) grad->setZero(n, d);
  if (hess) {
    hess->diag.assign(static_cast<std::size_t>(n), Matrix::Zero(d, d));
    hess->cross.setZero(n * d, n * d);
  }

  Vector yi(d), s1(d), kernel_row(n);
  Matrix s2(d, d);
  simd::Moments m;
  for (Eigen::Index i = 0; i < n; ++i) {
    yi = y.row(i).transpose();
    double s0;
    if (vector_path) {
      kern.gaussian_moments(view(centers), yi.data(), Ct_.col(i).data(), s, hessian, m);
      s0 = m.s0;
      for (Eigen::Index j = 0; j < d; ++j) {
        s1[j] = m.s1[j];
        for (Eigen::Index l = 0; l < d; ++l) s2(j, l) = m.s2[j * d + l];
      }
    } else {
      moments_any_dim(centers, yi.data(), Ct_.col(i).data(), s, hessian, s0, s1, s2);
    }
    value += s0;
    // d/dy K(y, w) = K (w - y) / a^2
    if (gradient && grad) grad->row(i) = (norm / a2) * s1.transpose();
    if (!hessian || !hess) continue;

    // d2/dy2 K(y, w) = K [ (y-w)(y-w)^T / a^4 - I / a^2 ]
    Matrix& D = hess->diag[static_cast<std::size_t>(i)];
    D = (norm / (a2 * a2)) * s2;
    D.diagonal().array() -= norm * s0 / a2;

    // d2/dy dw K(y, w) = K [ I / a^2 - (y-w)(y-w)^T / a^4 ], weighted by C_ik.
    kern.gaussian_row(view(centers), yi.data(), s, norm, kernel_row.data());
    for (Eigen::Index k = 0; k < n; ++k) {
      const double w = C_(i, k) * kernel_row[k];
      if (w == 0.0) continue;
      const Vector delta = yi - centers.row(k).transpose();
      auto block = hess->cross.block(i * d, k * d, d, d);
      block.noalias() = (-w / (a2 * a2)) * delta * delta.transpose();
      block.diagonal().array() += w / a2;
    }
  }
  value *= norm;
}

void Objective::feature_terms(const Points& y, bool gradient, bool hessian, double& value,
                              Points* grad, HessianBlocks* hess) const {
  const FeatureBasis& basis = *spec_.features;
  const Eigen::Index n = y.rows();
  const Eigen::Index d = y.cols();
  const auto m = static_cast<Eigen::Index>(basis.size());

  Matrix F(n, m);
  Matrix A;  // (n d) x m, A(i*d + j, l) = df_l/dy_j at y_i
  std::vector<std::vector<Matrix>> H;
  if (gradient || hessian) A.resize(n * d, m);
  if (hessian) H.resize(static_cast<std::size_t>(n));

  Vector v;
  Matrix jac;
  for (Eigen::Index i = 0; i < n; ++i) {
    basis.evaluate(y.row(i).transpose(), v, jac, hessian ? &H[static_cast<std::size_t>(i)] : nullptr);
    F.row(i) = v.transpose();
    if (A.size()) A.block(i * d, 0, d, m) = jac.transpose();
  }

  Vector w(m);
  for (Eigen::Index l = 0; l < m; ++l) w[l] = spec_.feature_weight(static_cast<std::size_t>(l));

  // C annihilates constants, so centering the features first changes nothing
  // but the rounding error, which otherwise grows with the feature means.
  F.rowwise() -= F.colwise().mean();
  value = 0.0;
  Matrix SF = S_ * F;  // column l: (C + C^T) f_l
  for (Eigen::Index l = 0; l < m; ++l) value += 0.5 * w[l] * F.col(l).dot(SF.col(l));

  if (gradient && grad) {
    grad->setZero(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index l = 0; l < m; ++l)
        grad->row(i) += (w[l] * SF(i, l)) * A.block(i * d, l, d, 1).transpose();
  }
  if (!hessian || !hess) return;

  hess->diag.assign(static_cast<std::size_t>(n), Matrix::Zero(d, d));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index l = 0; l < m; ++l)
      hess->diag[static_cast<std::size_t>(i)] +=
          (w[l] * SF(i, l)) * H[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];

  // cross(i, k) = S_ik sum_l w_l grad f_l(y_i) grad f_l(y_k)^T
  hess->cross.noalias() = A * w.asDiagonal() * A.transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) hess->cross.block(i * d, k * d, d, d) *= S_(i, k);
}

ObjectiveEval Objective::evaluate(const Points& y, double lambda, EvalLevel level) const {
  if (y.rows() != x_.rows() || y.cols() != x_.cols())
    throw InvalidInput("objective: y has the wrong shape");
  const bool gradient = level != EvalLevel::Value;
  const bool hessian = level == EvalLevel::Hessian;

  ObjectiveEval ev;
  ev.lambda = lambda;
  ev.L_C = cost_value(cost_, x_, y, pairing());
  HessianBlocks hF;
  if (spec_.mode == Problem::Kde)
    kde_terms(y, y, gradient, hessian, ev.L_F, gradient ? &ev.grad_F : nullptr,
              hessian ? &hF : nullptr);
  else
    feature_terms(y, gradient, hessian, ev.L_F, gradient ? &ev.grad_F : nullptr,
                  hessian ? &hF : nullptr);
  ev.L = ev.L_C + lambda * ev.L_F;

  if (gradient) {
    ev.grad_C = cost_grad(cost_, x_, y, pairing());
    ev.grad = ev.grad_C + lambda * ev.grad_F;
  }
  if (hessian) {
    ev.hess = cost_hessian_blocks(cost_, x_, y, pairing());
    for (std::size_t i = 0; i < ev.hess.diag.size(); ++i) ev.hess.diag[i] += lambda * hF.diag[i];
    if (ev.hess.has_cross())
      ev.hess.cross += lambda * hF.cross;
    else
      ev.hess.cross = lambda * hF.cross;
    ev.hess_F = std::move(hF);
  }

  if (!std::isfinite(ev.L) || (gradient && !ev.grad.allFinite()))
    throw NumericError("objective: non-finite value", -1);
  return ev;
}

double Objective::test_value(const Points& y) const {
  if (spec_.mode == Problem::Kde) return lf_kde_frozen(y, y, C_, spec_.bandwidth_a);
  double v;
  feature_terms(y, false, false, v, nullptr, nullptr);
  return v;
}

double Objective::value_with_centers(const Points& y, const Points& centers, double lambda) const {
  const double lc = cost_value(cost_, x_, y, pairing());
  const double lf = spec_.mode == Problem::Kde ? lf_kde_frozen(y, centers, C_, spec_.bandwidth_a)
                                               : test_value(y);
  return lc + lambda * lf;
}

Points Objective::gradient_with_centers(const Points& y, const Points& centers,
                                        double lambda) const {
  Points gF;
  double v;
  if (spec_.mode == Problem::Kde)
    kde_terms(y, centers, true, false, v, &gF, nullptr);
  else
    feature_terms(y, true, false, v, &gF, nullptr);
  return cost_grad(cost_, x_, y, pairing()) + lambda * gF;
}

Matrix Objective::test_hessian(const Points& y) const {
  HessianBlocks hF;
  double v;
  if (spec_.mode == Problem::Kde)
    kde_terms(y, y, false, true, v, nullptr, &hF);
  else
    feature_terms(y, false, true, v, nullptr, &hF);
  return hF.assemble();
}

}  // namespace baryflow
