#include "baryflow/features.hpp"

#include <functional>

namespace baryflow {

namespace {

// y^e with the convention 0^0 = 1 and a zero for negative powers.
double ipow(double y, int e) {
  if (e < 0) return 0.0;
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= y;
  return r;
}

}  // namespace

MonomialBasis::MonomialBasis(std::size_t dim, int degree) : dim_(dim), degree_(degree) {
  if (dim == 0) throw InvalidInput("monomial basis: dimension must be positive");
  if (degree < 1) throw InvalidInput("monomial basis: degree must be at least 1");
  std::vector<int> alpha(dim, 0);
  for (int total = 1; total <= degree; ++total) {
    // Lexicographic, highest power on the first coordinate first.
    std::function<void(std::size_t, int)> fill = [&](std::size_t j, int left) {
      if (j + 1 == dim) {
        alpha[j] = left;
        exponents_.push_back(alpha);
        return;
      }
      for (int e = left; e >= 0; --e) {
        alpha[j] = e;
        fill(j + 1, left - e);
      }
    };
    fill(0, total);
  }
}

void MonomialBasis::evaluate(const Vector& y, Vector& values, Matrix& jac,
                             std::vector<Matrix>* hessians) const {
  const auto m = static_cast<Eigen::Index>(exponents_.size());
  const auto d = static_cast<Eigen::Index>(dim_);
  values.resize(m);
  jac.resize(m, d);
  if (hessians) hessians->assign(static_cast<std::size_t>(m), Matrix::Zero(d, d));

  for (Eigen::Index l = 0; l < m; ++l) {
    const auto& a = exponents_[static_cast<std::size_t>(l)];
    // Product of y_k^(a_k - s_k) over k, with s the derivative multi-index.
    auto term = [&](Eigen::Index skip1, Eigen::Index skip2) {
      double coef = 1.0;
      double prod = 1.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        int e = a[static_cast<std::size_t>(k)];
        if (k == skip1) { coef *= e; --e; }
        if (k == skip2) { coef *= e; --e; }
        if (coef == 0.0) return 0.0;
        prod *= ipow(y[k], e);
      }
      return coef * prod;
    };
    values[l] = term(-1, -1);
    for (Eigen::Index j = 0; j < d; ++j) jac(l, j) = term(j, -1);
    if (!hessians) continue;
    auto& H = (*hessians)[static_cast<std::size_t>(l)];
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index k = j; k < d; ++k) H(j, k) = H(k, j) = term(j, k);
  }
}

Matrix feature_values(const FeatureBasis& basis, const Points& y) {
  Matrix F(y.rows(), static_cast<Eigen::Index>(basis.size()));
  Vector v;
  Matrix jac;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    basis.evaluate(y.row(i).transpose(), v, jac, nullptr);
    F.row(i) = v.transpose();
  }
  return F;
}

}  // namespace baryflow
