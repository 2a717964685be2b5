#include "baryflow/couplings.hpp"

#include "baryflow/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace baryflow {

Covariates Covariates::categorical(const std::vector<std::string>& names) {
  Covariates c;
  c.kind = Kind::Categorical;
  std::map<std::string, int> ids;
  c.labels.reserve(names.size());
  for (const auto& n : names) {
    auto [it, inserted] = ids.try_emplace(n, static_cast<int>(c.class_names.size()));
    if (inserted) c.class_names.push_back(n);
    c.labels.push_back(it->second);
  }
  return c;
}

Covariates Covariates::categorical(const std::vector<int>& ids) {
  std::vector<std::string> names;
  names.reserve(ids.size());
  for (int id : ids) names.push_back(std::to_string(id));
  return categorical(names);
}

Covariates Covariates::continuous(Matrix values, std::optional<double> bandwidth) {
  Covariates c;
  c.kind = Kind::Continuous;
  c.values = std::move(values);
  c.bandwidth = bandwidth;
  return c;
}

std::size_t Covariates::size() const {
  return kind == Kind::Categorical ? labels.size() : static_cast<std::size_t>(values.rows());
}

void Covariates::validate() const {
  if (size() == 0) throw InvalidInput("covariates: empty");
  if (kind == Kind::Categorical) {
    std::vector<int> counts(class_names.size(), 0);
    for (int l : labels) {
      if (l < 0 || l >= num_classes()) throw InvalidInput("covariates: label outside alphabet");
      ++counts[static_cast<std::size_t>(l)];
    }
    if (std::find(counts.begin(), counts.end(), 0) != counts.end())
      throw InvalidInput("covariates: class with no samples");
  } else {
    if (values.cols() == 0) throw InvalidInput("covariates: zero-width continuous values");
    if (!values.allFinite()) throw InvalidInput("covariates: non-finite value");
    if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth)))
      throw InvalidInput("covariates: bandwidth must be positive");
  }
}

double gaussian_kernel(const Vector& u, const Vector& v, double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InvalidInput("gaussian_kernel: bandwidth must be positive and finite");
  if (u.size() != v.size()) throw InvalidInput("gaussian_kernel: dimension mismatch");
  if (!u.allFinite() || !v.allFinite()) throw InvalidInput("gaussian_kernel: non-finite input");
  const double a2 = bandwidth * bandwidth;
  const double norm = std::pow(2.0 * std::numbers::pi * a2, -0.5 * static_cast<double>(u.size()));
  return norm * std::exp(-(u - v).squaredNorm() / (2.0 * a2));
}

namespace {

void fill_gaussian_matrix(const Points& points, double bandwidth, double scale, Matrix& K) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  const simd::SoaView view{points.data(), n, d};
  const auto& kern = simd::kernels();
  const double s = -1.0 / (2.0 * bandwidth * bandwidth);
  K.resize(points.rows(), points.rows());
  Vector center(points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    center = points.row(i).transpose();
    kern.gaussian_row(view, center.data(), s, scale, K.col(i).data());
  }
  // Mirror the upper triangle so the result is exactly symmetric.
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index k = i + 1; k < K.cols(); ++k) K(k, i) = K(i, k);
}

}  // namespace

Matrix kernel_matrix(const Points& points, double bandwidth) {
  if (points.rows() < 1) throw InvalidInput("kernel_matrix: need at least one point");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw InvalidInput("kernel_matrix: bandwidth must be positive and finite");
  if (!points.allFinite()) throw InvalidInput("kernel_matrix: non-finite input");
  const double a2 = bandwidth * bandwidth;
  const double norm =
      std::pow(2.0 * std::numbers::pi * a2, -0.5 * static_cast<double>(points.cols()));
  Matrix K;
  fill_gaussian_matrix(points, bandwidth, norm, K);
  return K;
}

SinkhornResult sinkhorn_bistochastic(const Matrix& K, double tol, int max_iter) {
  const Eigen::Index n = K.rows();
  if (n == 0 || K.cols() != n) throw InvalidInput("sinkhorn: matrix must be square and non-empty");
  if (!K.allFinite()) throw InvalidInput("sinkhorn: non-finite entry");
  if ((K.array() < 0.0).any()) throw InvalidInput("sinkhorn: negative entry");
  if ((K.diagonal().array() <= 0.0).any()) throw InvalidInput("sinkhorn: non-positive diagonal");
  const double scale = K.cwiseAbs().maxCoeff();
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidInput("sinkhorn: matrix is not symmetric");

  const auto& kern = simd::kernels();
  const auto un = static_cast<std::size_t>(n);
  // K is symmetric, so (K d)_i is the dot product of column i with d.
  auto apply = [&](const Vector& d, Vector& out) {
    for (Eigen::Index i = 0; i < n; ++i) out[i] = kern.dot(K.col(i).data(), d.data(), un);
  };

  Vector d(n), Kd(n);
  d.setOnes();
  apply(d, Kd);
  d = Kd.cwiseSqrt().cwiseInverse();

  SinkhornResult res;
  for (int it = 0;; ++it) {
    apply(d, Kd);
    res.residual = (d.cwiseProduct(Kd).array() - 1.0).abs().maxCoeff();
    res.iterations = it;
    if (res.residual <= tol) break;
    if (it >= max_iter)
      throw ConvergenceError("sinkhorn: residual " + std::to_string(res.residual) +
                                 " above tolerance after " + std::to_string(max_iter) +
                                 " iterations",
                             res.residual, it);
    // Geometric mean of the row and column updates keeps a single symmetric
    // scaling vector; near the fixed point the error contracts by (1 - mu)/2
    // for each eigenvalue mu of Z.
    d = (d.array() / Kd.array()).sqrt();
  }

  res.scaling = d;
  res.Z.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = i; k < n; ++k) {
      const double z = d[i] * K(i, k) * d[k];
      res.Z(i, k) = z;
      res.Z(k, i) = z;
    }
  return res;
}

Matrix categorical_coupling(const std::vector<int>& labels) {
  if (labels.empty()) throw InvalidInput("categorical_coupling: empty labels");
  const auto n = static_cast<Eigen::Index>(labels.size());
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  Matrix Z = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = 1.0 / counts[labels[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < n; ++j)
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) Z(i, j) = w;
  }
  return Z;
}

Matrix centering_matrix(const Matrix& Z) {
  if (Z.rows() != Z.cols() || Z.rows() == 0)
    throw InvalidInput("centering_matrix: Z must be square and non-empty");
  const Vector row_mean = Z.rowwise().sum() / static_cast<double>(Z.rows());
  return Z.colwise() - row_mean;
}

double median_bandwidth(const Points& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) return 1.0;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = i + 1; k < n; ++k) dist.push_back((points.row(i) - points.row(k)).norm());
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  const double med = *mid;
  return med > 0.0 ? med / std::numbers::sqrt2 : 1.0;
}

CouplingMatrices build_couplings(const Covariates& cov) {
  cov.validate();
  CouplingMatrices out;
  if (cov.kind == Covariates::Kind::Categorical) {
    out.Z = categorical_coupling(cov.labels);
  } else {
    const double b = cov.bandwidth.value_or(median_bandwidth(cov.values));
    // The normalizing constant cancels in D K D, so the bare exponential is
    // used; it cannot overflow for small bandwidths in high dimension.
    Matrix K;
    fill_gaussian_matrix(cov.values, b, 1.0, K);
    out.Z = sinkhorn_bistochastic(K).Z;
  }
  out.C = centering_matrix(out.Z);
  return out;
}

}  // namespace baryflow
