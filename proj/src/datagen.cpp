#include "baryflow/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace baryflow {

namespace {
constexpr double kPi = std::numbers::pi;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

Dataset gen_ellipses(std::uint64_t seed, const EllipseOptions& opt) {
  if (opt.n_per_class < 1) throw InvalidInput("ellipses: n_per_class must be positive");
  if (!(opt.semi_major > 0.0) || !(opt.axis_ratio >= 1.0))
    throw InvalidInput("ellipses: invalid axis lengths");
  Rng rng(seed);
  const int n = 3 * opt.n_per_class;
  Dataset ds;
  ds.x.resize(n, 2);
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  const double a = opt.semi_major;
  const double b = a / opt.axis_ratio;
  int row = 0;
  for (int c = 0; c < 3; ++c) {
    const double sx = c == 0 ? b : a;
    const double sy = c == 0 ? a : b;
    for (int k = 0; k < opt.n_per_class; ++k) {
      double u, v;
      do {
        u = rng.uniform(-1.0, 1.0);
        v = rng.uniform(-1.0, 1.0);
      } while (u * u + v * v > 1.0);
      ds.x(row, 0) = opt.centers[static_cast<std::size_t>(c)][0] + sx * u;
      ds.x(row, 1) = opt.centers[static_cast<std::size_t>(c)][1] + sy * v;
      labels.push_back(std::to_string(c));
      ++row;
    }
  }
  ds.z = Covariates::categorical(labels);
  return ds;
}

Dataset gen_sphere_patches(std::uint64_t seed, const SpherePatchOptions& opt) {
  if (opt.n_per_class < 1) throw InvalidInput("sphere patches: n_per_class must be positive");
  if (!(opt.shifted_lo < opt.shifted_hi) || opt.shifted_lo < -kPi / 2 || opt.shifted_hi > kPi / 2)
    throw InvalidInput("sphere patches: invalid latitude band");
  Rng rng(seed);
  const int n = 2 * opt.n_per_class;
  Dataset ds;
  ds.x.resize(n, 2);
  std::vector<std::string> labels;
  for (int c = 0; c < 2; ++c) {
    double lo = 3.0 * kPi / 8.0, hi = kPi / 2.0;
    if (c == 1) {
      lo = opt.antipodal ? -kPi / 2.0 : opt.shifted_lo;
      hi = opt.antipodal ? -3.0 * kPi / 8.0 : opt.shifted_hi;
    }
    for (int k = 0; k < opt.n_per_class; ++k) {
      const int row = c * opt.n_per_class + k;
      ds.x(row, 0) = rng.uniform(0.0, 2.0 * kPi);
      ds.x(row, 1) = rng.uniform(lo, hi);
      labels.push_back(std::to_string(c));
    }
  }
  ds.z = Covariates::categorical(labels);
  return ds;
}

Eigen::Vector3d sph2cart(double r, double phi, double theta) {
  return {r * std::cos(phi) * std::cos(theta), r * std::cos(phi) * std::sin(theta), r * std::sin(phi)};
}

Spherical cart2sph(const Eigen::Vector3d& v) {
  Spherical s;
  s.r = v.norm();
  if (s.r == 0.0) return s;
  s.phi = std::asin(std::clamp(v.z() / s.r, -1.0, 1.0));
  s.theta = std::atan2(v.y(), v.x());
  if (s.theta < 0.0) s.theta += 2.0 * kPi;
  if (s.theta >= 2.0 * kPi) s.theta = 0.0;
  return s;
}

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& u) {
  Eigen::Matrix3d K;
  K << 0.0, -u.z(), u.y(),
       u.z(), 0.0, -u.x(),
       -u.y(), u.x(), 0.0;
  return K;
}

Eigen::Matrix3d axis_reflection(const Eigen::Vector3d& u) {
  const Eigen::Matrix3d K = cross_matrix(u);
  return Eigen::Matrix3d::Identity() + 2.0 * K * K;
}

TimeSeriesSample gen_hidden_signal(std::uint64_t seed, int T, double cap_width) {
  if (T < 1) throw InvalidInput("hidden signal: T must be positive");
  if (!(cap_width >= 0.0) || cap_width > kPi) throw InvalidInput("hidden signal: invalid cap width");
  Rng rng(seed);
  TimeSeriesSample out;
  out.x.reserve(static_cast<std::size_t>(T));
  out.w.reserve(static_cast<std::size_t>(T));
  out.x.emplace_back(0.0, 0.0, -1.0);
  out.w.emplace_back(0.0, 0.0, 1.0);
  out.t.push_back(0);
  for (int n = 1; n < T; ++n) {
    const Spherical s = cart2sph(out.x.back());
    const double theta = s.theta + std::sin(s.theta) + 0.5;
    const double phi = s.phi;
    const Eigen::Vector3d axis = sph2cart(1.0, 0.5 * (phi + kPi / 2.0), theta);
    const double phi_w = rng.uniform(kPi / 2.0 - cap_width, kPi / 2.0);
    const double theta_w = rng.uniform(0.0, 2.0 * kPi);
    const Eigen::Vector3d w = sph2cart(1.0, phi_w, theta_w);
    out.w.push_back(w);
    out.x.push_back(axis_reflection(axis) * w);
    out.t.push_back(n);
  }
  return out;
}

Points image_to_pointcloud(const Matrix& image, int n_samples, double threshold, std::uint64_t seed) {
  if (n_samples < 1) throw InvalidInput("image: n_samples must be positive");
  if (image.size() == 0 || !image.allFinite()) throw InvalidInput("image: empty or non-finite image");
  const Eigen::Index rows = image.rows(), cols = image.cols();
  std::vector<double> cumulative;
  std::vector<Eigen::Index> index;
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double v = image(r, c) - threshold;
      if (v <= 0.0) continue;
      total += v;
      cumulative.push_back(total);
      index.push_back(r * cols + c);
    }
  if (cumulative.empty()) throw InvalidInput("image: empty support above the threshold");

  Rng rng(seed);
  Points out(n_samples, 2);
  for (int k = 0; k < n_samples; ++k) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const Eigen::Index pix = index[static_cast<std::size_t>(it - cumulative.begin())];
    out(k, 0) = (static_cast<double>(pix % cols) + 0.5) / static_cast<double>(cols);
    out(k, 1) = (static_cast<double>(pix / cols) + 0.5) / static_cast<double>(rows);
  }
  return out;
}

Points six_curve(int n) {
  if (n < 1) throw InvalidInput("six curve: n must be positive");
  const double loop = 2.0 * kPi;  // unit circle
  const double stem = kPi;        // quarter of a radius-2 circle
  const double length = loop + stem;
  Points p(n, 2);
  for (int k = 0; k < n; ++k) {
    const double s = (k + 0.5) * length / n;
    if (s < loop) {
      p(k, 0) = std::cos(kPi + s);
      p(k, 1) = std::sin(kPi + s);
    } else {
      const double angle = kPi - 0.5 * (s - loop);
      p(k, 0) = 1.0 + 2.0 * std::cos(angle);
      p(k, 1) = 2.0 * std::sin(angle);
    }
  }
  return p;
}

Dataset gen_six_shapes(std::uint64_t seed, int n_per_class, double jitter) {
  if (!(jitter >= 0.0)) throw InvalidInput("six shapes: jitter must be non-negative");
  const Points base = six_curve(n_per_class);
  Rng rng(seed);
  const double angle = kPi / 2.0;
  Eigen::Matrix2d R;
  R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const Eigen::RowVector2d offset(5.0, 1.0);

  Dataset ds;
  ds.x.resize(2 * n_per_class, 2);
  std::vector<std::string> labels;
  for (int k = 0; k < n_per_class; ++k) {
    ds.x.row(k) = base.row(k);
    labels.push_back("0");
  }
  for (int k = 0; k < n_per_class; ++k) {
    ds.x.row(n_per_class + k) = base.row(k) * R.transpose() + offset;
    labels.push_back("1");
  }
  for (Eigen::Index i = 0; i < ds.x.rows(); ++i)
    for (Eigen::Index j = 0; j < 2; ++j) ds.x(i, j) += jitter * rng.normal();
  ds.z = Covariates::categorical(labels);
  return ds;
}

Dataset lagged_dataset(const std::vector<Eigen::Vector3d>& series, LagCovariates style) {
  if (series.size() < 3) throw InvalidInput("lagged dataset: need at least three samples");
  const auto n = static_cast<Eigen::Index>(series.size()) - 1;
  Dataset ds;
  ds.x.resize(n, 2);
  Matrix z(n, style == LagCovariates::Cartesian ? 3 : 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Spherical cur = cart2sph(series[static_cast<std::size_t>(i + 1)]);
    ds.x(i, 0) = cur.theta;
    ds.x(i, 1) = cur.phi;
    const Eigen::Vector3d& prev = series[static_cast<std::size_t>(i)];
    if (style == LagCovariates::Cartesian) {
      z.row(i) = prev.transpose() / prev.norm();
    } else {
      const Spherical p = cart2sph(prev);
      z(i, 0) = p.theta;
      z(i, 1) = p.phi;
    }
  }
  ds.z = Covariates::continuous(std::move(z));
  return ds;
}

}  // namespace baryflow
