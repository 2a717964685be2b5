#include "baryflow/costs.hpp"

#include <algorithm>
#include <cstdio>
#include <charconv>
#include <cmath>
#include <numbers>

namespace baryflow {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kLatitudeSlack = 1e-12;
// sqrt(h) at or beyond this is treated as antipodal: derivatives vanish there.
constexpr double kAntipodalClamp = 1.0 - 1e-12;

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw InvalidInput("cost: cannot parse " + std::string(what) + " from '" + std::string(text) +
                       "'");
  return v;
}

void check_shapes(const CostModel& model, const Points& x, const Points& y, const Matrix* pairing) {
  model.validate();
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw InvalidInput("cost: x and y must have the same shape");
  if (x.rows() == 0) throw InvalidInput("cost: empty point cloud");
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("cost: non-finite coordinates");
  if (model.requires_pairing()) {
    if (pairing == nullptr) throw InvalidInput("cost: distortion cost requires the coupling Z");
    if (pairing->rows() != x.rows() || pairing->cols() != x.rows())
      throw InvalidInput("cost: coupling Z has the wrong size");
  } else if (pairing != nullptr) {
    throw InvalidInput("cost: coupling Z supplied to a pairwise cost");
  }
  if (model.family == CostModel::Family::GeodesicSphere) {
    if (x.cols() != 2) throw InvalidInput("cost: geodesic cost needs (longitude, latitude) columns");
    for (const Points* p : {&x, &y})
      if ((p->col(1).array().abs() > kHalfPi + kLatitudeSlack).any())
        throw InvalidInput("cost: latitude outside [-pi/2, pi/2]");
  }
}

// ---------------------------------------------------------------- p-norm

struct PNormTerm {
  double value, d1, d2;  // c(t), dc/dt, d2c/dt2
};

PNormTerm pnorm_term(double t, double p, double eps) {
  const double root = std::sqrt(t * t + eps);
  const double s = t * t / (root + std::sqrt(eps));  // sqrt(t^2+eps) - sqrt(eps), no cancellation
  const double ds = t / root;
  const double dds = eps / (root * root * root);
  PNormTerm out;
  out.value = std::pow(s, p);
  out.d1 = p * std::pow(s, p - 1.0) * ds;
  const double curvature = (s == 0.0) ? 0.0 : p * (p - 1.0) * std::pow(s, p - 2.0) * ds * ds;
  out.d2 = curvature + p * std::pow(s, p - 1.0) * dds;
  return out;
}

// ---------------------------------------------------------------- sphere

// Haversine term h between x = (lon, lat) and y, with derivatives in y.
struct Haversine {
  double h;
  double dh[2];       // d/dlon_y, d/dlat_y
  double ddh[2][2];
};

Haversine haversine(double lon_x, double lat_x, double lon_y, double lat_y) {
  const double dlon = lon_y - lon_x;
  const double dlat = lat_y - lat_x;
  const double sl = std::sin(0.5 * dlon);
  const double sp = std::sin(0.5 * dlat);
  const double cx = std::cos(lat_x);
  const double cy = std::cos(lat_y);
  const double sy = std::sin(lat_y);
  Haversine out;
  out.h = sp * sp + cx * cy * sl * sl;
  out.dh[0] = 0.5 * cx * cy * std::sin(dlon);
  out.dh[1] = 0.5 * std::sin(dlat) - cx * sy * sl * sl;
  out.ddh[0][0] = 0.5 * cx * cy * std::cos(dlon);
  out.ddh[0][1] = out.ddh[1][0] = -0.5 * cx * sy * std::sin(dlon);
  out.ddh[1][1] = 0.5 * std::cos(dlat) - cx * cy * sl * sl;
  return out;
}

// G(h) = D(h)^k with D = 2 asin(sqrt h), k = 2 (squared) or 1, with G' and G''.
struct ArcTerm {
  double g, d1, d2;
};

ArcTerm arc_term(double h, bool squared) {
  h = std::clamp(h, 0.0, 1.0);
  const double s = std::sqrt(h);
  const double dist = 2.0 * std::asin(std::min(s, 1.0));
  ArcTerm out{squared ? dist * dist : dist, 0.0, 0.0};
  if (s >= kAntipodalClamp) return out;
  if (squared) {
    if (h < 1e-3) {
      // Series of 4 asin^2(sqrt h); the closed form cancels badly near h = 0.
      out.d1 = 4.0 * (1.0 + h * (2.0 / 3.0 + h * (8.0 / 15.0 + h * (16.0 / 35.0 + h * 128.0 / 315.0))));
      out.d2 = 4.0 * (2.0 / 3.0 + h * (16.0 / 15.0 + h * (48.0 / 35.0 + h * 512.0 / 315.0)));
    } else {
      const double q = h * (1.0 - h);
      const double dd = 1.0 / std::sqrt(q);
      const double ddd = -0.5 * (1.0 - 2.0 * h) / (q * std::sqrt(q));
      out.d1 = 2.0 * dist * dd;
      out.d2 = 2.0 * dd * dd + 2.0 * dist * ddd;
    }
  } else if (h > 0.0) {
    // Plain distance is not differentiable at coincident points; the
    // gradient there is taken as zero.
    const double q = h * (1.0 - h);
    out.d1 = 1.0 / std::sqrt(q);
    out.d2 = -0.5 * (1.0 - 2.0 * h) / (q * std::sqrt(q));
  }
  return out;
}

// ---------------------------------------------------------------- distortion

template <typename PairFn>
void for_each_pair(const Matrix& Z, PairFn&& fn) {
  const Eigen::Index n = Z.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = Z(i, j) + Z(j, i);
      if (w != 0.0) fn(i, j, w);
    }
}

}  // namespace

// ---------------------------------------------------------------- model

CostModel CostModel::p_norm(double p, double eps_abs) {
  CostModel m;
  m.family = Family::PNorm;
  m.p = p;
  m.eps_abs = eps_abs;
  m.validate();
  return m;
}

CostModel CostModel::geodesic_sphere(bool squared) {
  CostModel m;
  m.family = Family::GeodesicSphere;
  m.squared_geodesic = squared;
  return m;
}

CostModel CostModel::distortion(double omega, double eps_dist) {
  CostModel m;
  m.family = Family::Distortion;
  m.omega = omega;
  m.eps_dist = eps_dist;
  m.validate();
  return m;
}

CostModel CostModel::parse(std::string_view spec) {
  if (spec == "l2") return sq_euclidean();
  if (spec == "geodesic-sphere") return geodesic_sphere();
  if (spec.starts_with("pnorm:")) return p_norm(parse_number(spec.substr(6), "p"));
  if (spec.starts_with("distortion:")) return distortion(parse_number(spec.substr(11), "omega"));
  throw InvalidInput("unknown cost '" + std::string(spec) +
                     "' (expected l2, pnorm:<p>, geodesic-sphere or distortion:<omega>)");
}

std::string CostModel::to_string() const {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return std::string(buf);
  };
  switch (family) {
    case Family::SqEuclidean: return "l2";
    case Family::PNorm: return "pnorm:" + num(p);
    case Family::GeodesicSphere: return squared_geodesic ? "geodesic-sphere" : "geodesic-sphere(distance)";
    case Family::Distortion: return "distortion:" + num(omega);
  }
  return "?";
}

void CostModel::validate() const {
  switch (family) {
    case Family::PNorm:
      if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidInput("cost: p-norm needs p >= 1");
      if (!(eps_abs > 0.0)) throw InvalidInput("cost: p-norm needs eps_abs > 0");
      break;
    case Family::Distortion:
      if (!(eps_dist > 0.0)) throw InvalidInput("cost: distortion needs eps_dist > 0");
      if (!(omega > 0.0)) throw InvalidInput("cost: distortion needs omega > 0");
      break;
    default: break;
  }
}

double great_circle_distance(double lon_a, double lat_a, double lon_b, double lat_b) {
  const double h = haversine(lon_a, lat_a, lon_b, lat_b).h;
  return 2.0 * std::asin(std::min(std::sqrt(std::max(h, 0.0)), 1.0));
}

// ---------------------------------------------------------------- value

double cost_value(const CostModel& model, const Points& x, const Points& y, const Matrix* pairing) {
  check_shapes(model, x, y, pairing);
  const Eigen::Index n = x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  switch (model.family) {
    case CostModel::Family::SqEuclidean:
      return 0.5 * (y - x).squaredNorm() * inv_n;
    case CostModel::Family::PNorm:
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < n; ++i)
          total += pnorm_term(x(i, j) - y(i, j), model.p, model.eps_abs).value;
      return total * inv_n;
    case CostModel::Family::GeodesicSphere:
      for (Eigen::Index i = 0; i < n; ++i)
        total += arc_term(haversine(x(i, 0), x(i, 1), y(i, 0), y(i, 1)).h, model.squared_geodesic).g;
      return total * inv_n;
    case CostModel::Family::Distortion: {
      const double eps2 = model.eps_dist * model.eps_dist;
      for_each_pair(*pairing, [&](Eigen::Index i, Eigen::Index j, double w) {
        const double q = (x.row(i) - x.row(j)).squaredNorm() + eps2;
        const double r = (y.row(i) - y.row(j)).squaredNorm() / q;
        total += w * (r - 1.0) * (r - 1.0);
      });
      // Pair weights Z_ij / N: the mean over same-covariate pairs, which is the
      // per-class (1/N_k^2) sum for categorical labels.
      return total * inv_n + model.omega * inv_n * (y - x).squaredNorm();
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------- gradient

Points cost_grad(const CostModel& model, const Points& x, const Points& y, const Matrix* pairing) {
  check_shapes(model, x, y, pairing);
  const Eigen::Index n = x.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  Points g = Points::Zero(n, x.cols());
  switch (model.family) {
    case CostModel::Family::SqEuclidean:
      g = (y - x) * inv_n;
      break;
    case CostModel::Family::PNorm:
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < n; ++i)
          g(i, j) = -pnorm_term(x(i, j) - y(i, j), model.p, model.eps_abs).d1 * inv_n;
      break;
    case CostModel::Family::GeodesicSphere:
      for (Eigen::Index i = 0; i < n; ++i) {
        const Haversine hv = haversine(x(i, 0), x(i, 1), y(i, 0), y(i, 1));
        const ArcTerm a = arc_term(hv.h, model.squared_geodesic);
        g(i, 0) = a.d1 * hv.dh[0] * inv_n;
        g(i, 1) = a.d1 * hv.dh[1] * inv_n;
      }
      break;
    case CostModel::Family::Distortion: {
      const double eps2 = model.eps_dist * model.eps_dist;
      for_each_pair(*pairing, [&](Eigen::Index i, Eigen::Index j, double w) {
        const double q = (x.row(i) - x.row(j)).squaredNorm() + eps2;
        const Eigen::RowVectorXd u = y.row(i) - y.row(j);
        const double r = u.squaredNorm() / q;
        const Eigen::RowVectorXd gi = (4.0 * w * inv_n * (r - 1.0) / q) * u;
        g.row(i) += gi;
        g.row(j) -= gi;
      });
      g += (2.0 * model.omega * inv_n) * (y - x);
      break;
    }
  }
  return g;
}

// ---------------------------------------------------------------- Hessian

HessianBlocks cost_hessian_blocks(const CostModel& model, const Points& x, const Points& y,
                                  const Matrix* pairing) {
  check_shapes(model, x, y, pairing);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  HessianBlocks hb;
  hb.diag.assign(static_cast<std::size_t>(n), Matrix::Zero(d, d));
  switch (model.family) {
    case CostModel::Family::SqEuclidean:
      for (auto& b : hb.diag) b.diagonal().setConstant(inv_n);
      break;
    case CostModel::Family::PNorm:
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
          hb.diag[static_cast<std::size_t>(i)](j, j) =
              pnorm_term(x(i, j) - y(i, j), model.p, model.eps_abs).d2 * inv_n;
      break;
    case CostModel::Family::GeodesicSphere:
      for (Eigen::Index i = 0; i < n; ++i) {
        const Haversine hv = haversine(x(i, 0), x(i, 1), y(i, 0), y(i, 1));
        const ArcTerm a = arc_term(hv.h, model.squared_geodesic);
        auto& b = hb.diag[static_cast<std::size_t>(i)];
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c)
            b(r, c) = (a.d2 * hv.dh[r] * hv.dh[c] + a.d1 * hv.ddh[r][c]) * inv_n;
      }
      break;
    case CostModel::Family::Distortion: {
      const double eps2 = model.eps_dist * model.eps_dist;
      hb.cross = Matrix::Zero(n * d, n * d);
      for_each_pair(*pairing, [&](Eigen::Index i, Eigen::Index j, double w) {
        const double q = (x.row(i) - x.row(j)).squaredNorm() + eps2;
        const Vector u = (y.row(i) - y.row(j)).transpose();
        const double r = u.squaredNorm() / q;
        Matrix H = (2.0 / q) * u * u.transpose();
        H.diagonal().array() += r - 1.0;
        H *= 4.0 * w * inv_n / q;
        hb.diag[static_cast<std::size_t>(i)] += H;
        hb.diag[static_cast<std::size_t>(j)] += H;
        hb.cross.block(i * d, j * d, d, d) -= H;
        hb.cross.block(j * d, i * d, d, d) -= H;
      });
      for (auto& b : hb.diag) b.diagonal().array() += 2.0 * model.omega * inv_n;
      break;
    }
  }
  return hb;
}

void project_to_domain(const CostModel& model, Points& y) {
  if (model.family != CostModel::Family::GeodesicSphere || y.cols() < 2) return;
  y.col(1) = y.col(1).cwiseMax(-kHalfPi).cwiseMin(kHalfPi);
}

}  // namespace baryflow
