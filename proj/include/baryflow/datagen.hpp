#pragma once

#include "baryflow/couplings.hpp"
#include "baryflow/types.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace baryflow {

/// Samples paired with their covariates.
struct Dataset {
  Points x;
  Covariates z;
};

/// Seeded generator whose uniform and normal draws are identical on every
/// platform (the standard distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct EllipseOptions {
  int n_per_class = 100;
  double semi_major = 1.5;
  double axis_ratio = 3.0;  // eccentricity 2 sqrt(2) / 3
  /// Centers of classes 0, 1, 2. Class 0 has a vertical major axis.
  std::array<std::array<double, 2>, 3> centers{{{0.0, 3.0}, {-2.0, 0.0}, {2.0, 0.0}}};
};

/// Uniform samples on three elliptical discs, 2D, labels "0", "1", "2".
Dataset gen_ellipses(std::uint64_t seed, const EllipseOptions& opt = {});

struct SpherePatchOptions {
  int n_per_class = 250;
  bool antipodal = true;
  /// Latitude band of class 1 when both patches share a hemisphere.
  double shifted_lo = 0.125 * 3.14159265358979323846;
  double shifted_hi = 0.25 * 3.14159265358979323846;
};

/// Two polar patches in (longitude, latitude), labels "0" and "1".
Dataset gen_sphere_patches(std::uint64_t seed, const SpherePatchOptions& opt = {});

struct TimeSeriesSample {
  std::vector<Eigen::Vector3d> x;
  std::vector<Eigen::Vector3d> w;
  std::vector<int> t;
};

/// Deterministic longitude dynamics composed with a hidden polar-cap signal.
/// x[0] is the south pole and w[0] the north pole.
TimeSeriesSample gen_hidden_signal(std::uint64_t seed, int T = 1000, double cap_width = 0.45);

/// (r, latitude, longitude) -> Cartesian.
Eigen::Vector3d sph2cart(double r, double phi, double theta);

struct Spherical {
  double r = 0.0;
  double phi = 0.0;    // latitude in [-pi/2, pi/2]
  double theta = 0.0;  // longitude in [0, 2 pi)
};

Spherical cart2sph(const Eigen::Vector3d& v);

/// Cross-product matrix: K(u) v = u x v.
Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& u);

/// I + 2 K(u)^2, the reflection through the axis u for unit u.
Eigen::Matrix3d axis_reflection(const Eigen::Vector3d& u);

/// Samples pixel locations with probability proportional to the intensity
/// above `threshold`; coordinates are pixel centers scaled into [0, 1]^2
/// (column, row).
Points image_to_pointcloud(const Matrix& image, int n_samples, double threshold, std::uint64_t seed);

/// A "6"-shaped curve: a unit loop with a stem rising from its left side.
Points six_curve(int n);

/// Two copies of the 6-curve, the second rotated and translated, with small
/// Gaussian jitter; labels "0" and "1".
Dataset gen_six_shapes(std::uint64_t seed, int n_per_class = 200, double jitter = 0.01);

enum class LagCovariates { Cartesian, Spherical };

/// Samples x^n for n >= 1 in spherical coordinates (longitude, latitude),
/// paired with the continuous covariate z^n = x^{n-1}, given either as the
/// Cartesian unit vector or as (longitude, latitude).
Dataset lagged_dataset(const std::vector<Eigen::Vector3d>& series,
                       LagCovariates style = LagCovariates::Cartesian);

}  // namespace baryflow
