#pragma once

#include "baryflow/types.hpp"

#include <string>
#include <string_view>

namespace baryflow {

/// Transport cost L_C between the original samples x and their images y.
///
/// Pairwise families average a point cost over the samples,
/// L_C = (1/N) sum_i c(x_i, y_i):
///   - SqEuclidean:    c = |x - y|^2 / 2
///   - PNorm:          c = sum_j s(x_j - y_j)^p, s(t) = sqrt(t^2 + eps) - sqrt(eps)
///   - GeodesicSphere: squared great-circle distance between (longitude,
///                     latitude) pairs on the unit sphere (plain distance
///                     when `squared_geodesic` is false)
/// Distortion is not pairwise: it compares every pair of images against the
/// pair of originals, (1/N) sum_{i != j} Z_ij (|y_i - y_j|^2 / (|x_i - x_j|^2 + eps^2) - 1)^2,
/// plus a small anchor term omega * (1/N) sum_i |y_i - x_i|^2.
struct CostModel {
  enum class Family { SqEuclidean, PNorm, GeodesicSphere, Distortion };

  Family family = Family::SqEuclidean;
  double p = 2.0;
  double eps_abs = 0.01;
  bool squared_geodesic = true;
  double eps_dist = 0.01;
  double omega = 0.01;

  static CostModel sq_euclidean() { return {}; }
  static CostModel p_norm(double p, double eps_abs = 0.01);
  static CostModel geodesic_sphere(bool squared = true);
  static CostModel distortion(double omega = 0.01, double eps_dist = 0.01);

  /// Parses `l2`, `pnorm:<p>`, `geodesic-sphere`, `distortion:<omega>`.
  static CostModel parse(std::string_view spec);
  std::string to_string() const;

  bool requires_pairing() const { return family == Family::Distortion; }
  bool is_canonical() const { return family == Family::SqEuclidean; }
  void validate() const;
};

/// Cost value. `pairing` is the coupling Z and must be given exactly when
/// the model requires it.
double cost_value(const CostModel& model, const Points& x, const Points& y,
                  const Matrix* pairing = nullptr);

/// dL_C/dy_i, one row per sample.
Points cost_grad(const CostModel& model, const Points& x, const Points& y,
                 const Matrix* pairing = nullptr);

/// Second derivatives with respect to y. Pairwise families fill only the
/// diagonal blocks; distortion also fills `cross` for pairs with Z_ij != 0.
HessianBlocks cost_hessian_blocks(const CostModel& model, const Points& x, const Points& y,
                                  const Matrix* pairing = nullptr);

/// Keeps y inside the coordinate chart of the cost (latitudes clamped to
/// [-pi/2, pi/2] for the sphere). A no-op for Euclidean families.
void project_to_domain(const CostModel& model, Points& y);

/// Great-circle distance between (longitude, latitude) points on the unit sphere.
double great_circle_distance(double lon_a, double lat_a, double lon_b, double lat_b);

}  // namespace baryflow
