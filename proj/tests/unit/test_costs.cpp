#include "doctest.h"

#include "baryflow/costs.hpp"
#include "baryflow/couplings.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace baryflow;

namespace {

constexpr double kPi = std::numbers::pi;

struct Instance {
  Points x, y;
  Matrix Z;
};

// Random instance suited to the family: sphere coordinates stay well inside
// the chart, distortion gets a categorical coupling.
Instance make_instance(const CostModel& m, std::mt19937_64& rng, int n = 10) {
  Instance in;
  if (m.family == CostModel::Family::GeodesicSphere) {
    in.x = oracle::random_points(rng, n, 2, -1.2, 1.2);
    in.y = in.x + oracle::random_points(rng, n, 2, -0.3, 0.3);
  } else {
    in.x = oracle::random_points(rng, n, 2, -2.0, 2.0);
    in.y = in.x + oracle::random_points(rng, n, 2, -1.0, 1.0);
  }
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % 2);
  in.Z = categorical_coupling(labels);
  return in;
}

const Matrix* pairing(const CostModel& m, const Instance& in) {
  return m.requires_pairing() ? &in.Z : nullptr;
}

std::vector<CostModel> all_families() {
  return {CostModel::sq_euclidean(), CostModel::p_norm(1.2), CostModel::p_norm(2.0),
          CostModel::p_norm(3.0), CostModel::geodesic_sphere(), CostModel::geodesic_sphere(false),
          CostModel::distortion(0.01), CostModel::distortion(0.5, 0.2)};
}

}  // namespace

TEST_CASE("cost string parsing") {
  CHECK(CostModel::parse("l2").family == CostModel::Family::SqEuclidean);
  CHECK(CostModel::parse("pnorm:1.5").p == 1.5);
  CHECK(CostModel::parse("geodesic-sphere").family == CostModel::Family::GeodesicSphere);
  const CostModel d = CostModel::parse("distortion:0.25");
  CHECK(d.omega == 0.25);
  CHECK(d.requires_pairing());
  CHECK(CostModel::parse("pnorm:1.2").to_string() == "pnorm:1.2");
  for (const char* bad : {"l3", "", "pnorm:", "pnorm:abc", "pnorm:0.5", "distortion:-1", "distortion:0",
                          "L2", "pnorm:2x"})
    CHECK_THROWS_AS(CostModel::parse(bad), InvalidInput);
}

TEST_CASE("pairwise costs vanish at the identity map") {
  std::mt19937_64 rng(1);
  const Points x = oracle::random_points(rng, 12, 2, -1.0, 1.0);
  for (const CostModel& m : {CostModel::sq_euclidean(), CostModel::p_norm(1.2), CostModel::p_norm(3.0),
                             CostModel::geodesic_sphere()}) {
    CHECK(cost_value(m, x, x) == 0.0);
    CHECK(cost_grad(m, x, x).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("distortion at the identity map is within the documented epsilon bound") {
  std::mt19937_64 rng(2);
  const Points x = oracle::random_points(rng, 8, 2, -2.0, 2.0);
  const Matrix Z = categorical_coupling({0, 0, 0, 0, 1, 1, 1, 1});
  const CostModel m = CostModel::distortion(0.01, 0.01);
  double min_d2 = 1e300;
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) min_d2 = std::min(min_d2, (x.row(i) - x.row(j)).squaredNorm());
  const double v = cost_value(m, x, x, &Z);
  CHECK(v >= 0.0);
  CHECK(v <= 2.0 * m.eps_dist * m.eps_dist / min_d2);
}

TEST_CASE("squared Euclidean closed forms") {
  Points x(1, 2), y(1, 2);
  x << 0, 0;
  y << 3, 4;
  const CostModel m = CostModel::sq_euclidean();
  CHECK(cost_value(m, x, y) == 12.5);

  std::mt19937_64 rng(3);
  const Points a = oracle::random_points(rng, 7, 3), b = oracle::random_points(rng, 7, 3);
  CHECK((cost_grad(m, a, b) - (b - a) / 7.0).cwiseAbs().maxCoeff() <= 1e-16);
  const HessianBlocks h = cost_hessian_blocks(m, a, b);
  CHECK_FALSE(h.has_cross());
  for (const Matrix& blk : h.diag) CHECK((blk - Matrix::Identity(3, 3) / 7.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("p-norm matches a direct summation oracle and its p=2 limit") {
  std::mt19937_64 rng(4);
  const CostModel m = CostModel::p_norm(1.2);
  const Points x = oracle::random_points(rng, 50, 1, -3, 3), y = oracle::random_points(rng, 50, 1, -3, 3);
  double want = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double t = x(i, 0) - y(i, 0);
    const double s = std::sqrt(t * t + 0.01) - std::sqrt(0.01);
    want += std::pow(s, 1.2);
  }
  want /= 50.0;
  CHECK(std::abs(cost_value(m, x, y) - want) <= 1e-12 * std::max(1.0, want));

  // eps -> 0 with p = 2: blocks approach 2 I / N.
  const CostModel sharp = CostModel::p_norm(2.0, 1e-14);
  const Points a = oracle::random_points(rng, 5, 2), b = a + oracle::random_points(rng, 5, 2, 0.5, 1.0);
  const HessianBlocks h = cost_hessian_blocks(sharp, a, b);
  for (const Matrix& blk : h.diag) CHECK((blk - 2.0 * Matrix::Identity(2, 2) / 5.0).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("geodesic cost: haversine oracle, antipodes, symmetry and latitude range") {
  Points x(1, 2), y(1, 2);
  x << 0.0, 0.0;
  y << kPi, 0.0;
  const CostModel sq = CostModel::geodesic_sphere();
  CHECK(cost_value(sq, x, y) == doctest::Approx(kPi * kPi).epsilon(1e-15));
  CHECK(great_circle_distance(0, 0, kPi, 0) == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(cost_grad(sq, x, y).allFinite());
  CHECK(cost_grad(sq, x, y).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lon(0, 2 * kPi), lat(-kPi / 2, kPi / 2);
  for (int t = 0; t < 200; ++t) {
    const double a1 = lon(rng), b1 = lat(rng), a2 = lon(rng), b2 = lat(rng);
    const double want = oracle::haversine(a1, b1, a2, b2);
    CHECK(great_circle_distance(a1, b1, a2, b2) == doctest::Approx(want).epsilon(1e-12));
    CHECK(great_circle_distance(a1, b1, a2, b2) == great_circle_distance(a2, b2, a1, b1));
  }
  const Points p = oracle::random_points(rng, 20, 2, -1.5, 1.5), q = oracle::random_points(rng, 20, 2, -1.5, 1.5);
  CHECK(cost_value(sq, p, q) == doctest::Approx(cost_value(sq, q, p)).epsilon(1e-14));

  Points outside = p;
  outside(3, 1) = 2.0;
  CHECK_THROWS_AS(cost_value(sq, outside, q), InvalidInput);
  Points wide(2, 3);
  wide.setZero();
  CHECK_THROWS_AS(cost_value(sq, wide, wide), InvalidInput);
}

TEST_CASE("latitude projection keeps points in the chart") {
  Points y(3, 2);
  y << 0.0, 2.0, 1.0, -3.0, 7.0, 0.3;
  project_to_domain(CostModel::geodesic_sphere(), y);
  CHECK(y(0, 1) == kPi / 2);
  CHECK(y(1, 1) == -kPi / 2);
  CHECK(y(2, 1) == 0.3);
  CHECK(y(2, 0) == 7.0);
  Points e = y;
  project_to_domain(CostModel::sq_euclidean(), e);
  CHECK(e == y);
}

TEST_CASE("pairing must be given exactly for the distortion cost") {
  std::mt19937_64 rng(6);
  const Points x = oracle::random_points(rng, 4, 2);
  const Matrix Z = categorical_coupling({0, 0, 1, 1});
  CHECK_THROWS_AS(cost_value(CostModel::distortion(), x, x), InvalidInput);
  CHECK_THROWS_AS(cost_value(CostModel::sq_euclidean(), x, x, &Z), InvalidInput);
  const Matrix wrong = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(cost_grad(CostModel::distortion(), x, x, &wrong), InvalidInput);
}

TEST_CASE("distortion value matches a per-class double loop") {
  std::mt19937_64 rng(7);
  const CostModel m = CostModel::distortion(0.3, 0.05);
  Instance in = make_instance(m, rng, 9);
  const int n = 9;
  // Labels are i % 2: the ratio term is the class-weighted mean over ordered
  // same-class pairs, (n_k / N) (1 / n_k^2) sum_{i != j in k}.
  double want = 0.0;
  for (int k = 0; k < 2; ++k) {
    double s = 0.0;
    int nk = 0;
    for (int i = 0; i < n; ++i) {
      if (i % 2 != k) continue;
      ++nk;
      for (int j = 0; j < n; ++j) {
        if (i == j || j % 2 != k) continue;
        const double r = (in.y.row(i) - in.y.row(j)).squaredNorm() /
                         ((in.x.row(i) - in.x.row(j)).squaredNorm() + 0.05 * 0.05);
        s += (r - 1.0) * (r - 1.0);
      }
    }
    want += (static_cast<double>(nk) / n) * s / (static_cast<double>(nk) * nk);
  }
  double anchor = 0.0;
  for (int i = 0; i < n; ++i) anchor += (in.y.row(i) - in.x.row(i)).squaredNorm();
  want += 0.3 * anchor / n;
  CHECK(cost_value(m, in.x, in.y, &in.Z) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("distortion ratio term is translation invariant") {
  std::mt19937_64 rng(8);
  const CostModel m = CostModel::distortion(0.01);
  Instance in = make_instance(m, rng, 8);
  Points x2 = in.x, y2 = in.y;
  x2.rowwise() += Eigen::RowVector2d(3.0, -1.0);
  y2.rowwise() += Eigen::RowVector2d(3.0, -1.0);
  CHECK(cost_value(m, x2, y2, &in.Z) == doctest::Approx(cost_value(m, in.x, in.y, &in.Z)).epsilon(1e-12));
  // Moving only y changes the anchor term by exactly omega * |shift|^2.
  Points y3 = in.y;
  y3.rowwise() += Eigen::RowVector2d(0.5, 0.0);
  Points y0 = in.y;
  const double shift_anchor = m.omega / 8.0 *
                              ((y3 - in.x).rowwise().squaredNorm().sum() - (y0 - in.x).rowwise().squaredNorm().sum());
  CHECK(cost_value(m, in.x, y3, &in.Z) - cost_value(m, in.x, in.y, &in.Z) ==
        doctest::Approx(shift_anchor).epsilon(1e-10));
}

TEST_CASE("cost gradients and Hessians match finite differences for every family") {
  std::mt19937_64 rng(9);
  for (const CostModel& m : all_families()) {
    CAPTURE(m.to_string());
    for (int trial = 0; trial < 3; ++trial) {
      const Instance in = make_instance(m, rng, trial == 0 ? 3 : 10);
      const Matrix* Z = pairing(m, in);
      const Points g = cost_grad(m, in.x, in.y, Z);
      const Points gfd = oracle::fd_gradient([&](const Points& y) { return cost_value(m, in.x, y, Z); }, in.y);
      CHECK(oracle::rel_err(g, gfd) <= 1e-5);

      const Matrix H = cost_hessian_blocks(m, in.x, in.y, Z).assemble();
      const Matrix Hfd = oracle::fd_jacobian([&](const Points& y) { return cost_grad(m, in.x, y, Z); }, in.y);
      CHECK(oracle::rel_err(H, Hfd) <= 1e-4);
      CHECK(cost_value(m, in.x, in.y, Z) >= 0.0);
    }
  }
}

TEST_CASE("pairwise families have no cross blocks; distortion does") {
  std::mt19937_64 rng(10);
  for (const CostModel& m : all_families()) {
    const Instance in = make_instance(m, rng, 6);
    const HessianBlocks h = cost_hessian_blocks(m, in.x, in.y, pairing(m, in));
    CHECK(h.diag.size() == 6);
    CHECK(h.has_cross() == m.requires_pairing());
  }
}
