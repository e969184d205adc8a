#include <doctest.h>

#include <cmath>
#include <random>

#include "conehyp/hyperbolicity.hpp"

using namespace conehyp;

namespace {

// single affine hyperbolic branch on the unit square with near-ray cones
PiecewiseMap constant_map(const Rational& lu, const Rational& ls, double aperture = 1e-6) {
  PiecewiseMap m;
  m.name = "constant";
  m.dims = {2, 1, 1};
  m.carrier.polygon = ConvexPolygon::box(0, 0, 1, 1);
  AffineBranch a;
  a.domain = PolyRegion::one(m.carrier.polygon);
  a.map = {{lu, 0, 0, ls}, {0, 0}};
  m.branches = {Branch{a}};
  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, aperture);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, aperture);
  m.cone_domains = {cd};
  m.rebuild_boundary_pieces();
  return m;
}

HyperbolicityReport synthetic_report(double u_min, double u_max, double s_max) {
  HyperbolicityReport rep;
  rep.n = 1;
  ItineraryCylinder cyl;
  cyl.word = {0};
  CylinderCoeffs c;
  c.u_min = {u_min, u_min};
  c.u_max = {u_max, u_max};
  c.s_min = {s_max, s_max};
  c.s_max = {s_max, s_max};
  c.det_abs = {u_min * s_max, u_min * s_max};
  c.weight_abs = {1, 1};
  cyl.coeffs = c;
  rep.cylinders = {cyl};
  return rep;
}

}  // namespace

TEST_CASE("constant-map coefficients equal the matrix factors") {
  PiecewiseMap m = constant_map(2, Rational(1, 2));
  HyperbolicityReport rep = coefficients(m, 1);
  REQUIRE(rep.cylinders.size() == 1);
  const auto& c = *rep.cylinders[0].coeffs;
  CHECK(c.u_min.lo == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(c.u_max.hi == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(c.s_max.hi == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rep.lambda > 1.9);
}

TEST_CASE("depth-5 coefficients are exact fifth powers of the step values") {
  PiecewiseMap m = constant_map(2, Rational(1, 2));
  HyperbolicityReport r1 = coefficients(m, 1);
  HyperbolicityReport r5 = coefficients(m, 5);
  const auto& c1 = *r1.cylinders[0].coeffs;
  const auto& c5 = *r5.cylinders[0].coeffs;
  CHECK(c5.u_min.lo == doctest::Approx(std::pow(c1.u_min.lo, 5)).epsilon(1e-12));
  CHECK(c5.s_max.hi == doctest::Approx(std::pow(c1.s_max.hi, 5)).epsilon(1e-12));
  CHECK(c5.u_min.lo == doctest::Approx(32.0).epsilon(1e-9));
}

TEST_CASE("bunching closed form for the diagonal fixture") {
  PiecewiseMap m = constant_map(2, Rational(1, 2));
  HyperbolicityReport rep = coefficients(m, 1);
  BunchingCertificate pass = check_bunching(rep, 1.0, 0.25);
  CHECK(pass.sup_value.hi == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-9));
  CHECK(pass.passed);
  BunchingCertificate fail = check_bunching(rep, 1.0, 0.6);
  CHECK(fail.sup_value.hi == doctest::Approx(std::pow(2.0, 0.2)).epsilon(1e-9));
  CHECK(!fail.passed);
}

TEST_CASE("bunching sup is monotone in beta") {
  PiecewiseMap m = constant_map(3, Rational(2, 5));
  HyperbolicityReport rep = coefficients(m, 1);
  double prev = 0;
  for (double beta = 0.05; beta < 1.0; beta += 0.05) {
    double v = check_bunching(rep, 1.0, beta).sup_value.hi;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("find_beta returns the grid value just below the threshold") {
  PiecewiseMap m = constant_map(2, Rational(1, 2));
  HyperbolicityReport rep = coefficients(m, 1);
  auto beta = find_beta(rep, 1.0);
  REQUIRE(beta.has_value());
  CHECK(*beta == doctest::Approx(0.498046875).epsilon(1e-12));
}

TEST_CASE("the threshold is invariant across the determinant-one family") {
  double expected = 0.498046875;
  const std::vector<Rational> lus = {Rational(3, 2), Rational(2), Rational(3), Rational(4)};
  for (const Rational& lu : lus) {
    PiecewiseMap m = constant_map(lu, 1 / lu);
    HyperbolicityReport rep = coefficients(m, 1);
    auto beta = find_beta(rep, 1.0);
    REQUIRE(beta.has_value());
    CHECK(*beta == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("a strongly sheared coefficient profile admits no bunching exponent") {
  // diag(8, 4, 1/2)-style factors: s^{alpha-beta} U^{1+beta} / u >= 1 for all beta
  HyperbolicityReport rep = synthetic_report(4.0, 8.0, 0.5);
  auto beta = find_beta(rep, 1.0);
  CHECK(!beta.has_value());
}

TEST_CASE("coefficients compose multiplicatively for constant maps") {
  PiecewiseMap m = constant_map(Rational(5, 2), Rational(3, 10));
  HyperbolicityReport r2 = coefficients(m, 2);
  HyperbolicityReport r3 = coefficients(m, 3);
  HyperbolicityReport r5 = coefficients(m, 5);
  const auto& c2 = *r2.cylinders[0].coeffs;
  const auto& c3 = *r3.cylinders[0].coeffs;
  const auto& c5 = *r5.cylinders[0].coeffs;
  CHECK(c5.u_min.lo == doctest::Approx(c2.u_min.lo * c3.u_min.lo).epsilon(1e-12));
  CHECK(c5.s_max.hi == doctest::Approx(c2.s_max.hi * c3.s_max.hi).epsilon(1e-12));
}

TEST_CASE("cylinder enclosures contain sampled-orbit coefficients of the lozi map") {
  PiecewiseMap lozi = builtin_lozi(Rational(17, 10), Rational(1, 2), lozi_default_domain());
  const int n = 3;
  HyperbolicityReport rep = coefficients(lozi, n);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int tested = 0;
  for (const auto& cyl : rep.cylinders) {
    // exact word-matrix cone expansion at any point of the cylinder
    Eigen::Matrix2d mw = Eigen::Matrix2d::Identity();
    for (int k : cyl.word) mw = lozi.branches[static_cast<std::size_t>(k)].affine().jac() * mw;
    // cone-restricted range on the source cone of the first symbol
    const GraphCone& cu = lozi.cone_domains[static_cast<std::size_t>(cyl.word[0])].unstable;
    double lo, hi;
    expansion_range(mw, cu, lo, hi);
    const auto& c = *cyl.coeffs;
    CHECK(lo >= c.u_min.lo - 1e-9);
    CHECK(hi <= c.u_max.hi + 1e-9);
    ++tested;
    (void)u01;
  }
  CHECK(tested >= 4);
}

TEST_CASE("chain rule: composed enclosures contain split products") {
  PiecewiseMap baker = builtin_baker();
  HyperbolicityReport r1 = coefficients(baker, 1);
  HyperbolicityReport r2 = coefficients(baker, 2);
  HyperbolicityReport r3 = coefficients(baker, 3);
  auto find = [](const HyperbolicityReport& r, const std::vector<int>& w) {
    for (const auto& c : r.cylinders)
      if (c.word == w) return *c.coeffs;
    throw std::runtime_error("word not found");
  };
  int checked = 0;
  for (const auto& cyl : r3.cylinders) {
    std::vector<int> w1(cyl.word.begin(), cyl.word.begin() + 1);
    std::vector<int> w2(cyl.word.begin() + 1, cyl.word.end());
    CylinderCoeffs a = find(r1, w1), b = find(r2, w2), c = *cyl.coeffs;
    CHECK(c.u_min.lo <= a.u_min.lo * b.u_min.lo + 1e-12);
    CHECK(c.u_min.hi >= a.u_min.hi * b.u_min.hi - 1e-12);
    CHECK(c.s_max.hi >= a.s_max.hi * b.s_max.hi - 1e-12);
    ++checked;
  }
  CHECK(checked == 8);
}
