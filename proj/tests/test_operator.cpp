#include <doctest.h>

#include <cmath>
#include <random>

#include "conehyp/grid_ops.hpp"
#include "conehyp/ulam.hpp"

using namespace conehyp;

namespace {

GridFunction gaussian_grid(int n) {
  GridBox box{-4.0, -4.0, 8.0, 8.0};
  return GridFunction::from_function(box, n, n, [](double x, double y) {
    return std::complex<double>(std::exp(-(x * x + y * y)), 0.0);
  });
}

PiecewiseMap two_copy_baker() {
  PiecewiseMap m;
  m.name = "two_copy_baker";
  m.dims = {2, 1, 1};
  m.carrier.polygon = ConvexPolygon::box(0, 0, 2, 1);
  auto add = [&](Rational x0, Rational x1, const AffineMapR& map) {
    AffineBranch a;
    a.domain = PolyRegion::one(ConvexPolygon::box(x0, 0, x1, 1));
    a.map = map;
    m.branches.push_back(Branch{a});
  };
  add(0, Rational(1, 2), {{2, 0, 0, Rational(1, 2)}, {0, 0}});
  add(Rational(1, 2), 1, {{2, 0, 0, Rational(1, 2)}, {-1, Rational(1, 2)}});
  add(1, Rational(3, 2), {{2, 0, 0, Rational(1, 2)}, {-1, 0}});
  add(Rational(3, 2), 2, {{2, 0, 0, Rational(1, 2)}, {-2, Rational(1, 2)}});
  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  m.cone_domains = {cd};
  m.rebuild_boundary_pieces();
  return m;
}

// triple baker copies with volume fractions 1/3 and 2/3
PiecewiseMap two_copy_triple_baker() {
  PiecewiseMap m;
  m.name = "two_copy_triple_baker";
  m.dims = {2, 1, 1};
  m.carrier.polygon = ConvexPolygon::box(0, 0, 3, 1);
  auto add = [&](Rational x0, Rational x1, const AffineMapR& map) {
    AffineBranch a;
    a.domain = PolyRegion::one(ConvexPolygon::box(x0, 0, x1, 1));
    a.map = map;
    m.branches.push_back(Branch{a});
  };
  for (int i = 0; i < 3; ++i)
    add(Rational(i, 3), Rational(i + 1, 3),
        {{3, 0, 0, Rational(1, 3)}, {-i, Rational(i, 3)}});
  for (int i = 0; i < 3; ++i)
    add(1 + Rational(2 * i, 3), 1 + Rational(2 * (i + 1), 3),
        {{3, 0, 0, Rational(1, 3)}, {-2 - 2 * i, Rational(i, 3)}});
  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  m.cone_domains = {cd};
  m.rebuild_boundary_pieces();
  return m;
}

}  // namespace

TEST_CASE("zero-order multiplier reproduces the Lp norm") {
  GridFunction g = gaussian_grid(64);
  for (double p : {1.5, 2.0, 3.0})
    CHECK(anisotropic_norm(g, 0.0, 0.0, p) == doctest::Approx(lp_norm(g, p)).epsilon(1e-12));
}

TEST_CASE("the estimator grows strictly in the isotropic order on a gaussian") {
  GridFunction g = gaussian_grid(128).padded();
  double n0 = anisotropic_norm(g, 0.0, 0.0, 2.0);
  double n1 = anisotropic_norm(g, 0.2, 0.0, 2.0);
  double n2 = anisotropic_norm(g, 0.4, 0.0, 2.0);
  CHECK(n0 < n1);
  CHECK(n1 < n2);
}

TEST_CASE("the multiplier is translation invariant") {
  GridFunction g = gaussian_grid(64);
  GridFunction t = g.translated(9, 17);
  CHECK(anisotropic_norm(g, 0.3, -0.2, 2.0) ==
        doctest::Approx(anisotropic_norm(t, 0.3, -0.2, 2.0)).epsilon(1e-8));
}

TEST_CASE("opposite multipliers cancel") {
  GridFunction g = gaussian_grid(64);
  GridFunction f = apply_multiplier(apply_multiplier(g, 0.3, -0.4), -0.3, 0.4);
  for (double p : {2.0, 3.0})
    CHECK(lp_norm(f, p) == doctest::Approx(lp_norm(g, p)).epsilon(1e-8));
}

TEST_CASE("baker box operator is doubly stochastic with a uniform fixed density") {
  PiecewiseMap baker = builtin_baker();
  UlamOperator op = build_ulam(baker, 16, 16);
  CHECK(op.exact);
  for (double s : op.col_sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> row(static_cast<std::size_t>(op.size()), 0.0);
  for (int k = 0; k < op.size(); ++k)
    for (const auto& [j, w] : op.cols[static_cast<std::size_t>(k)])
      row[static_cast<std::size_t>(j)] += w;
  for (double s : row) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

  InvariantDensityResult inv = invariant_density(op);
  CHECK(inv.leading == doctest::Approx(1.0).epsilon(1e-10));
  REQUIRE(inv.densities.size() == 1);
  double l1 = 0;
  for (double v : inv.densities[0]) l1 += std::abs(v - 1.0) * op.cell_area();
  CHECK(l1 < 1e-10);
}

TEST_CASE("identity map discretizes to the identity matrix") {
  PiecewiseMap id;
  id.dims = {2, 1, 1};
  id.carrier.polygon = ConvexPolygon::box(0, 0, 1, 1);
  AffineBranch a;
  a.domain = PolyRegion::one(id.carrier.polygon);
  a.map = {{1, 0, 0, 1}, {0, 0}};
  id.branches = {Branch{a}};
  ConeDomain cd;
  cd.region = PolyRegion::one(id.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  id.cone_domains = {cd};
  UlamOperator op = build_ulam(id, 8, 8);
  for (int k = 0; k < op.size(); ++k) {
    REQUIRE(op.cols[static_cast<std::size_t>(k)].size() == 1);
    CHECK(op.cols[static_cast<std::size_t>(k)][0].first == k);
    CHECK(op.cols[static_cast<std::size_t>(k)][0].second == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("monte carlo assembly agrees with exact clipping within sampling error") {
  PiecewiseMap baker = builtin_baker();
  UlamOperator exact = build_ulam(baker, 8, 8);
  UlamOptions mc;
  mc.kind = UlamOptions::Kind::MonteCarlo;
  mc.mc_samples = 640000;
  mc.seed = 4;
  UlamOperator sampled = build_ulam(baker, 8, 8, mc);
  long long per_box = mc.mc_samples / exact.size();
  int total = 0, ok = 0;
  for (int k = 0; k < exact.size(); ++k) {
    for (const auto& [j, w] : exact.cols[static_cast<std::size_t>(k)]) {
      double est = 0;
      for (const auto& [j2, w2] : sampled.cols[static_cast<std::size_t>(k)])
        if (j2 == j) est = w2;
      double se = std::sqrt(w * (1 - w) / per_box) + 1e-9;
      ++total;
      if (std::abs(est - w) <= 4 * se) ++ok;
    }
  }
  CHECK(static_cast<double>(ok) / total >= 0.99);
}

TEST_CASE("two invariant copies produce two ergodic densities with disjoint support") {
  PiecewiseMap m = two_copy_baker();
  UlamOperator op = build_ulam(m, 16, 8);
  InvariantDensityResult inv = invariant_density(op);
  REQUIRE(inv.densities.size() == 2);
  CHECK(inv.leading == doctest::Approx(1.0).epsilon(1e-10));
  for (int k = 0; k < op.size(); ++k) {
    double a = inv.densities[0][static_cast<std::size_t>(k)];
    double b = inv.densities[1][static_cast<std::size_t>(k)];
    CHECK(std::min(a, b) < 1e-9);  // supports do not overlap
  }
}

TEST_CASE("toral automorphism keeps the uniform density") {
  PiecewiseMap cat = builtin_toral({2, 1, 1, 1});
  UlamOperator op = build_ulam(cat, 16, 16);
  for (double s : op.col_sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  InvariantDensityResult inv = invariant_density(op);
  CHECK(inv.leading == doctest::Approx(1.0).epsilon(1e-10));
  double l1 = 0;
  for (double v : inv.densities[0]) l1 += std::abs(v - 1.0) * op.cell_area();
  CHECK(l1 < 1e-10);
}

TEST_CASE("substochastic operators keep their spectrum in the unit disc") {
  PiecewiseMap m;
  m.dims = {2, 1, 1};
  m.carrier.polygon = ConvexPolygon::from_points({{-1, 0}, {0, -1}, {1, 0}, {0, 1}});
  AffineBranch a;
  a.domain = PolyRegion::one(m.carrier.polygon);
  a.map = {{2, 0, 0, Rational(3, 10)}, {0, 0}};
  m.branches = {Branch{a}};
  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  m.cone_domains = {cd};
  UlamOperator op = build_ulam(m, 12, 12);
  for (double s : op.col_sums) CHECK(s <= 1.0 + 1e-10);
  std::vector<double> v(static_cast<std::size_t>(op.size()), 1.0);
  double growth = 0;
  for (int it = 0; it < 60; ++it) {
    std::vector<double> w = op.apply(v);
    double nv = 0, nw = 0;
    for (double x : v) nv += std::abs(x);
    for (double x : w) nw += std::abs(x);
    growth = nw / nv;
    v = std::move(w);
  }
  CHECK(growth <= 1.0 + 1e-10);
}

TEST_CASE("the dual identity residual is small and refines at second order") {
  PiecewiseMap baker = builtin_baker();
  auto u = [](double x, double y) { return 1.0 + 1e-3 * std::cos(1.3 * x + 0.4) * std::cos(2.1 * y); };
  auto v = [](double x, double y) { return 1.0 + 1e-3 * std::sin(1.7 * x) * std::cos(0.9 * y + 0.2); };
  double e64 = adjoint_residual(baker, u, v, 64);
  double e256 = adjoint_residual(baker, u, v, 256);
  CHECK(e256 < e64);
  double order = std::log2(e64 / e256) / 2.0;
  CHECK(order >= 1.8);
}

TEST_CASE("constant observables balance exactly on volume preserving maps") {
  PiecewiseMap baker = builtin_baker();
  auto one = [](double, double) { return 1.0; };
  CHECK(adjoint_residual(baker, one, one, 128) < 1e-12);
}

TEST_CASE("rotation fixture labels every sample into one basin") {
  PiecewiseMap rot;
  rot.dims = {2, 1, 1};
  rot.carrier.polygon = ConvexPolygon::box(0, 0, 1, 1);
  rot.carrier.periodic_x = rot.carrier.periodic_y = true;
  AffineBranch a;
  a.domain = PolyRegion::one(rot.carrier.polygon);
  a.map = {{1, 0, 0, 1}, {Rational(381, 1000), Rational(7, 9)}};
  rot.branches = {Branch{a}};
  ConeDomain cd;
  cd.region = PolyRegion::one(rot.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  rot.cone_domains = {cd};
  UlamOperator op = build_ulam(rot, 8, 8);
  InvariantDensityResult inv = invariant_density(op);
  auto f = [](double x, double y) { return x + 0.3 * y; };
  BasinScanResult scan = birkhoff_basin_scan(rot, f, 10000, 400, 5, op, inv.densities, 0.05);
  CHECK(scan.undecided_fraction == 0.0);
  CHECK(scan.fractions[0] == doctest::Approx(1.0));
}

TEST_CASE("two-copy basin fractions match the volume split") {
  PiecewiseMap m = two_copy_triple_baker();
  UlamOperator op = build_ulam(m, 18, 6);
  InvariantDensityResult inv = invariant_density(op);
  REQUIRE(inv.densities.size() == 2);
  auto f = [](double x, double) { return x; };
  BasinScanResult scan = birkhoff_basin_scan(m, f, 10000, 4000, 11, op, inv.densities, 0.05);
  double left = to_double(Rational(1, 3));
  double small = std::min(scan.fractions[0], scan.fractions[1]);
  double large = std::max(scan.fractions[0], scan.fractions[1]);
  CHECK(small == doctest::Approx(left).epsilon(0.06));
  CHECK(large == doctest::Approx(1.0 - left).epsilon(0.06));
  CHECK(scan.undecided_fraction < 0.02);
}

TEST_CASE("overlapping generalized-mode maps are rejected by the box pipeline") {
  PiecewiseMap m;
  m.dims = {2, 1, 1};
  m.mode = MapMode::Generalized;
  m.carrier.polygon = ConvexPolygon::box(0, 0, 1, 1);
  AffineBranch a;
  a.domain = PolyRegion::one(m.carrier.polygon);
  a.map = {{2, 0, 0, Rational(1, 2)}, {0, 0}};
  m.branches = {Branch{a}, Branch{a}};
  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  m.cone_domains = {cd};
  CHECK_THROWS_AS(build_ulam(m, 8, 8), Error);
}
