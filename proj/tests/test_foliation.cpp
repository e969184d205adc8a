#include <doctest.h>

#include <cmath>
#include <random>

#include "conehyp/foliation.hpp"

using namespace conehyp;

namespace {

FoliationClassParams desk_params(double beta = 0.05, const Vec2& base = Vec2::Zero()) {
  FoliationClassParams p;
  p.C0 = 4.0;
  p.C1 = 64.0;
  p.alpha = 1.0;
  p.beta = beta;
  p.base = base;
  p.cone = GraphCone::axis2d(ConeKind::Stable, 0.5);
  return p;
}

FoliationChart affine_chart(double slope, const Vec2& base = Vec2::Zero(), double beta = 0.05) {
  FoliationClassParams p = desk_params(beta, base);
  double ym = base.y();
  return FoliationChart::from_function(
      p, p.C0 / 128,
      [slope, ym](double x, double y) { return x + slope * (y - ym); },
      [slope](double, double) { return Vec2(1.0, slope); });
}

FoliationChart perturbed_chart(double slope, double delta, unsigned seed,
                               const Vec2& base = Vec2::Zero(), double beta = 0.05) {
  FoliationClassParams p = desk_params(beta, base);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.8);
  double w1 = u(rng), w2 = u(rng), ph = u(rng);
  double ym = base.y();
  auto f = [=](double x, double y) {
    return x + slope * (y - ym) + delta * std::sin(w1 * x + ph) * std::sin(w2 * (y - ym));
  };
  auto df = [=](double x, double y) {
    return Vec2(1.0 + delta * w1 * std::cos(w1 * x + ph) * std::sin(w2 * (y - ym)),
                slope + delta * w2 * std::sin(w1 * x + ph) * std::cos(w2 * (y - ym)));
  };
  return FoliationChart::from_function(p, p.C0 / 128, f, df);
}

Mat2 strong_matrix(double lu, double th1 = 0.0, double th2 = 0.0) {
  Mat2 r1, r2, d;
  r1 << std::cos(th1), -std::sin(th1), std::sin(th1), std::cos(th1);
  r2 << std::cos(th2), -std::sin(th2), std::sin(th2), std::cos(th2);
  d << lu, 0, 0, 1.0 / lu;
  return r1 * d * r2;
}

ExtendedCone wide_cones() { return ExtendedCone::axis2d(0.5, 0.2); }

}  // namespace

TEST_CASE("affine charts are admissible with zero quotients") {
  FoliationChart c = affine_chart(0.3);
  FoliationCertificate cert = certify_foliation(c);
  CHECK(cert.passed);
  CHECK(cert.worst_y.value < 1e-9);
  CHECK(cert.worst_x.value < 1e-9);
  CHECK(cert.worst_mixed.value < 1e-9);
  CHECK(cert.worst_base_line < 1e-12);
  CHECK(cert.partial_x_dev < 1e-12);
}

TEST_CASE("a kink in the leaf derivative fails the y-quotient") {
  FoliationClassParams p = desk_params();
  FoliationChart c = FoliationChart::from_function(
      p, p.C0 / 128, [](double x, double y) { return x + 0.05 * std::abs(y) * y; },
      [](double, double y) { return Vec2(1.0, 0.1 * std::abs(y)); });
  FoliationCertificate cert = certify_foliation(c);
  CHECK(!cert.passed);
  CHECK(cert.failure == "y-quotient");
  CHECK(cert.worst_y.value > 1.0);
}

TEST_CASE("sampled quotients agree with the exhaustive oracle on a coarse grid") {
  FoliationClassParams p = desk_params();
  auto chart = [&](double delta) {
    return FoliationChart::from_function(
        p, p.C0 / 32,
        [delta](double x, double y) { return x + 0.05 * y + delta * std::sin(x) * std::sin(y); },
        [delta](double x, double y) {
          return Vec2(1.0 + delta * std::cos(x) * std::sin(y),
                      0.05 + delta * std::sin(x) * std::cos(y));
        });
  };
  CertifyFoliationOptions exhaustive;
  exhaustive.exhaustive = true;
  // small perturbation passes, large fails; both verdicts match the oracle
  FoliationChart small = chart(1e-4), big = chart(0.2);
  FoliationCertificate s1 = certify_foliation(small), s2 = certify_foliation(small, exhaustive);
  CHECK(s1.passed == s2.passed);
  CHECK(s1.passed);
  FoliationCertificate b1 = certify_foliation(big), b2 = certify_foliation(big, exhaustive);
  CHECK(b1.passed == b2.passed);
  CHECK(!b1.passed);
  CHECK(s1.worst_y.value <= s2.worst_y.value + 1e-12);
}

TEST_CASE("coarse grids are rejected") {
  FoliationClassParams p = desk_params();
  FoliationChart c = FoliationChart::from_function(
      p, p.C0 / 8, [](double x, double) { return x; },
      [](double, double) { return Vec2(1.0, 0.0); });
  CHECK_THROWS_AS(certify_foliation(c), GridTooCoarse);
}

TEST_CASE("straighten by the identity is the identity") {
  FoliationChart c = affine_chart(0.2);
  StraightenResult r = straighten(c, PlanarMap::affine(Mat2::Identity(), Vec2::Zero()));
  for (int i = 0; i < r.chart.nx; i += 8)
    for (int j = 0; j < r.chart.ny; j += 8) {
      double x = r.chart.x0() + i * r.chart.h;
      double y = r.chart.y0() + j * r.chart.h;
      CHECK(r.chart.F[r.chart.idx(i, j)] == doctest::Approx(c.eval_F(x, y)).epsilon(1e-11));
    }
  Vec2 z(0.3, -0.7);
  CHECK((r.psi.f(z) - z).norm() < 1e-11);
}

TEST_CASE("the vertical foliation is fixed by shears up to reparametrization") {
  FoliationChart c = affine_chart(0.0);
  StraightenResult r = straighten(c, PlanarMap::shear_q(0.4));
  for (int i = 0; i < r.chart.nx; i += 4)
    for (int j = 0; j < r.chart.ny; j += 4) {
      double x = r.chart.x0() + i * r.chart.h;
      CHECK(r.chart.F[r.chart.idx(i, j)] == doctest::Approx(x).epsilon(1e-11));
    }
}

TEST_CASE("affine charts stay affine under affine straightening") {
  FoliationChart c = affine_chart(0.25);
  StraightenResult r = straighten(c, PlanarMap::shear_q(0.3));
  // second differences vanish for affine output
  const auto& o = r.chart;
  for (int i = 1; i + 1 < o.nx; i += 8)
    for (int j = 1; j + 1 < o.ny; j += 8) {
      double ddx = o.F[o.idx(i + 1, j)] - 2 * o.F[o.idx(i, j)] + o.F[o.idx(i - 1, j)];
      double ddy = o.F[o.idx(i, j + 1)] - 2 * o.F[o.idx(i, j)] + o.F[o.idx(i, j - 1)];
      CHECK(std::abs(ddx) < 1e-11);
      CHECK(std::abs(ddy) < 1e-11);
    }
  FoliationCertificate cert = certify_foliation(r.chart);
  CHECK(cert.worst_y.value < 1e-9);
}

TEST_CASE("monotonicity loss is detected and signalled") {
  FoliationClassParams p = desk_params();
  p.cone = GraphCone::axis2d(ConeKind::Stable, 0.9);
  FoliationChart c = FoliationChart::from_function(
      p, p.C0 / 64, [](double x, double y) { return x + 0.8 * y; },
      [](double, double) { return Vec2(1.0, 0.8); });
  CHECK_THROWS_AS(straighten(c, PlanarMap::shear_q(1.25)), MonotonicityLost);
}

TEST_CASE("graph transform fixes the vertical foliation of a diagonal map") {
  FoliationChart vertical = affine_chart(0.0);
  HyperbolicBranch2 br = HyperbolicBranch2::from_affine(strong_matrix(2.0), Vec2::Zero());
  GraphTransformDecomposition dec =
      graph_transform({vertical}, br, Vec2::Zero(), wide_cones(), wide_cones(), vertical.params);
  CHECK(dec.A == doctest::Approx(2.0));
  CHECK(dec.B == doctest::Approx(0.5));
  // the output is the vertical foliation, node for node
  double worst = 0;
  for (int i = 0; i < dec.output.nx; ++i)
    for (int j = 0; j < dec.output.ny; ++j) {
      double x = dec.output.x0() + i * dec.output.h;
      worst = std::max(worst, std::abs(dec.output.F[dec.output.idx(i, j)] - x));
    }
  CHECK(worst < 1e-10);
  // identity reparametrizations
  Vec2 z(0.4, 0.9);
  CHECK((dec.psi.f(z) - z).norm() < 1e-12);
  CHECK((dec.psi_m[0].f(z) - z).norm() < 1e-11);
  CHECK(dec.factorization_residual(0) < 1e-10);
  CHECK(certify_foliation(dec.output).passed);
}

TEST_CASE("affine inputs pull back to the exact leaf-direction image") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uth(-0.2, 0.2), ue(-0.01, 0.01), ul(1400.0, 2600.0);
  for (int trial = 0; trial < 6; ++trial) {
    double e = ue(rng);
    Mat2 m = strong_matrix(ul(rng), uth(rng) * 0.02, uth(rng) * 0.02);
    FoliationChart input = affine_chart(e);
    HyperbolicBranch2 br = HyperbolicBranch2::from_affine(m, Vec2::Zero());
    GraphTransformDecomposition dec =
        graph_transform({input}, br, Vec2::Zero(), wide_cones(), wide_cones(), input.params);
    Vec2 dir = m.inverse() * Vec2(e, 1.0);
    double eprime = dir.x() / dir.y();
    // nodes inside the pullback of the inner bump zone
    double worst = 0;
    int used = 0;
    for (int i = 0; i < dec.output.nx; ++i)
      for (int j = 0; j < dec.output.ny; ++j) {
        double x = dec.output.x0() + i * dec.output.h;
        double y = dec.output.y0() + j * dec.output.h;
        Vec2 im = dec.D * Vec2(x, y);
        if (im.norm() > 0.45 * std::sqrt(input.params.C0)) continue;
        ++used;
        worst = std::max(worst,
                         std::abs(dec.output.F[dec.output.idx(i, j)] - (x + eprime * y)));
      }
    CHECK(used > 0);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("perturbed admissible inputs keep the reinforced constants") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ue(-0.008, 0.008), ul(1800.0, 2600.0);
  for (int trial = 0; trial < 3; ++trial) {
    FoliationChart input = perturbed_chart(ue(rng), 1e-5, 100 + trial);
    FoliationCertificate in_cert = certify_foliation(input);
    REQUIRE(in_cert.passed);
    Mat2 m = strong_matrix(ul(rng));
    HyperbolicBranch2 br = HyperbolicBranch2::from_affine(m, Vec2::Zero());
    GraphTransformDecomposition dec =
        graph_transform({input}, br, Vec2::Zero(), wide_cones(), wide_cones(), input.params);
    FoliationCertificate out = certify_foliation(dec.output);
    CHECK(out.passed);
    const double C0 = input.params.C0;
    CHECK(out.worst_y.value <= 1.1 * 0.5);              // admissible bound halved
    CHECK(out.worst_mixed.value <= 1.1 / (4 * C0 * C0));
  }
}

TEST_CASE("multi-point gluing: local pullbacks, vertical far field, separation") {
  Mat2 m = strong_matrix(2048.0);
  HyperbolicBranch2 br = HyperbolicBranch2::from_affine(m, Vec2::Zero());
  FoliationChart c1 = affine_chart(0.004, Vec2(0.0, 0.0));
  FoliationChart c2 = affine_chart(-0.006, Vec2(9.0, 0.0));
  GraphTransformDecomposition dec =
      graph_transform({c1, c2}, br, Vec2::Zero(), wide_cones(), wide_cones(), c1.params);
  REQUIRE(dec.kept_charts.size() == 2);
  CHECK((dec.projected_bases[0] - dec.projected_bases[1]).norm() >= c1.params.C0);
  for (double t : {-0.4, 0.0, 0.3}) {
    // inside the first bump: glued field equals the straightened first chart
    Vec2 z0(dec.projected_bases[0].x() + t * 0.5, 0.3);
    CHECK(dec.F2(z0) == doctest::Approx(dec.phi1[0].eval_F(z0.x(), z0.y())).epsilon(1e-12));
    // inside the second bump
    Vec2 z1(dec.projected_bases[1].x() + t * 0.5, -0.2);
    CHECK(dec.F2(z1) == doctest::Approx(dec.phi1[1].eval_F(z1.x(), z1.y())).epsilon(1e-12));
    // far from both: the vertical foliation
    Vec2 zfar(dec.projected_bases[1].x() + 6.0, t);
    CHECK(dec.F2(zfar) == doctest::Approx(zfar.x()).epsilon(1e-14));
  }
  for (double v : dec.piqm) CHECK(v < 2.0);
}

TEST_CASE("leaf-map certificates stay uniformly bounded over a fixture family") {
  double worst = 0;
  for (double e : {-0.008, -0.002, 0.004, 0.009}) {
    FoliationChart input = affine_chart(e);
    HyperbolicBranch2 br = HyperbolicBranch2::from_affine(strong_matrix(2048.0), Vec2::Zero());
    GraphTransformDecomposition dec =
        graph_transform({input}, br, Vec2::Zero(), wide_cones(), wide_cones(), input.params);
    worst = std::max({worst, dec.psi_m_cert[0].sup_df, dec.psi_m_cert[0].sup_df_inv,
                      dec.psi_m_cert[0].y_holder});
  }
  CHECK(worst < 8.0);
}

TEST_CASE("weak hyperbolicity with a curved input fails a pushforward gate") {
  FoliationChart input = perturbed_chart(0.05, 2e-3, 7);
  HyperbolicBranch2 br = HyperbolicBranch2::from_affine(strong_matrix(2.0), Vec2::Zero());
  CHECK_THROWS_AS(graph_transform({input}, br, Vec2::Zero(), wide_cones(), wide_cones(),
                                  input.params),
                  PreconditionFailed);
}

TEST_CASE("nonlinear branches run the final straightening step") {
  // T = M ∘ S with S(x, y) = (x, y + eps sin x): closed-form inverse
  const double eps = 5e-4;
  Mat2 m = strong_matrix(2048.0);
  HyperbolicBranch2 br;
  br.affine = false;
  br.map.f = [m, eps](const Vec2& z) {
    return Vec2(m * Vec2(z.x(), z.y() + eps * std::sin(z.x())));
  };
  br.map.df = [m, eps](const Vec2& z) {
    Mat2 ds;
    ds << 1, 0, eps * std::cos(z.x()), 1;
    return Mat2(m * ds);
  };
  br.inverse.f = [m, eps](const Vec2& w) {
    Vec2 z = m.inverse() * w;
    return Vec2(z.x(), z.y() - eps * std::sin(z.x()));
  };
  br.inverse.df = [m, eps](const Vec2& w) {
    Vec2 z = m.inverse() * w;
    Mat2 dsi;
    dsi << 1, 0, -eps * std::cos(z.x()), 1;
    return Mat2(dsi * m.inverse());
  };

  FoliationChart input = affine_chart(0.003);
  GraphTransformDecomposition dec =
      graph_transform({input}, br, Vec2::Zero(), wide_cones(), wide_cones(), input.params);
  FoliationCertificate cert = certify_foliation(dec.output);
  CHECK(cert.passed);
  // the last straightening is not the identity here
  Vec2 z(1.0, 0.5);
  CHECK((dec.psi.f(z) - z).norm() > 1e-7);
  CHECK(dec.factorization_residual(0, 100) < 1e-6);
}
