#include <doctest.h>

#include <cmath>
#include <random>

#include "conehyp/map_classes.hpp"

using namespace conehyp;

namespace {

struct TrigField {
  double c0, a1, w1, v1, p1, a2, w2, v2, p2;
  Eigen::MatrixXd operator()(double x, double y) const {
    Eigen::MatrixXd m(2, 2);
    double s1 = a1 * std::cos(w1 * x + p1) * std::cos(v1 * y);
    double s2 = a2 * std::sin(w2 * x) * std::cos(v2 * y + p2);
    m << c0 + s1, s2, -s2, c0 + 0.5 * s1;
    return m;
  }
};

TrigField random_field(std::mt19937_64& rng, double base, double amp) {
  std::uniform_real_distribution<double> uw(0.4, 2.2), up(0.0, 6.28), ua(0.2, 1.0);
  return TrigField{base, amp * ua(rng), uw(rng), uw(rng), up(rng),
                   amp * ua(rng), uw(rng), uw(rng), up(rng)};
}

}  // namespace

TEST_CASE("scaled identity maps sit exactly in their bi-Lipschitz class") {
  std::vector<Eigen::Vector2d> pts;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) pts.push_back({0.5 * i, 0.5 * j});
  auto f = [](const Eigen::Vector2d& z) { return Eigen::Vector2d(2 * z); };
  DClassResult r = dclass_check(f, pts, 2.0);
  CHECK(r.pass);
  CHECK(r.upper == doctest::Approx(2.0));
  CHECK(r.lower == doctest::Approx(2.0));
  CHECK(!dclass_check(f, pts, 1.5).pass);
}

TEST_CASE("class-norm algebra bounds hold on sampled trig fields") {
  std::mt19937_64 rng(3);
  const double alpha = 0.8, beta = 0.35;
  auto xs = linspace(-2.0, 2.0, 41);
  auto ys = linspace(-2.0, 2.0, 41);
  KNormOptions opt;
  opt.pair_samples = 10000;
  for (int trial = 0; trial < 12; ++trial) {
    TrigField ka = random_field(rng, 0.8, 0.6);
    TrigField kb = random_field(rng, 0.6, 0.5);
    double na = kclass_norm(ka, xs, ys, alpha, beta, opt).norm();
    double nb = kclass_norm(kb, xs, ys, alpha, beta, opt).norm();

    MatField sum = [&](double x, double y) { return Eigen::MatrixXd(ka(x, y) + kb(x, y)); };
    MatField prod = [&](double x, double y) { return Eigen::MatrixXd(ka(x, y) * kb(x, y)); };
    double ns = kclass_norm(sum, xs, ys, alpha, beta, opt).norm();
    double np = kclass_norm(prod, xs, ys, alpha, beta, opt).norm();
    CHECK(ns <= na + nb + 1e-9);
    CHECK(np <= 6.0 * na * nb + 1e-9);

    // derived y-quotient with the relaxed exponent
    double q2 = kclass_y2_quotient(ka, xs, ys, alpha, beta, opt);
    CHECK(q2 <= 2.0 * na + 1e-9);
  }
}

TEST_CASE("inverse fields obey the cubic bound") {
  std::mt19937_64 rng(9);
  const double alpha = 0.8, beta = 0.35;
  auto xs = linspace(-2.0, 2.0, 41);
  auto ys = linspace(-2.0, 2.0, 41);
  KNormOptions opt;
  for (int trial = 0; trial < 8; ++trial) {
    TrigField ka = random_field(rng, 1.5, 0.4);  // dominant diagonal: invertible
    double na = kclass_norm(ka, xs, ys, alpha, beta, opt).norm();
    double h = 0;
    for (double x : xs)
      for (double y : ys) {
        Eigen::MatrixXd m = ka(x, y).inverse();
        h = std::max(h, m.norm());
      }
    MatField inv = [&](double x, double y) { return Eigen::MatrixXd(ka(x, y).inverse()); };
    double ni = kclass_norm(inv, xs, ys, alpha, beta, opt).norm();
    CHECK(ni <= 5.0 * std::max(1.0, h * h * h) * std::max(1.0, na * na * na) + 1e-9);
  }
}

TEST_CASE("composition with leaf-preserving maps obeys the Lipschitz bound") {
  std::mt19937_64 rng(15);
  const double alpha = 0.8, beta = 0.35;
  auto xs_small = linspace(-1.5, 1.5, 31);
  auto ys_small = linspace(-1.5, 1.5, 31);
  auto xs_big = linspace(-4.0, 4.0, 81);
  auto ys_big = linspace(-4.0, 4.0, 81);
  KNormOptions opt;
  for (int trial = 0; trial < 8; ++trial) {
    TrigField ka = random_field(rng, 0.9, 0.5);
    // leaf-preserving composition (u(x), v(x, y))
    auto u = [](double x) { return 1.3 * x + 0.2 * std::sin(x); };
    auto v = [](double x, double y) { return y + 0.3 * x + 0.15 * std::sin(x + y); };
    double L = 0;
    for (double x : xs_small)
      for (double y : ys_small) {
        Eigen::Matrix2d d;
        d << 1.3 + 0.2 * std::cos(x), 0, 0.3 + 0.15 * std::cos(x + y),
            1 + 0.15 * std::cos(x + y);
        L = std::max(L, d.jacobiSvd().singularValues()(0));
      }
    double nk = kclass_norm(ka, xs_big, ys_big, alpha, beta, opt).norm();
    MatField comp = [&](double x, double y) { return ka(u(x), v(x, y)); };
    double nc = kclass_norm(comp, xs_small, ys_small, alpha, beta, opt).norm();
    CHECK(nc <= 3.0 * std::max(1.0, L) * nk + 1e-9);
  }
}

TEST_CASE("image hulls contain the shrunken ball") {
  auto f = [](const Eigen::Vector2d& z) {
    Eigen::Matrix2d m;
    m << 1.2, 0.3, -0.1, 0.9;
    return Eigen::Vector2d(m * z + Eigen::Vector2d(0.4, -0.2));
  };
  CHECK(ddbigimage_check(f, {0.1, 0.2}, 1.0, 2.0));
  CHECK(!ddbigimage_check(f, {0.1, 0.2}, 1.0, 0.5));  // too optimistic a constant
}

TEST_CASE("the glued extension matches inside, is the identity outside") {
  auto f = [](const Eigen::Vector2d& z) {
    return Eigen::Vector2d(z + 0.05 * Eigen::Vector2d(std::sin(z.y()), std::cos(z.x()) - 1.0));
  };
  PlaneFn glued = lemextend_glue(f);
  Eigen::Vector2d inside(0.2, -0.3), outside(1.4, 0.9);
  CHECK((glued(inside) - f(inside)).norm() < 1e-14);
  CHECK((glued(outside) - outside).norm() < 1e-14);
  // stays bi-Lipschitz of class D(2)
  std::vector<Eigen::Vector2d> pts;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.3, 1.3);
  for (int i = 0; i < 60; ++i) pts.push_back({u(rng), u(rng)});
  CHECK(dclass_check(glued, pts, 2.0).pass);
  // the extension's displacement is controlled by the original one
  double worst_f = 0, worst_g = 0;
  for (const auto& p : pts) {
    worst_f = std::max(worst_f, (f(p) - p).norm());
    worst_g = std::max(worst_g, (glued(p) - p).norm());
  }
  CHECK(worst_g <= worst_f + 1e-12);
}
