#include "conehyp/foliation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

namespace conehyp {

namespace {

constexpr double kTau = 6.28318530717958647692;

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double smoothstep_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return u * u * (30.0 + u * (-60.0 + 30.0 * u));
}

}  // namespace

FoliationChart FoliationChart::from_function(const FoliationClassParams& p, double h,
                                             const std::function<double(double, double)>& f,
                                             const std::function<Vec2(double, double)>& df) {
  p.validate();
  FoliationChart c;
  c.params = p;
  c.h = h;
  c.nx = static_cast<int>(std::lround(2 * p.C0 / h)) + 1;
  c.ny = c.nx;
  c.F.resize(static_cast<std::size_t>(c.nx) * c.ny);
  c.Fx.resize(c.F.size());
  c.Fy.resize(c.F.size());
  for (int iy = 0; iy < c.ny; ++iy)
    for (int ix = 0; ix < c.nx; ++ix) {
      double x = c.x0() + ix * h;
      double y = c.y0() + iy * h;
      c.F[c.idx(ix, iy)] = f(x, y);
      Vec2 d;
      if (df) {
        d = df(x, y);
      } else {
        const double e = h / 4;
        d.x() = (f(x + e, y) - f(x - e, y)) / (2 * e);
        d.y() = (f(x, y + e) - f(x, y - e)) / (2 * e);
      }
      c.Fx[c.idx(ix, iy)] = d.x();
      c.Fy[c.idx(ix, iy)] = d.y();
    }
  return c;
}

bool FoliationChart::in_domain(double x, double y, double margin) const {
  return x >= x0() + margin && x <= x1() - margin && y >= y0() + margin && y <= y1() - margin;
}

namespace {

// cubic Lagrange through 4 consecutive nodes placed at t = -1, 0, 1, 2
double lagrange4(double f0, double f1, double f2, double f3, double t) {
  double a = -t * (t - 1) * (t - 2) / 6.0;
  double b = (t + 1) * (t - 1) * (t - 2) / 2.0;
  double c = -(t + 1) * t * (t - 2) / 2.0;
  double d = (t + 1) * t * (t - 1) / 6.0;
  return a * f0 + b * f1 + c * f2 + d * f3;
}

double interp(const std::vector<double>& v, const FoliationChart& c, double x, double y) {
  double gx = (x - c.x0()) / c.h;
  double gy = (y - c.y0()) / c.h;
  int ix = std::clamp(static_cast<int>(std::floor(gx)), 0, c.nx - 2);
  int iy = std::clamp(static_cast<int>(std::floor(gy)), 0, c.ny - 2);
  int js = std::clamp(iy - 1, 0, std::max(0, c.ny - 4));
  double ty = gy - (js + 1);
  double fx = gx - ix;
  double col0 = lagrange4(v[c.idx(ix, js)], v[c.idx(ix, js + 1)], v[c.idx(ix, js + 2)],
                          v[c.idx(ix, js + 3)], ty);
  double col1 = lagrange4(v[c.idx(ix + 1, js)], v[c.idx(ix + 1, js + 1)],
                          v[c.idx(ix + 1, js + 2)], v[c.idx(ix + 1, js + 3)], ty);
  return (1 - fx) * col0 + fx * col1;
}

}  // namespace

double FoliationChart::eval_F(double x, double y) const { return interp(F, *this, x, y); }

Vec2 FoliationChart::eval_DF(double x, double y) const {
  return {interp(Fx, *this, x, y), interp(Fy, *this, x, y)};
}

// ---------------------------------------------------------------------------
// certification

FoliationCertificate certify_foliation(const FoliationChart& chart,
                                       const CertifyFoliationOptions& opt) {
  chart.params.validate();
  const auto& p = chart.params;
  if (chart.h > p.C0 / 32.0) throw GridTooCoarse("certify_foliation: grid spacing above C0/32");

  FoliationCertificate cert;
  const int nx = chart.nx, ny = chart.ny;
  const double h = chart.h;
  const double alpha = p.alpha, beta = p.beta, C1 = p.C1;

  int iy_base = std::clamp(static_cast<int>(std::lround((p.base.y() - chart.y0()) / h)), 0, ny - 1);
  cert.worst_base_line = 0;
  for (int ix = 0; ix < nx; ++ix) {
    double x = chart.x0() + ix * h;
    cert.worst_base_line =
        std::max(cert.worst_base_line, std::abs(chart.F[chart.idx(ix, iy_base)] - x));
  }

  cert.worst_cone_slack = 1e300;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      Eigen::VectorXd v(2);
      v << chart.Fy[chart.idx(ix, iy)], 1.0;
      cert.worst_cone_slack = std::min(cert.worst_cone_slack, p.cone.slack(v));
    }

  cert.partial_x_dev = 0;
  for (std::size_t i = 0; i < chart.Fx.size(); ++i)
    cert.partial_x_dev = std::max(cert.partial_x_dev, std::abs(chart.Fx[i] - 1.0));

  auto dfn = [&](int ix, int iy) {
    return Vec2(chart.Fx[chart.idx(ix, iy)], chart.Fy[chart.idx(ix, iy)]);
  };
  auto node = [&](int ix, int iy) { return Vec2(chart.x0() + ix * h, chart.y0() + iy * h); };
  const int sep = std::max(1, static_cast<int>(std::lround(opt.min_separation_cells)));
  const int stride = opt.exhaustive ? 1 : std::max(1, opt.column_stride);

  cert.worst_y.value = 0;
  for (int ix = 0; ix < nx; ix += stride)
    for (int iy = 0; iy < ny; ++iy)
      for (int jy = iy + sep; jy < ny; ++jy) {
        double dy = (jy - iy) * h;
        double q = (dfn(ix, iy) - dfn(ix, jy)).norm() / (std::pow(dy, alpha) / C1);
        if (q > cert.worst_y.value) cert.worst_y = {node(ix, iy), node(ix, jy), q};
      }
  cert.worst_x.value = 0;
  for (int iy = 0; iy < ny; iy += stride)
    for (int ix = 0; ix < nx; ++ix)
      for (int jx = ix + sep; jx < nx; ++jx) {
        double dx = (jx - ix) * h;
        double q = (dfn(ix, iy) - dfn(jx, iy)).norm() / (std::pow(dx, beta) / C1);
        if (q > cert.worst_x.value) cert.worst_x = {node(ix, iy), node(jx, iy), q};
      }
  cert.worst_mixed.value = 0;
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> ux(0, nx - 1), uy(0, ny - 1);
  if (opt.exhaustive) {
    for (int ix = 0; ix < nx; ++ix)
      for (int jx = ix + sep; jx < nx; ++jx)
        for (int iy = 0; iy < ny; ++iy)
          for (int jy = iy + sep; jy < ny; ++jy) {
            double dx = (jx - ix) * h, dy = (jy - iy) * h;
            double num = (dfn(ix, iy) - dfn(ix, jy) - dfn(jx, iy) + dfn(jx, jy)).norm();
            double q = num / (std::pow(dx, beta) * std::pow(dy, alpha - beta) / C1);
            if (q > cert.worst_mixed.value) cert.worst_mixed = {node(ix, iy), node(jx, jy), q};
          }
  } else {
    for (std::size_t k = 0; k < opt.rect_samples; ++k) {
      int ix = ux(rng), jx = ux(rng), iy = uy(rng), jy = uy(rng);
      if (std::abs(ix - jx) < sep || std::abs(iy - jy) < sep) continue;
      double dx = std::abs(jx - ix) * h, dy = std::abs(jy - iy) * h;
      double num = (dfn(ix, iy) - dfn(ix, jy) - dfn(jx, iy) + dfn(jx, jy)).norm();
      double q = num / (std::pow(dx, beta) * std::pow(dy, alpha - beta) / C1);
      if (q > cert.worst_mixed.value) cert.worst_mixed = {node(ix, iy), node(jx, jy), q};
    }
  }

  cert.global_beta_holder = 0;
  for (int k = 0; k < 4000; ++k) {
    int ix = ux(rng), jx = ux(rng), iy = uy(rng), jy = uy(rng);
    double d = (node(ix, iy) - node(jx, jy)).norm();
    if (d < sep * h) continue;
    cert.global_beta_holder =
        std::max(cert.global_beta_holder, (dfn(ix, iy) - dfn(jx, jy)).norm() / std::pow(d, beta));
  }
  double sup_df = 0;
  for (std::size_t i = 0; i < chart.Fx.size(); ++i)
    sup_df = std::max(sup_df, std::hypot(chart.Fx[i], chart.Fy[i]));
  cert.dclass_constant = std::max({std::sqrt(1.0 + sup_df * sup_df), 2.0});

  const double tol = 1.0 + 1e-9;
  bool partial_ok =
      cert.partial_x_dev <= std::pow(p.C0, alpha) / C1 + 1e-12 && std::pow(p.C0, alpha) / C1 < 0.5;
  cert.passed = cert.worst_base_line <= opt.base_line_tol && cert.worst_cone_slack >= 0 &&
                cert.worst_y.value <= tol && cert.worst_x.value <= tol &&
                cert.worst_mixed.value <= tol && partial_ok;
  if (!cert.passed) {
    if (cert.worst_base_line > opt.base_line_tol) cert.failure = "base transversal";
    else if (cert.worst_cone_slack < 0) cert.failure = "cone containment";
    else if (cert.worst_y.value > tol) cert.failure = "y-quotient";
    else if (cert.worst_x.value > tol) cert.failure = "x-quotient";
    else if (cert.worst_mixed.value > tol) cert.failure = "mixed quotient";
    else cert.failure = "partial_x bound";
  }
  return cert;
}

// ---------------------------------------------------------------------------
// planar maps and leaf maps

LeafMap LeafMap::identity() {
  LeafMap m;
  m.f = [](const Vec2& z) { return z; };
  m.df = [](const Vec2&) { return Mat2::Identity(); };
  return m;
}

PlanarMap PlanarMap::affine(const Mat2& m, const Vec2& b) {
  PlanarMap p;
  p.f = [m, b](const Vec2& z) { return Vec2(m * z + b); };
  p.df = [m](const Vec2&) { return m; };
  return p;
}

PlanarMap PlanarMap::shear_q(double pp) {
  Mat2 m;
  m << 1, 0, -pp, 1;
  return affine(m, Vec2::Zero());
}

PlanarMap PlanarMap::shear_qprime(double pp) {
  Mat2 m;
  m << 1, -pp, 0, 1;
  return affine(m, Vec2::Zero());
}

LeafMapCertificate certify_leaf_map(const LeafMap& m, const Vec2& lo, const Vec2& hi, double alpha,
                                    int samples_per_axis) {
  LeafMapCertificate c;
  const int n = samples_per_axis;
  auto at = [&](int i, int j) {
    return Vec2(lo.x() + (hi.x() - lo.x()) * i / (n - 1.0),
                lo.y() + (hi.y() - lo.y()) * j / (n - 1.0));
  };
  for (int i = 0; i < n; ++i) {
    std::vector<Mat2> col(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      col[static_cast<std::size_t>(j)] = m.df(at(i, j));
      auto sv = col[static_cast<std::size_t>(j)].jacobiSvd().singularValues();
      c.sup_df = std::max(c.sup_df, sv(0));
      if (sv(1) > 1e-300) c.sup_df_inv = std::max(c.sup_df_inv, 1.0 / sv(1));
    }
    for (int j = 0; j < n; ++j)
      for (int j2 = j + 1; j2 < n; ++j2) {
        double dy = (at(i, j2) - at(i, j)).y();
        if (dy <= 0) continue;
        c.y_holder = std::max(c.y_holder, (col[static_cast<std::size_t>(j)] -
                                           col[static_cast<std::size_t>(j2)])
                                                  .norm() /
                                              std::pow(dy, alpha));
      }
  }
  return c;
}

// ---------------------------------------------------------------------------
// straightening

namespace {

struct EvalChart {
  std::function<double(double, double)> F;
  std::function<Vec2(double, double)> DF;
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;  // root-search limits
};

struct StraightenCore {
  EvalChart chart;
  PlanarMap q;
  Vec2 out_base;
  double monotone_floor = 1e-6;
  double pad = 8.0;  // bracket half-width around targets

  void jentries(double x, double y, double& a, double& b, double& c, double& d) const {
    Vec2 df = chart.DF(x, y);
    Vec2 w(chart.F(x, y), y);
    Mat2 dq = q.df(w);
    a = dq(0, 0) * df.x();
    b = dq(0, 0) * df.y() + dq(0, 1);
    c = dq(1, 0) * df.x();
    d = dq(1, 0) * df.y() + dq(1, 1);
    if (std::abs(d) < monotone_floor)
      throw MonotonicityLost("straighten: leaf parametrization lost monotonicity");
  }

  double p2(double x, double y) const {
    Vec2 w(chart.F(x, y), y);
    return q.f(w).y();
  }
  double p1(double x, double y) const {
    Vec2 w(chart.F(x, y), y);
    return q.f(w).x();
  }

  double solve_G(double x, double target, double hint) const {
    // warm Newton, bisection fallback
    double y = std::clamp(hint, chart.ylo, chart.yhi);
    for (int it = 0; it < 8; ++it) {
      double a, b, c, d;
      jentries(x, y, a, b, c, d);
      double r = p2(x, y) - target;
      if (std::abs(r) < 1e-13 * (1 + std::abs(target))) return y;
      double yn = y - r / d;
      if (yn < chart.ylo || yn > chart.yhi) break;
      y = yn;
    }
    if (std::abs(p2(x, y) - target) < 1e-12 * (1 + std::abs(target))) return y;
    double lo = std::max(chart.ylo, target - pad), hi = std::min(chart.yhi, target + pad);
    double flo = p2(x, lo), fhi = p2(x, hi);
    if ((flo - target) * (fhi - target) > 0) {
      lo = chart.ylo;
      hi = chart.yhi;
      flo = p2(x, lo);
      fhi = p2(x, hi);
      if ((flo - target) * (fhi - target) > 0)
        throw PreconditionFailed("straighten: target outside the chart's leaf range",
                                 "domain margin",
                                 -std::min(std::abs(flo - target), std::abs(fhi - target)));
    }
    bool increasing = fhi > flo;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      if ((p2(x, mid) < target) == increasing) lo = mid;
      else hi = mid;
    }
    y = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
      double a, b, c, d;
      jentries(x, y, a, b, c, d);
      double yn = y - (p2(x, y) - target) / d;
      if (yn > chart.ylo && yn < chart.yhi) y = yn;
    }
    return y;
  }

  double L1(double x) const { return p1(x, solve_G(x, out_base.y(), out_base.y())); }

  double solve_xi(double target, double hint) const {
    double x = std::clamp(hint, chart.xlo, chart.xhi);
    for (int it = 0; it < 8; ++it) {
      double r = L1(x) - target;
      if (std::abs(r) < 1e-13 * (1 + std::abs(target))) return x;
      double xn = x - r / dL1(x);
      if (xn < chart.xlo || xn > chart.xhi) break;
      x = xn;
    }
    if (std::abs(L1(x) - target) < 1e-12 * (1 + std::abs(target))) return x;
    double lo = std::max(chart.xlo, target - pad), hi = std::min(chart.xhi, target + pad);
    double flo = L1(lo), fhi = L1(hi);
    if ((flo - target) * (fhi - target) > 0)
      throw PreconditionFailed("straighten: target outside the base-line range", "domain margin",
                               -std::min(std::abs(flo - target), std::abs(fhi - target)));
    bool increasing = fhi > flo;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      if ((L1(mid) < target) == increasing) lo = mid;
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  double dL1(double xi) const {
    double g0 = solve_G(xi, out_base.y(), out_base.y());
    double a, b, c, d;
    jentries(xi, g0, a, b, c, d);
    return a - b * c / d;
  }
};

StraightenResult straighten_core(const EvalChart& input, const PlanarMap& q,
                                 const FoliationClassParams& out_params, double out_radius,
                                 double out_h, double monotone_floor) {
  auto core = std::make_shared<StraightenCore>();
  core->chart = input;
  core->q = q;
  core->out_base = out_params.base;
  core->monotone_floor = monotone_floor;

  FoliationClassParams op = out_params;
  op.C0 = out_radius;
  FoliationChart out;
  out.params = op;
  out.h = out_h;
  out.nx = static_cast<int>(std::lround(2 * out_radius / out_h)) + 1;
  out.ny = out.nx;
  out.F.resize(static_cast<std::size_t>(out.nx) * out.ny);
  out.Fx.resize(out.F.size());
  out.Fy.resize(out.F.size());
  double xi_hint = op.base.x();
  for (int ix = 0; ix < out.nx; ++ix) {
    double X = op.base.x() - out_radius + ix * out_h;
    double xi = core->solve_xi(X, xi_hint);
    xi_hint = xi;
    double dl1 = core->dL1(xi);
    double g_hint = op.base.y();
    for (int iy = 0; iy < out.ny; ++iy) {
      double Y = op.base.y() - out_radius + iy * out_h;
      double g = core->solve_G(xi, Y, g_hint);
      g_hint = g;
      double a, b, c, d;
      core->jentries(xi, g, a, b, c, d);
      out.F[out.idx(ix, iy)] = core->p1(xi, g);
      out.Fy[out.idx(ix, iy)] = b / d;
      out.Fx[out.idx(ix, iy)] = (a - b * c / d) / dl1;
    }
  }

  StraightenResult res;
  res.chart = std::move(out);
  res.psi.f = [core](const Vec2& z) { return Vec2(core->L1(z.x()), core->p2(z.x(), z.y())); };
  res.psi.df = [core](const Vec2& z) {
    double a, b, c, d;
    core->jentries(z.x(), z.y(), a, b, c, d);
    Mat2 m;
    m << core->dL1(z.x()), 0, c, d;
    return m;
  };
  res.psi_cert = certify_leaf_map(res.psi, Vec2(input.xlo, input.ylo), Vec2(input.xhi, input.yhi),
                                  out_params.alpha, 9);
  return res;
}

}  // namespace

StraightenResult straighten(const FoliationChart& chart, const PlanarMap& q,
                            const StraightenOptions& opt) {
  EvalChart ec;
  auto cp = std::make_shared<FoliationChart>(chart);
  ec.F = [cp](double x, double y) { return cp->eval_F(x, y); };
  ec.DF = [cp](double x, double y) { return cp->eval_DF(x, y); };
  ec.xlo = chart.x0();
  ec.xhi = chart.x1();
  ec.ylo = chart.y0();
  ec.yhi = chart.y1();
  FoliationClassParams op = chart.params;
  op.base = opt.out_base;
  double radius = opt.out_radius > 0 ? opt.out_radius : std::sqrt(chart.params.C0);
  double h = opt.out_h > 0 ? opt.out_h : chart.h;
  return straighten_core(ec, q, op, radius, h, opt.monotone_floor);
}

// ---------------------------------------------------------------------------
// graph transform

HyperbolicBranch2 HyperbolicBranch2::from_affine(const Mat2& m, const Vec2& b) {
  HyperbolicBranch2 br;
  br.map = PlanarMap::affine(m, b);
  Mat2 mi = m.inverse();
  br.inverse = PlanarMap::affine(mi, Vec2(-mi * b));
  br.affine = true;
  return br;
}

namespace {

GridSnapshot snapshot(const std::function<double(const Vec2&)>& f, const Vec2& lo, const Vec2& hi,
                      int n) {
  GridSnapshot s;
  s.lo = lo;
  s.hi = hi;
  s.n = n;
  s.values.resize(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Vec2 z(lo.x() + (hi.x() - lo.x()) * i / (n - 1.0),
             lo.y() + (hi.y() - lo.y()) * j / (n - 1.0));
      s.values[static_cast<std::size_t>(j) * n + i] = f(z);
    }
  return s;
}

struct GluedField {
  struct Local {
    double cx;
    FoliationChart chart;
  };
  std::vector<Local> locals;
  double R = 2.0;

  double gamma(const Vec2& dz) const { return smoothstep((R - dz.norm()) / (R / 2)); }
  Vec2 dgamma(const Vec2& dz) const {
    double r = dz.norm();
    if (r < 1e-12) return Vec2::Zero();
    double u = (R - r) / (R / 2);
    return Vec2(-smoothstep_d(u) / (R / 2) / r * dz);
  }

  double F(const Vec2& z) const {
    for (const auto& l : locals) {
      Vec2 dz(z.x() - l.cx, z.y());
      if (dz.norm() < R) {
        double g = gamma(dz);
        return z.x() + g * (l.chart.eval_F(z.x(), z.y()) - z.x());
      }
    }
    return z.x();
  }
  Vec2 DF(const Vec2& z) const {
    for (const auto& l : locals) {
      Vec2 dz(z.x() - l.cx, z.y());
      if (dz.norm() < R) {
        double g = gamma(dz);
        Vec2 dg = dgamma(dz);
        double f1 = l.chart.eval_F(z.x(), z.y());
        Vec2 df1 = l.chart.eval_DF(z.x(), z.y());
        return Vec2(1.0 + dg.x() * (f1 - z.x()) + g * (df1.x() - 1.0),
                    dg.y() * (f1 - z.x()) + g * df1.y());
      }
    }
    return Vec2(1.0, 0.0);
  }
};

}  // namespace

double GraphTransformDecomposition::factorization_residual(std::size_t kept_index, int samples,
                                                           unsigned seed) const {
  if (kept_index >= psi_m.size()) throw Error("factorization_residual: bad index");
  if (!residual_fn) throw Error("factorization_residual: evaluator missing");
  return residual_fn(kept_index, samples, seed);
}

GraphTransformDecomposition graph_transform(const std::vector<FoliationChart>& charts,
                                            const HyperbolicBranch2& branch,
                                            const Vec2& domain_base, const ExtendedCone& from,
                                            const ExtendedCone& to,
                                            const FoliationClassParams& out_params,
                                            const GraphTransformConfig& cfg) {
  out_params.validate();
  GraphTransformDecomposition dec;
  const double C0 = out_params.C0, C1 = out_params.C1;
  const double alpha = out_params.alpha, beta = out_params.beta;
  const double R = std::sqrt(C0);

  const Vec2 ell = domain_base;
  const Vec2 w = branch.map.f(ell);
  const Mat2 M = branch.map.df(ell);

  auto gate = [&](const std::string& hyp, double margin) {
    dec.gates.push_back({hyp, margin});
    if (!(margin >= 0))
      throw PreconditionFailed("graph_transform: precondition failed: " + hyp, hyp, margin);
  };

  {
    double m = 1.0;
    try {
      if (!sends_compactly(M, from, to)) m = -1.0;
    } catch (const IndeterminateMargin&) {
      m = -1.0;
    }
    gate("sends_compactly", m);
  }

  auto U = [inv = branch.inverse, M, w, ell](const Vec2& zh) {
    return Vec2(inv.f(M * zh + w) - ell);
  };
  auto DU = [inv = branch.inverse, M, w](const Vec2& zh) {
    return Mat2(inv.df(M * zh + w) * M);
  };
  {
    double dist = 0;
    if (!branch.affine) {
      for (int i = -4; i <= 4; ++i)
        for (int j = -4; j <= 4; ++j) {
          Vec2 z(i * C0 / 4.0, j * C0 / 4.0);
          dist = std::max(dist, (U(z) - z).norm());
          dist = std::max(dist, (DU(z) - Mat2::Identity()).norm());
        }
    }
    gate("nonlinearity eps", cfg.nonlinearity_eps - dist);
  }

  if (std::abs(M(0, 0)) < 1e-12)
    throw PreconditionFailed("graph_transform: unstable image tangent to the vertical", "P", 0);
  double P = M(1, 0) / M(0, 0);
  Mat2 Minv = M.inverse();
  Vec2 wv = Minv * Vec2(0, 1);
  if (std::abs(wv.y()) < 1e-12)
    throw PreconditionFailed("graph_transform: pulled-back vertical degenerate", "P'", 0);
  double Pp = wv.x() / wv.y();
  Mat2 Q, Qp;
  Q << 1, 0, -P, 1;
  Qp << 1, -Pp, 0, 1;
  Mat2 D = Q * M * Qp.inverse();
  dec.Q = Q;
  dec.Qp = Qp;
  dec.D = D;
  dec.A = D(0, 0);
  dec.B = D(1, 1);
  if (std::abs(D(0, 1)) + std::abs(D(1, 0)) > 1e-9 * D.norm())
    throw Error("graph_transform: block diagonalization failed");

  std::vector<Vec2> shifted_bases;
  for (std::size_t i = 0; i < charts.size(); ++i) {
    Vec2 mb = charts[i].params.base;
    // keep the chart when B(m, 2) meets the branch image of B(ell, 2); tested
    // on the pulled-back ball, which stays well conditioned for stiff branches
    bool keep = (branch.inverse.f(mb) - ell).norm() <= 2.0 + 1e-9;
    for (int k = 0; k < 4096 && !keep; ++k) {
      double th = kTau * k / 4096.0;
      Vec2 bd = mb + 2.0 * Vec2(std::cos(th), std::sin(th));
      if ((branch.inverse.f(bd) - ell).norm() <= 2.0 + 1e-9) keep = true;
    }
    if (keep) {
      dec.kept_charts.push_back(static_cast<int>(i));
      dec.base_points.push_back(mb);
      shifted_bases.push_back(mb - w);
    }
  }
  if (dec.kept_charts.empty())
    throw PreconditionFailed("graph_transform: no chart meets the branch image", "charts", -1);
  if (shifted_bases.size() > 1) {
    double sep = 1e300;
    for (std::size_t i = 0; i < shifted_bases.size(); ++i)
      for (std::size_t j = i + 1; j < shifted_bases.size(); ++j)
        sep = std::min(sep, (shifted_bases[i] - shifted_bases[j]).norm());
    gate("separation", sep - cfg.separation_factor * C0);
  }

  // step 1: straighten each kept chart by the shear Q (coordinates shifted by w)
  GluedField glued;
  glued.R = R;
  PlanarMap qmap = PlanarMap::affine(Q, Vec2::Zero());
  for (std::size_t k = 0; k < dec.kept_charts.size(); ++k) {
    const FoliationChart& abs_chart = charts[static_cast<std::size_t>(dec.kept_charts[k])];
    Vec2 mhat = shifted_bases[k];
    Vec2 pim(mhat.x(), 0.0);
    dec.projected_bases.push_back(pim);
    dec.piqm.push_back((Q * mhat - pim).norm());

    EvalChart ec;
    auto cptr = std::make_shared<FoliationChart>(abs_chart);
    Vec2 wc = w;
    ec.F = [cptr, wc](double x, double y) {
      return cptr->eval_F(x + wc.x(), y + wc.y()) - wc.x();
    };
    ec.DF = [cptr, wc](double x, double y) { return cptr->eval_DF(x + wc.x(), y + wc.y()); };
    ec.xlo = abs_chart.x0() - w.x();
    ec.xhi = abs_chart.x1() - w.x();
    ec.ylo = abs_chart.y0() - w.y();
    ec.yhi = abs_chart.y1() - w.y();

    FoliationClassParams p1 = out_params;
    p1.base = pim;
    StraightenResult sr = straighten_core(ec, qmap, p1, R, abs_chart.h, 1e-6);
    dec.phi1.push_back(sr.chart);
    dec.psi_m.push_back(sr.psi);
    dec.psi_m_cert.push_back(sr.psi_cert);
    glued.locals.push_back({pim.x(), dec.phi1.back()});
  }
  if (dec.projected_bases.size() > 1) {
    double sep = 1e300;
    for (std::size_t i = 0; i < dec.projected_bases.size(); ++i)
      for (std::size_t j = i + 1; j < dec.projected_bases.size(); ++j)
        sep = std::min(sep, (dec.projected_bases[i] - dec.projected_bases[j]).norm());
    gate("projected separation", sep - C0);
  }

  auto glued_ptr = std::make_shared<GluedField>(std::move(glued));
  auto F2 = [glued_ptr](const Vec2& z) { return glued_ptr->F(z); };
  auto DF2 = [glued_ptr](const Vec2& z) { return glued_ptr->DF(z); };
  dec.F2 = F2;

  // measured Hoelder data of the glued field, for the pushforward gates
  double q_y = 0, q_xy = 0, q_x0 = 0, sup_f2y = 0;
  {
    std::mt19937_64 rng(cfg.seed + 5);
    std::uniform_real_distribution<double> ur(-R, R);
    const double min_sep =
        2.0 * (glued_ptr->locals.empty() ? 0.05 : glued_ptr->locals[0].chart.h);
    for (const auto& l : glued_ptr->locals) {
      for (int k = 0; k < 4000; ++k) {
        double x = l.cx + ur(rng), y = ur(rng), y2 = ur(rng), x2 = l.cx + ur(rng);
        Vec2 a = DF2({x, y});
        sup_f2y = std::max(sup_f2y, std::abs(a.y()));
        if (std::abs(y2 - y) >= min_sep) {
          Vec2 b = DF2({x, y2});
          q_y = std::max(q_y, (a - b).norm() / std::pow(std::abs(y2 - y), alpha));
          if (std::abs(x2 - x) >= min_sep) {
            Vec2 c = DF2({x2, y});
            Vec2 d = DF2({x2, y2});
            q_xy = std::max(q_xy, (a - b - c + d).norm() /
                                      (std::pow(std::abs(x2 - x), beta) *
                                       std::pow(std::abs(y2 - y), alpha - beta)));
          }
        }
        if (std::abs(x2 - x) >= min_sep) {
          double fy1 = DF2({x, 0.0}).y();
          double fy2 = DF2({x2, 0.0}).y();
          q_x0 = std::max(q_x0, std::abs(fy1 - fy2) / std::pow(std::abs(x2 - x), beta));
        }
      }
    }
  }

  const double absA = std::abs(dec.A), absB = std::abs(dec.B);
  gate("pushforward y-quotient",
       cfg.reinforce_slack / (2 * C1) - std::pow(absB, alpha) * q_y);
  gate("pushforward mixed quotient",
       cfg.reinforce_slack / (4 * C0 * C0 * C1) -
           std::pow(absA, beta) * std::pow(absB, alpha - beta) * q_xy);
  gate("pushforward x-quotient",
       cfg.reinforce_slack / (2 * C1) -
           (std::pow(C0, 2 * (alpha - beta)) / (4 * C0 * C0 * C1) +
            (absB / absA) * std::pow(absA, beta) * q_x0));

  double A = dec.A, B = dec.B;
  auto F3 = [F2, A, B](const Vec2& z) { return F2({A * z.x(), B * z.y()}) / A; };
  auto DF3 = [DF2, A, B](const Vec2& z) {
    Vec2 d = DF2({A * z.x(), B * z.y()});
    return Vec2(d.x(), d.y() * B / A);
  };
  auto F4 = [F3, Pp](const Vec2& z) { return F3(z) + Pp * z.y(); };
  auto DF4 = [DF3, Pp](const Vec2& z) {
    Vec2 d = DF3(z);
    return Vec2(d.x(), d.y() + Pp);
  };
  dec.F4 = F4;

  {
    double spread = (absB / absA) * (sup_f2y + 1e-12);
    Eigen::VectorXd v1(2), v2(2);
    v1 << Pp + spread, 1.0;
    v2 << Pp - spread, 1.0;
    gate("output cone containment", std::min(from.outer_s.slack(v1), from.outer_s.slack(v2)));
  }

  dec.phi2_snapshot = snapshot(F2, {-4 * C0, -4 * C0}, {4 * C0, 4 * C0}, 33);
  dec.phi3_snapshot =
      snapshot([&](const Vec2& z) { return F3(z); }, {-C0, -C0}, {C0, C0}, 33);
  dec.phi4_snapshot = snapshot(F4, {-C0, -C0}, {C0, C0}, 33);

  double out_h = charts.empty() ? C0 / 128.0 : charts[0].h;
  FoliationClassParams op = out_params;
  op.base = Vec2::Zero();
  if (branch.affine) {
    dec.psi = LeafMap::identity();
    dec.psi_cert = certify_leaf_map(dec.psi, {-C0, -C0}, {C0, C0}, alpha, 3);
    FoliationChart out;
    out.params = op;
    out.h = out_h;
    out.nx = static_cast<int>(std::lround(2 * C0 / out_h)) + 1;
    out.ny = out.nx;
    out.F.resize(static_cast<std::size_t>(out.nx) * out.ny);
    out.Fx.resize(out.F.size());
    out.Fy.resize(out.F.size());
    for (int iy = 0; iy < out.ny; ++iy)
      for (int ix = 0; ix < out.nx; ++ix) {
        Vec2 z(-C0 + ix * out_h, -C0 + iy * out_h);
        out.F[out.idx(ix, iy)] = F4(z);
        Vec2 d = DF4(z);
        out.Fx[out.idx(ix, iy)] = d.x();
        out.Fy[out.idx(ix, iy)] = d.y();
      }
    dec.output = std::move(out);
  } else {
    EvalChart ec;
    ec.F = [F4](double x, double y) { return F4({x, y}); };
    ec.DF = [DF4](double x, double y) { return DF4({x, y}); };
    ec.xlo = -4 * C1;
    ec.xhi = 4 * C1;
    ec.ylo = -4 * C1;
    ec.yhi = 4 * C1;
    PlanarMap u;
    u.f = U;
    u.df = DU;
    StraightenResult sr = straighten_core(ec, u, op, C0, out_h, 1e-6);
    dec.output = std::move(sr.chart);
    dec.psi = sr.psi;
    dec.psi_cert = sr.psi_cert;
  }

  // back to absolute coordinates at the domain-side base point
  dec.output.params.base = ell;
  for (auto& v : dec.output.F) v += ell.x();

  // measured containment of the straightened chart preimages in the inner bump
  // zone B(Pi m, sqrt(C0)/2); the factorization equality is asserted there
  {
    double worst = 1e300;
    std::mt19937_64 rng(cfg.seed + 77);
    std::uniform_real_distribution<double> ur(-1.0, 1.0);
    for (std::size_t k = 0; k < dec.kept_charts.size(); ++k) {
      const FoliationChart& ch = charts[static_cast<std::size_t>(dec.kept_charts[k])];
      for (int s = 0; s < 400; ++s) {
        Vec2 zz(ch.params.base.x() + ur(rng), ch.params.base.y() + ur(rng));
        Vec2 phi_val(ch.eval_F(zz.x(), zz.y()), zz.y());
        if ((phi_val - ch.params.base).norm() > 2.0) continue;
        Vec2 im = dec.psi_m[k].f(Vec2(zz.x() - w.x(), zz.y() - w.y()));
        worst = std::min(worst, R / 2 - (im - dec.projected_bases[k]).norm());
      }
    }
    dec.gates.push_back({"psi_m image containment (measured)", worst});
  }

  {
    auto charts_copy = std::make_shared<std::vector<FoliationChart>>(charts);
    auto kept = dec.kept_charts;
    auto psim = dec.psi_m;
    auto psi = dec.psi;
    auto out_chart = std::make_shared<FoliationChart>(dec.output);
    auto proj = dec.projected_bases;
    Mat2 Dinv = D.inverse();
    auto inv_map = branch.inverse;
    Vec2 wc = w, lc = ell;
    double rr = R;
    dec.residual_fn = [charts_copy, kept, psim, psi, out_chart, proj, Dinv, inv_map, wc, lc,
                       rr](std::size_t ki, int samples, unsigned seed) {
      const FoliationChart& ch = (*charts_copy)[static_cast<std::size_t>(kept[ki])];
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> ur(-1.0, 1.0);
      double worst = 0;
      int used = 0;
      for (int s = 0; s < samples * 40 && used < samples; ++s) {
        Vec2 zz(ch.params.base.x() + ur(rng), ch.params.base.y() + ur(rng));
        Vec2 phi_val(ch.eval_F(zz.x(), zz.y()), zz.y());
        if ((phi_val - ch.params.base).norm() > 2.0) continue;
        Vec2 lhs = inv_map.f(phi_val);
        if ((lhs - lc).norm() > 2.0) continue;
        Vec2 zh(zz.x() - wc.x(), zz.y() - wc.y());
        Vec2 im = psim[ki].f(zh);
        if ((im - proj[ki]).norm() > rr / 2) continue;  // outside the asserted zone
        ++used;
        Vec2 t = psi.f(Dinv * im);
        Vec2 rhs(out_chart->eval_F(t.x() + lc.x(), t.y() + lc.y()), t.y() + lc.y());
        worst = std::max(worst, (lhs - rhs).norm());
      }
      return used > 0 ? worst : -1.0;
    };
  }
  return dec;
}

}  // namespace conehyp
