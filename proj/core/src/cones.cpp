#include "conehyp/cones.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace conehyp {

namespace {

constexpr double kPi = 3.14159265358979323846;

double angle_mod_pi(double x, double y) {
  double a = std::atan2(y, x);
  while (a < 0) a += kPi;
  while (a >= kPi) a -= kPi;
  return a;
}

double op_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

double op_min_sv(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  auto sv = m.jacobiSvd().singularValues();
  return sv(sv.size() - 1);
}

}  // namespace

GraphCone::GraphCone() : GraphCone(MatrixXd::Identity(2, 2), 1, 1, ConeKind::Stable, [] {
  MatrixXd a(1, 1);
  a(0, 0) = 0.5;
  return a;
}()) {}

GraphCone::GraphCone(MatrixXd frame, int du, int ds, ConeKind kind, MatrixXd aperture,
                     bool allow_degenerate)
    : frame_(std::move(frame)), aperture_(std::move(aperture)), du_(du), ds_(ds), kind_(kind) {
  const int d = du_ + ds_;
  if (du_ < 1 || ds_ < 0 || d < 2 || frame_.rows() != d || frame_.cols() != d)
    throw CertificationFailed("GraphCone: bad dimensions", "split");
  const int o = off_dim(), c = core_dim();
  if (aperture_.rows() != o || aperture_.cols() != c)
    throw CertificationFailed("GraphCone: aperture must map core block to off block", "aperture");
  Eigen::JacobiSVD<MatrixXd> svd(frame_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0 || sv(0) / sv(sv.size() - 1) > 1e8)
    throw CertificationFailed("GraphCone: frame condition number above cap", "frame");
  frame_inv_ = frame_.inverse();
  aperture_norm_ = op_norm(aperture_);
  degenerate_ = aperture_norm_ == 0.0;
  if (degenerate_) {
    if (kind_ == ConeKind::Stable)
      throw CertificationFailed("GraphCone: zero aperture makes the stable set a subspace",
                                "aperture nonzero");
    if (!allow_degenerate)
      throw CertificationFailed("GraphCone: degenerate cone without the diagnostic flag",
                                "aperture nonzero");
  }
}

GraphCone GraphCone::stable(int du, int ds, MatrixXd aperture) {
  return GraphCone(MatrixXd::Identity(du + ds, du + ds), du, ds, ConeKind::Stable,
                   std::move(aperture));
}

GraphCone GraphCone::unstable(int du, int ds, MatrixXd aperture) {
  return GraphCone(MatrixXd::Identity(du + ds, du + ds), du, ds, ConeKind::Unstable,
                   std::move(aperture));
}

GraphCone GraphCone::axis2d(ConeKind kind, double aperture, bool allow_degenerate) {
  MatrixXd a(1, 1);
  a(0, 0) = aperture;
  return GraphCone(MatrixXd::Identity(2, 2), 1, 1, kind, a, allow_degenerate);
}

void GraphCone::split_model(const VectorXd& v, VectorXd& off, VectorXd& core) const {
  VectorXd z = frame_inv_ * v;
  if (kind_ == ConeKind::Stable) {
    off = z.head(du_);
    core = z.tail(ds_);
  } else {
    core = z.head(du_);
    off = z.tail(ds_);
  }
}

bool GraphCone::contains(const VectorXd& v) const {
  return slack(v) >= 0.0;
}

double GraphCone::slack(const VectorXd& v) const {
  VectorXd off, core;
  split_model(v, off, core);
  const double n = std::hypot(off.norm(), core.norm());
  if (n == 0.0) return 0.0;
  return ((aperture_ * core).norm() - off.norm()) / n;
}

bool GraphCone::contains_with_margin(const VectorXd& v, double margin) const {
  return slack(v) >= (1.0 + aperture_norm_) * margin;
}

Eigen::Vector2d GraphCone::axis2() const {
  if (dim() != 2) throw Error("axis2: 2-D only");
  Eigen::Vector2d a = kind_ == ConeKind::Stable ? Eigen::Vector2d(frame_.col(1))
                                                : Eigen::Vector2d(frame_.col(0));
  return a.normalized();
}

GraphCone::Sector GraphCone::sector() const {
  if (dim() != 2) throw Error("sector: 2-D only");
  const double a = std::abs(aperture_(0, 0));
  Eigen::Vector2d d1, d2, ax;
  if (kind_ == ConeKind::Stable) {
    d1 = frame_ * Eigen::Vector2d(a, 1.0);
    d2 = frame_ * Eigen::Vector2d(-a, 1.0);
    ax = frame_ * Eigen::Vector2d(0.0, 1.0);
  } else {
    d1 = frame_ * Eigen::Vector2d(1.0, a);
    d2 = frame_ * Eigen::Vector2d(1.0, -a);
    ax = frame_ * Eigen::Vector2d(1.0, 0.0);
  }
  double t1 = angle_mod_pi(d1.x(), d1.y());
  double t2 = angle_mod_pi(d2.x(), d2.y());
  double ta = angle_mod_pi(ax.x(), ax.y());
  if (t1 > t2) std::swap(t1, t2);
  // two candidate intervals mod pi; pick the one holding the axis
  auto inside = [](double lo, double hi, double t) {
    if (t < lo) t += kPi;
    return t >= lo - 1e-15 && t <= hi + 1e-15;
  };
  if (inside(t1, t2, ta) && t2 - t1 < kPi - 1e-12) return {t1, t2};
  return {t2, t1 + kPi};
}

std::vector<VectorXd> GraphCone::sample_directions(int count, unsigned seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int o = off_dim(), c = core_dim();
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(count) + 2);
  auto assemble = [&](const VectorXd& off, const VectorXd& core) {
    VectorXd z(dim());
    if (kind_ == ConeKind::Stable) {
      z.head(du_) = off;
      z.tail(ds_) = core;
    } else {
      z.head(du_) = core;
      z.tail(ds_) = off;
    }
    VectorXd v = frame_ * z;
    double n = v.norm();
    if (n > 0) out.push_back(v / n);
  };
  // core axis directions
  for (int i = 0; i < c; ++i) {
    VectorXd core = VectorXd::Zero(c);
    core(i) = 1.0;
    assemble(VectorXd::Zero(o), core);
  }
  for (int i = 0; i < count; ++i) {
    VectorXd core(c);
    for (int k = 0; k < c; ++k) core(k) = gauss(rng);
    if (core.norm() == 0) continue;
    core.normalize();
    VectorXd off = VectorXd::Zero(o);
    if (!degenerate_) {
      for (int k = 0; k < o; ++k) off(k) = gauss(rng);
      if (off.norm() > 0) {
        off.normalize();
        // mostly boundary directions, some interior
        double t = (i % 4 == 3) ? unif(rng) : 1.0;
        off *= t * (aperture_ * core).norm();
      }
    }
    assemble(off, core);
  }
  return out;
}

ExtendedCone ExtendedCone::axis2d(double outer_aperture, double inner_aperture) {
  return ExtendedCone{GraphCone::axis2d(ConeKind::Stable, outer_aperture),
                      GraphCone::axis2d(ConeKind::Stable, inner_aperture),
                      GraphCone::axis2d(ConeKind::Unstable, outer_aperture),
                      GraphCone::axis2d(ConeKind::Unstable, inner_aperture)};
}

namespace {

// sector containment with angular margin; both widths < pi
bool sector_inside(const GraphCone::Sector& in, const GraphCone::Sector& out, double margin,
                   double* worst = nullptr) {
  // align in.lo into [out.lo - pi/2, out.lo + pi/2) ... try both pi-shifts
  double best = -1e9;
  for (int k = -2; k <= 2; ++k) {
    double lo = in.lo + k * kPi, hi = in.hi + k * kPi;
    double m = std::min(lo - out.lo, out.hi - hi);
    best = std::max(best, m);
  }
  if (worst) *worst = best;
  return best >= margin;
}

double sector_gap(const GraphCone::Sector& a, const GraphCone::Sector& b) {
  // positive = distance between the direction sets mod pi, negative = overlap depth
  double best = 1e9;
  for (int k = -2; k <= 2; ++k) {
    double lo = b.lo + k * kPi, hi = b.hi + k * kPi;
    double g = std::max(lo - a.hi, a.lo - hi);
    best = std::min(best, g);
  }
  return best;
}

struct ConeBlocks {
  std::vector<int> off_idx, core_idx;
};

ConeBlocks blocks_of(const GraphCone& c) {
  ConeBlocks b;
  const int d = c.dim();
  for (int i = 0; i < d; ++i) {
    bool is_core = c.kind() == ConeKind::Stable ? (i >= c.du()) : (i < c.du());
    (is_core ? b.core_idx : b.off_idx).push_back(i);
  }
  return b;
}

MatrixXd submatrix(const MatrixXd& m, const std::vector<int>& rows,
                   const std::vector<int>& cols) {
  MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

// Sufficient margin for C_a ∩ C_b = {0}: every nonzero v of C_a (normalized to
// unit core block) fails C_b membership by at least the returned amount.
double trivial_margin(const GraphCone& ca, const GraphCone& cb) {
  MatrixXd h = cb.frame_inv() * ca.frame();
  ConeBlocks ba = blocks_of(ca), bb = blocks_of(cb);
  const double aa = ca.aperture_norm(), ab = cb.aperture_norm();
  MatrixXd h_oc = submatrix(h, bb.off_idx, ba.core_idx);
  MatrixXd h_oo = submatrix(h, bb.off_idx, ba.off_idx);
  MatrixXd h_cc = submatrix(h, bb.core_idx, ba.core_idx);
  MatrixXd h_co = submatrix(h, bb.core_idx, ba.off_idx);
  double lhs = op_min_sv(h_oc) - op_norm(h_oo) * aa;
  double rhs = ab * (op_norm(h_cc) + op_norm(h_co) * aa);
  double scale = op_norm(h) * (1.0 + aa) * (1.0 + ab);
  return (lhs - rhs) / std::max(scale, 1e-300);
}

// Certified bound of max slack_b over the unit section of cone_a: dense grid
// over the section parameters plus a Lipschitz covering term. Returns the
// certified upper bound; negative means the cones only meet at the origin.
double section_max_slack(const GraphCone& ca, const GraphCone& cb, int n_angle, int n_t,
                         double& witness_value) {
  const double lb = 2.0 * (1.0 + cb.aperture_norm()) *
                    (op_norm(cb.frame_inv()) / std::max(op_min_sv(cb.frame_inv()), 1e-300));
  const int cc = ca.core_dim();
  const int oc = ca.off_dim();
  double best = -1e300;
  double max_adj = 0;
  std::vector<VectorXd> prev_row;
  auto assemble = [&](const VectorXd& off, const VectorXd& core) {
    VectorXd z(ca.dim());
    if (ca.kind() == ConeKind::Stable) {
      z.head(ca.du()) = off;
      z.tail(ca.ds()) = core;
    } else {
      z.head(ca.du()) = core;
      z.tail(ca.ds()) = off;
    }
    return VectorXd((ca.frame() * z).normalized());
  };
  // 2-parameter section grids for d = 3 (core or off block is a plane)
  auto scan = [&](const std::function<VectorXd(int, int)>& node) {
    std::vector<VectorXd> row(static_cast<std::size_t>(n_t + 1));
    for (int ia = 0; ia <= n_angle; ++ia) {
      for (int it = 0; it <= n_t; ++it) {
        VectorXd v = node(ia, it);
        best = std::max(best, cb.slack(v));
        if (it > 0) max_adj = std::max(max_adj, (v - row[static_cast<std::size_t>(it - 1)]).norm());
        if (!prev_row.empty())
          max_adj = std::max(max_adj, (v - prev_row[static_cast<std::size_t>(it)]).norm());
        row[static_cast<std::size_t>(it)] = v;
      }
      prev_row = row;
    }
  };
  if (cc == 1 && oc == 2) {
    VectorXd k(1);
    for (double s : {1.0, -1.0}) {
      prev_row.clear();
      k(0) = s;
      double r = (ca.aperture() * k).norm();
      scan([&](int ia, int it) {
        double psi = kPi * 2.0 * ia / n_angle;
        VectorXd off(2);
        off << std::cos(psi), std::sin(psi);
        return assemble(off * (r * it / n_t), k);
      });
    }
  } else if (cc == 2 && oc == 1) {
    for (double s : {1.0, -1.0}) {
      prev_row.clear();
      scan([&](int ia, int it) {
        double phi = kPi * 2.0 * ia / n_angle;
        VectorXd k(2);
        k << std::cos(phi), std::sin(phi);
        VectorXd off(1);
        off << s * (ca.aperture() * k).norm() * it / n_t;
        return assemble(off, k);
      });
    }
  } else {
    witness_value = -1e300;
    return 1e300;  // other splits fall back to the operator-norm test alone
  }
  witness_value = best;
  return best + lb * 0.75 * max_adj;
}

// Local polish of min(slack_a, slack_b) on the unit sphere.
double polish_witness(const GraphCone& ca, const GraphCone& cb, VectorXd v, int iters,
                      VectorXd* best_out) {
  auto f = [&](const VectorXd& u) { return std::min(ca.slack(u), cb.slack(u)); };
  const int d = v.size();
  double fv = f(v);
  double step = 0.1;
  for (int it = 0; it < iters && step > 1e-10; ++it) {
    VectorXd g(d);
    const double h = 1e-6;
    for (int k = 0; k < d; ++k) {
      VectorXd vp = v, vm = v;
      vp(k) += h;
      vm(k) -= h;
      g(k) = (f(vp.normalized()) - f(vm.normalized())) / (2 * h);
    }
    if (g.norm() == 0) break;
    VectorXd cand = (v + step * g.normalized()).normalized();
    double fc = f(cand);
    if (fc > fv) {
      v = cand;
      fv = fc;
    } else {
      step *= 0.5;
    }
  }
  if (best_out) *best_out = v;
  return fv;
}

}  // namespace

void ExtendedCone::validate(const ConeTolerances& tol) const {
  auto check_pair = [&](const GraphCone& inner, const GraphCone& outer, const char* what) {
    if (inner.dim() == 2) {
      double worst = 0;
      if (!sector_inside(inner.sector(), outer.sector(), tol.angular_margin, &worst))
        throw CertificationFailed(std::string("ExtendedCone: inner not compactly inside outer (") +
                                      what + ")",
                                  "inner inside outer");
    } else {
      auto dirs = inner.sample_directions(tol.boundary_samples_per_dsq * inner.dim() * inner.dim(),
                                          /*seed=*/7u);
      for (const auto& v : dirs)
        if (!outer.contains_with_margin(v, tol.angular_margin))
          throw CertificationFailed(std::string("ExtendedCone: inner not compactly inside outer (") +
                                        what + ")",
                                    "inner inside outer");
    }
  };
  check_pair(inner_s, outer_s, "stable");
  check_pair(inner_u, outer_u, "unstable");
  if (!convexly_transverse(outer_s, outer_u, tol))
    throw CertificationFailed("ExtendedCone: outer cones not convexly transverse",
                              "outer transversality");
}

bool contains(const GraphCone& cone, const VectorXd& v) { return cone.contains(v); }

bool convexly_transverse(const GraphCone& c1, const GraphCone& c2, const ConeTolerances& tol) {
  if (c1.dim() != c2.dim())
    throw Error("convexly_transverse: ambient dimensions differ");
  const int d = c1.dim();
  if (c1.core_dim() + c2.core_dim() != d)
    throw Error("convexly_transverse: cone dimensions are not complementary");

  if (d == 2) {
    double gap = sector_gap(c1.sector(), c2.sector());
    if (std::abs(gap) < tol.exact2d_eps)
      throw IndeterminateMargin("convexly_transverse: sector gap below exact tolerance", gap);
    return gap > 0;
  }

  int samples = tol.boundary_samples_per_dsq * d * d;
  double best_trivial = std::max(trivial_margin(c1, c2), trivial_margin(c2, c1));
  double best_witness = -1e9;
  // the operator-norm certificate is exact up to rounding, so it only needs a
  // floating-point floor rather than the sampled-decision angular margin
  const double trivial_floor = 1e-9;
  int n_angle = 360, n_t = 24;
  for (int ref = 0; ref <= tol.max_refinements; ++ref) {
    if (best_trivial > trivial_floor) return true;
    auto seeds1 = c1.sample_directions(samples / 2, 101u + 13u * ref);
    auto seeds2 = c2.sample_directions(samples / 2, 202u + 13u * ref);
    seeds1.insert(seeds1.end(), seeds2.begin(), seeds2.end());
    for (auto& s : seeds1) {
      double w = std::min(c1.slack(s), c2.slack(s));
      if (w > best_witness) best_witness = polish_witness(c1, c2, s, 40, nullptr);
      if (best_witness >= 1e-6) return false;
    }
    // section scan: a certified negative bound decides the trivial side, a
    // positive sampled value is an interior witness
    double w1 = 0, w2 = 0;
    double b1 = section_max_slack(c1, c2, n_angle, n_t, w1);
    double b2 = section_max_slack(c2, c1, n_angle, n_t, w2);
    if (std::max(w1, w2) >= 1e-6) return false;
    if (b1 < 0 && b2 < 0) return true;
    samples *= 2;
    n_angle *= 2;
    n_t *= 2;
  }
  throw IndeterminateMargin("convexly_transverse: neither certificate reached tolerance",
                            std::max(best_trivial, best_witness));
}

namespace {

void check_square_invertible(const MatrixXd& m) {
  if (m.rows() != m.cols()) throw SingularMatrix("matrix is not square");
  double det = m.determinant();
  double scale = std::pow(std::max(op_norm(m), 1e-300), m.rows());
  if (!(std::abs(det) > 1e-14 * scale)) throw SingularMatrix("matrix is numerically singular");
}

GraphCone mapped_cone(const MatrixXd& m, const GraphCone& c) {
  return GraphCone(m * c.frame(), c.du(), c.ds(), c.kind(), c.aperture(), c.degenerate());
}

// image of `from`'s sampled directions under m contained in `to` with margin
bool sampled_inclusion(const MatrixXd& m, const GraphCone& from, const GraphCone& to,
                       const ConeTolerances& tol, bool& indeterminate) {
  const int d = from.dim();
  int samples = tol.boundary_samples_per_dsq * d * d;
  indeterminate = false;
  for (int ref = 0; ref <= tol.max_refinements; ++ref) {
    bool all_margin = true;
    for (const auto& v : from.sample_directions(samples, 31u + 7u * ref)) {
      VectorXd u = m * v;
      double s = to.slack(u);
      if (s < 0) return false;
      if (s < (1.0 + to.aperture_norm()) * tol.angular_margin) all_margin = false;
    }
    if (all_margin) return true;
    samples *= 2;
  }
  indeterminate = true;
  return false;
}

}  // namespace

bool sends_compactly(const MatrixXd& M, const ExtendedCone& from, const ExtendedCone& to,
                     const ConeTolerances& tol) {
  check_square_invertible(M);
  MatrixXd Minv = M.inverse();

  if (M.rows() == 2) {
    double m1 = 0, m2 = 0;
    GraphCone img_u = mapped_cone(M, from.outer_u);
    GraphCone pre_s = mapped_cone(Minv, to.outer_s);
    bool in_u = sector_inside(img_u.sector(), to.inner_u.sector(), tol.angular_margin, &m1);
    bool in_s = sector_inside(pre_s.sector(), from.inner_s.sector(), tol.angular_margin, &m2);
    double worst = std::min(m1, m2);
    if (in_u && in_s) return true;
    if (worst <= tol.exact2d_eps) return false;
    // containment holds but without the configured margin
    throw IndeterminateMargin("sends_compactly: containment margin below tolerance", worst);
  }

  bool ind1 = false, ind2 = false;
  bool ok_u = sampled_inclusion(M, from.outer_u, to.inner_u, tol, ind1);
  if (!ok_u && !ind1) return false;
  bool ok_s = sampled_inclusion(Minv, to.outer_s, from.inner_s, tol, ind2);
  if (!ok_s && !ind2) return false;
  if (ind1 || ind2)
    throw IndeterminateMargin("sends_compactly: sampled margins below tolerance",
                              tol.angular_margin);
  return true;
}

void expansion_range(const MatrixXd& M, const GraphCone& cone, double& lo, double& hi,
                     const ConeTolerances& tol) {
  check_square_invertible(M);
  if (cone.dim() == 2) {
    const MatrixXd mtm = M.transpose() * M;
    const double p = mtm(0, 0), q = mtm(1, 1), r = mtm(0, 1);
    auto f = [&](double th) {
      double c = std::cos(th), s = std::sin(th);
      return p * c * c + 2 * r * c * s + q * s * s;
    };
    auto sec = cone.sector();
    std::vector<double> cand = {sec.lo, sec.hi};
    double base = 0.5 * std::atan2(2 * r, p - q);
    for (int k = -4; k <= 4; ++k) {
      double th = base + k * kPi / 2;
      if (th > sec.lo + 1e-15 && th < sec.hi - 1e-15) cand.push_back(th);
    }
    double fmin = 1e300, fmax = -1e300;
    for (double th : cand) {
      double v = f(th);
      fmin = std::min(fmin, v);
      fmax = std::max(fmax, v);
    }
    lo = std::sqrt(std::max(fmin, 0.0));
    hi = std::sqrt(std::max(fmax, 0.0));
    return;
  }
  // d >= 3: dense sampling with a short local polish at the extremes
  const int d = cone.dim();
  int samples = tol.boundary_samples_per_dsq * d * d * 4;
  VectorXd vmin, vmax;
  lo = 1e300;
  hi = -1e300;
  for (const auto& v : cone.sample_directions(samples, 97u)) {
    double r = (M * v).norm();
    if (r < lo) {
      lo = r;
      vmin = v;
    }
    if (r > hi) {
      hi = r;
      vmax = v;
    }
  }
  auto polish = [&](VectorXd v, double sign) {
    auto f = [&](const VectorXd& u) { return sign * (M * u).norm(); };
    double fv = f(v), step = 0.05;
    for (int it = 0; it < 80 && step > 1e-12; ++it) {
      VectorXd g(d);
      const double h = 1e-6;
      for (int k = 0; k < d; ++k) {
        VectorXd vp = v, vm = v;
        vp(k) += h;
        vm(k) -= h;
        g(k) = (f(vp.normalized()) - f(vm.normalized())) / (2 * h);
      }
      VectorXd candv = (v + step * g.normalized()).normalized();
      if (cone.slack(candv) < 0) {
        step *= 0.5;  // stay on the cone section
        continue;
      }
      double fc = f(candv);
      if (fc > fv) {
        v = candv;
        fv = fc;
      } else {
        step *= 0.5;
      }
    }
    return sign * fv;
  };
  if (vmax.size()) hi = polish(vmax, +1.0);
  if (vmin.size()) lo = polish(vmin, -1.0);
}

ConeExpansion cone_expansion(const MatrixXd& M, const ExtendedCone& from, const ExtendedCone& to,
                             const ConeTolerances& tol) {
  if (!sends_compactly(M, from, to, tol))
    throw PreconditionFailed("cone_expansion: M does not send the extended cone compactly",
                             "sends_compactly", 0.0);
  return cone_expansion_unchecked(M, from.outer_u, to.outer_s, tol);
}

ConeExpansion cone_expansion_unchecked(const MatrixXd& M, const GraphCone& unstable_from,
                                       const GraphCone& stable_to, const ConeTolerances& tol) {
  ConeExpansion out;
  expansion_range(M, unstable_from, out.u_min, out.u_max, tol);
  double m_lo = 0, m_hi = 0;
  expansion_range(M.inverse(), stable_to, m_lo, m_hi, tol);
  out.s_max = 1.0 / m_lo;
  out.s_min = 1.0 / m_hi;
  return out;
}

}  // namespace conehyp
