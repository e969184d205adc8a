#include "conehyp/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace conehyp {

namespace {

struct DoublePoly {
  std::vector<Eigen::Vector2d> vs;
  bool contains(const Eigen::Vector2d& p) const {
    const std::size_t n = vs.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector2d a = vs[i], b = vs[(i + 1) % n];
      if ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x()) < -1e-12)
        return false;
    }
    return true;
  }
};

struct DoubleBranchView {
  std::vector<DoublePoly> domain;
  Eigen::Matrix2d m, minv;
  Eigen::Vector2d b;
  double det_abs = 1;

  bool member(const Eigen::Vector2d& q) const {
    for (const auto& p : domain)
      if (p.contains(q)) return true;
    return false;
  }
  Eigen::Vector2d apply(const Eigen::Vector2d& q) const { return m * q + b; }
  Eigen::Vector2d apply_inv(const Eigen::Vector2d& q) const { return minv * (q - b); }
};

struct DoubleMapView {
  std::vector<DoubleBranchView> branches;
  double x0, y0, x1, y1;
  bool px, py;
  DoublePoly carrier;

  explicit DoubleMapView(const PiecewiseMap& map) {
    Rational a, bb, c, d;
    map.carrier.polygon.bbox(a, bb, c, d);
    x0 = to_double(a);
    y0 = to_double(bb);
    x1 = to_double(c);
    y1 = to_double(d);
    px = map.carrier.periodic_x;
    py = map.carrier.periodic_y;
    for (const auto& v : map.carrier.polygon.vertices())
      carrier.vs.push_back({to_double(v.x), to_double(v.y)});
    for (const auto& br : map.branches) {
      if (!br.is_affine()) throw Error("operator numerics need the affine backend");
      DoubleBranchView g;
      const auto& ab = br.affine();
      g.m = ab.jac();
      g.minv = g.m.inverse();
      g.b = {to_double(ab.map.off.x), to_double(ab.map.off.y)};
      g.det_abs = ab.det_abs();
      for (const auto& piece : ab.domain.parts) {
        DoublePoly p;
        for (const auto& v : piece.vertices()) p.vs.push_back({to_double(v.x), to_double(v.y)});
        g.domain.push_back(std::move(p));
      }
      branches.push_back(std::move(g));
    }
  }

  Eigen::Vector2d wrap(Eigen::Vector2d q) const {
    if (px) {
      double l = x1 - x0;
      q.x() -= l * std::floor((q.x() - x0) / l);
    }
    if (py) {
      double l = y1 - y0;
      q.y() -= l * std::floor((q.y() - y0) / l);
    }
    return q;
  }
};

double branch_weight(const PiecewiseMap& map, std::size_t bi, const Eigen::Vector2d& q,
                     double det_abs) {
  return map.weight.eval(static_cast<int>(bi), q, det_abs);
}

UlamOperator build_ulam_mc(const PiecewiseMap& map, int nx, int ny, const UlamOptions& opt) {
  DoubleMapView view(map);
  UlamOperator op;
  op.nx = nx;
  op.ny = ny;
  op.x0 = view.x0;
  op.y0 = view.y0;
  op.lx = view.x1 - view.x0;
  op.ly = view.y1 - view.y0;
  op.exact = false;
  op.seed = opt.seed;
  op.mc_samples = opt.mc_samples;
  op.cols.assign(static_cast<std::size_t>(op.size()), {});
  op.col_sums.assign(static_cast<std::size_t>(op.size()), 0.0);

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  long long per_box = std::max<long long>(1, opt.mc_samples / op.size());
  double wx = op.lx / nx, wy = op.ly / ny;
  std::vector<double> acc(static_cast<std::size_t>(op.size()));
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int k = op.index(ix, iy);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (long long s = 0; s < per_box; ++s) {
        Eigen::Vector2d q(op.x0 + (ix + u01(rng)) * wx, op.y0 + (iy + u01(rng)) * wy);
        for (std::size_t bi = 0; bi < view.branches.size(); ++bi) {
          const auto& br = view.branches[bi];
          if (!br.member(q)) continue;
          Eigen::Vector2d p = view.wrap(br.apply(q));
          int jx = std::clamp(static_cast<int>((p.x() - op.x0) / wx), 0, nx - 1);
          int jy = std::clamp(static_cast<int>((p.y() - op.y0) / wy), 0, ny - 1);
          acc[static_cast<std::size_t>(op.index(jx, jy))] +=
              branch_weight(map, bi, q, br.det_abs) * br.det_abs;
          if (map.mode == MapMode::Standard) break;
        }
      }
      for (int j = 0; j < op.size(); ++j)
        if (acc[static_cast<std::size_t>(j)] > 0) {
          double val = acc[static_cast<std::size_t>(j)] / per_box;
          op.cols[static_cast<std::size_t>(k)].push_back({j, val});
          op.col_sums[static_cast<std::size_t>(k)] += val;
        }
    }
  return op;
}

}  // namespace

std::vector<double> UlamOperator::apply(const std::vector<double>& density) const {
  std::vector<double> out(static_cast<std::size_t>(size()), 0.0);
  for (int k = 0; k < size(); ++k) {
    double rk = density[static_cast<std::size_t>(k)];
    if (rk == 0.0) continue;
    for (const auto& [j, w] : cols[static_cast<std::size_t>(k)])
      out[static_cast<std::size_t>(j)] += w * rk;
  }
  return out;
}

UlamOperator build_ulam(const PiecewiseMap& map, int nx, int ny, const UlamOptions& opt) {
  // the measure-transfer pipeline needs an almost-everywhere single-valued
  // map; overlapping generalized-mode domains are analysis-only
  if (map.mode == MapMode::Generalized && map.all_affine()) {
    for (std::size_t i = 0; i < map.branches.size(); ++i)
      for (std::size_t j = i + 1; j < map.branches.size(); ++j)
        if (map.branches[i].affine().domain.intersect(map.branches[j].affine().domain).area2() !=
            0)
          throw Error("build_ulam: overlapping generalized-mode domains are analysis-only");
  }
  if (opt.kind == UlamOptions::Kind::MonteCarlo) return build_ulam_mc(map, nx, ny, opt);
  if (!map.all_affine()) return build_ulam_mc(map, nx, ny, opt);
  try {
    Rational cx0, cy0, cx1, cy1;
    map.carrier.polygon.bbox(cx0, cy0, cx1, cy1);
    UlamOperator op;
    op.nx = nx;
    op.ny = ny;
    op.x0 = to_double(cx0);
    op.y0 = to_double(cy0);
    op.lx = to_double(cx1 - cx0);
    op.ly = to_double(cy1 - cy0);
    op.exact = true;
    op.seed = opt.seed;
    op.cols.assign(static_cast<std::size_t>(op.size()), {});
    op.col_sums.assign(static_cast<std::size_t>(op.size()), 0.0);

    Rational wx = (cx1 - cx0) / nx, wy = (cy1 - cy0) / ny;
    Rational cell = wx * wy;
    auto box_at = [&](int ix, int iy) {
      return ConvexPolygon::box(cx0 + wx * ix, cy0 + wy * iy, cx0 + wx * (ix + 1),
                                cy0 + wy * (iy + 1));
    };

    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        int k = op.index(ix, iy);
        ConvexPolygon box = box_at(ix, iy);
        std::vector<double> acc(static_cast<std::size_t>(op.size()), 0.0);
        std::vector<int> touched;
        for (std::size_t bi = 0; bi < map.branches.size(); ++bi) {
          const auto& ab = map.branches[bi].affine();
          double g = branch_weight(map, bi,
                                   {op.x0 + (ix + 0.5) * to_double(wx),
                                    op.y0 + (iy + 0.5) * to_double(wy)},
                                   ab.det_abs());
          for (const auto& dp : ab.domain.parts) {
            ConvexPolygon piece = dp.intersect(box);
            if (piece.empty()) continue;
            if (piece.max_coord_bits() > 4096)
              throw ArithmeticOverflow("build_ulam: bit budget exceeded");
            ConvexPolygon img = piece.image(ab.map);
            // wrap the image into the carrier by integer lattice shifts
            std::vector<Vec2R> shifts{{Rational(0), Rational(0)}};
            if (map.carrier.periodic_x || map.carrier.periodic_y) {
              shifts.clear();
              Rational bx0, by0, bx1, by1;
              img.bbox(bx0, by0, bx1, by1);
              long kx0 = 0, kx1 = 0, ky0 = 0, ky1 = 0;
              if (map.carrier.periodic_x) {
                kx0 = static_cast<long>(std::floor(to_double((cx0 - bx1) / (cx1 - cx0)))) - 1;
                kx1 = static_cast<long>(std::ceil(to_double((cx1 - bx0) / (cx1 - cx0)))) + 1;
              }
              if (map.carrier.periodic_y) {
                ky0 = static_cast<long>(std::floor(to_double((cy0 - by1) / (cy1 - cy0)))) - 1;
                ky1 = static_cast<long>(std::ceil(to_double((cy1 - by0) / (cy1 - cy0)))) + 1;
              }
              for (long sx = kx0; sx <= kx1; ++sx)
                for (long sy = ky0; sy <= ky1; ++sy)
                  shifts.push_back({Rational(sx) * (cx1 - cx0), Rational(sy) * (cy1 - cy0)});
            }
            for (const auto& sh : shifts) {
              ConvexPolygon moved = img.translate(sh);
              Rational bx0, by0, bx1, by1;
              moved.bbox(bx0, by0, bx1, by1);
              int jx0 = std::max(0, static_cast<int>(std::floor(to_double((bx0 - cx0) / wx))));
              int jx1 = std::min(nx - 1, static_cast<int>(std::floor(to_double((bx1 - cx0) / wx))));
              int jy0 = std::max(0, static_cast<int>(std::floor(to_double((by0 - cy0) / wy))));
              int jy1 = std::min(ny - 1, static_cast<int>(std::floor(to_double((by1 - cy0) / wy))));
              for (int jy = jy0; jy <= jy1; ++jy)
                for (int jx = jx0; jx <= jx1; ++jx) {
                  ConvexPolygon clip = moved.intersect(box_at(jx, jy));
                  if (clip.empty()) continue;
                  // mass = g * |det| * Leb(source piece mapped here) = g * Leb(image clip)
                  Rational area2 = clip.area2();
                  double mass = g * to_double(area2) / 2.0;
                  int j = op.index(jx, jy);
                  if (acc[static_cast<std::size_t>(j)] == 0.0) touched.push_back(j);
                  acc[static_cast<std::size_t>(j)] += mass / to_double(cell);
                }
            }
          }
        }
        std::sort(touched.begin(), touched.end());
        for (int j : touched) {
          op.cols[static_cast<std::size_t>(k)].push_back({j, acc[static_cast<std::size_t>(j)]});
          op.col_sums[static_cast<std::size_t>(k)] += acc[static_cast<std::size_t>(j)];
        }
      }
    return op;
  } catch (const ArithmeticOverflow&) {
    UlamOperator op = build_ulam_mc(map, nx, ny, opt);
    op.degraded_to_monte_carlo = true;
    return op;
  }
}

InvariantDensityResult invariant_density(const UlamOperator& op, int max_densities, int top_k,
                                         int max_iter, double tol) {
  InvariantDensityResult res;
  const int n = op.size();
  const double cell = op.cell_area();

  auto l1 = [&](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += std::abs(x);
    return s * cell;
  };
  auto normalize = [&](std::vector<double>& v) {
    double s = l1(v);
    if (s > 0)
      for (double& x : v) x /= s;
    return s;
  };

  // leading fixed vector
  std::vector<double> v(static_cast<std::size_t>(n), 1.0);
  normalize(v);
  double lead = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    std::vector<double> w = op.apply(v);
    lead = l1(w);
    normalize(w);
    double diff = 0;
    for (int i = 0; i < n; ++i) diff = std::max(diff, std::abs(w[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i)]));
    v.swap(w);
    if (diff < tol) break;
  }
  if (it >= max_iter) throw NoConvergence("invariant_density: power iteration did not converge");
  res.leading = lead;
  res.iterations = it;

  std::vector<std::vector<double>> dens{v};
  if (max_densities > 1) {
    // deflated iteration toward a second unit-eigenvalue direction
    std::mt19937_64 rng(op.seed + 1234567u);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (double& x : w) x = u(rng);
    auto project_out = [&](std::vector<double>& a) {
      double num = 0, den = 0;
      for (int i = 0; i < n; ++i) {
        num += a[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
        den += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
      }
      double c = den > 0 ? num / den : 0;
      for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] -= c * v[static_cast<std::size_t>(i)];
    };
    project_out(w);
    double l2 = 0;
    for (double x : w) l2 += x * x;
    if (l2 > 0)
      for (double& x : w) x /= std::sqrt(l2);
    double lam2 = 0;
    for (int k = 0; k < max_iter / 4; ++k) {
      std::vector<double> w2 = op.apply(w);
      project_out(w2);
      double nl = 0;
      for (double x : w2) nl += x * x;
      nl = std::sqrt(nl);
      if (nl < 1e-300) break;
      for (double& x : w2) x /= nl;
      lam2 = nl;
      double diff = 0;
      for (int i = 0; i < n; ++i)
        diff = std::max(diff, std::abs(std::abs(w2[static_cast<std::size_t>(i)]) - std::abs(w[static_cast<std::size_t>(i)])));
      w.swap(w2);
      if (diff < 1e-12) break;
    }
    if (lam2 > 1.0 - 1e-8) {
      // split into nonnegative fixed parts (disjoint ergodic supports)
      std::vector<double> pos(static_cast<std::size_t>(n)), neg(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        pos[static_cast<std::size_t>(i)] = std::max(w[static_cast<std::size_t>(i)], 0.0);
        neg[static_cast<std::size_t>(i)] = std::max(-w[static_cast<std::size_t>(i)], 0.0);
      }
      auto is_fixed = [&](std::vector<double>& a) {
        if (l1(a) < 1e-8) return false;
        normalize(a);
        std::vector<double> b = op.apply(a);
        double diff = 0;
        for (int i = 0; i < n; ++i) diff = std::max(diff, std::abs(b[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)]));
        return diff < 1e-7;
      };
      if (is_fixed(pos) && is_fixed(neg)) dens = {pos, neg};
    }
  }
  res.densities = std::move(dens);

  // Arnoldi for the leading part of the spectrum
  {
    const int m = std::min(n, std::max(top_k * 4, 24));
    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    std::mt19937_64 rng(op.seed + 7u);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd q0(n);
    for (int i = 0; i < n; ++i) q0(i) = 1.0 + 0.01 * u(rng);
    q0.normalize();
    V.col(0) = q0;
    int built = 0;
    for (int j = 0; j < m; ++j) {
      std::vector<double> tmp(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) tmp[static_cast<std::size_t>(i)] = V(i, j);
      std::vector<double> av = op.apply(tmp);
      Eigen::VectorXd wv(n);
      for (int i = 0; i < n; ++i) wv(i) = av[static_cast<std::size_t>(i)];
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(wv);
        wv -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = wv.norm();
      built = j + 1;
      if (H(j + 1, j) < 1e-12) break;
      V.col(j + 1) = wv / H(j + 1, j);
    }
    Eigen::MatrixXd Hs = H.topLeftCorner(built, built);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Hs);
    std::vector<std::complex<double>> ev(static_cast<std::size_t>(built));
    for (int i = 0; i < built; ++i) ev[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    std::sort(ev.begin(), ev.end(),
              [](const std::complex<double>& a, const std::complex<double>& b) {
                return std::abs(a) > std::abs(b);
              });
    if (static_cast<int>(ev.size()) > top_k) ev.resize(static_cast<std::size_t>(top_k));
    res.eigenvalues = std::move(ev);
    double second = 0;
    for (const auto& e : res.eigenvalues)
      if (std::abs(e) < res.leading - 1e-9) {
        second = std::abs(e);
        break;
      }
    res.mixing_gap_estimate = res.leading - second;
  }
  return res;
}

double adjoint_residual(const PiecewiseMap& map, const std::function<double(double, double)>& u,
                        const std::function<double(double, double)>& v, int quad_n) {
  DoubleMapView view(map);
  const double wx = (view.x1 - view.x0) / quad_n;
  const double wy = (view.y1 - view.y0) / quad_n;
  const double cell = wx * wy;

  // lattice shifts that can reach the carrier from a branch image
  auto preimages = [&](const Eigen::Vector2d& x, std::vector<std::pair<std::size_t, Eigen::Vector2d>>& out) {
    out.clear();
    int kx = view.px ? 2 : 0, ky = view.py ? 2 : 0;
    double lxp = view.x1 - view.x0, lyp = view.y1 - view.y0;
    for (std::size_t bi = 0; bi < view.branches.size(); ++bi) {
      const auto& br = view.branches[bi];
      for (int sx = -kx; sx <= kx; ++sx)
        for (int sy = -ky; sy <= ky; ++sy) {
          Eigen::Vector2d y = br.apply_inv(x + Eigen::Vector2d(sx * lxp, sy * lyp));
          if (br.member(y)) out.push_back({bi, y});
        }
    }
  };

  double lhs = 0, rhs = 0;
  std::vector<std::pair<std::size_t, Eigen::Vector2d>> pre;
  for (int j = 0; j < quad_n; ++j)
    for (int i = 0; i < quad_n; ++i) {
      Eigen::Vector2d x(view.x0 + (i + 0.5) * wx, view.y0 + (j + 0.5) * wy);
      if (!view.carrier.contains(x)) continue;
      // forward side: u(x) (L_g v)(x)
      preimages(x, pre);
      double lv = 0;
      for (const auto& [bi, y] : pre)
        lv += branch_weight(map, bi, y, view.branches[bi].det_abs) * v(y.x(), y.y());
      lhs += u(x.x(), x.y()) * lv * cell;
      // dual side: (sum_i 1_{O_i} |det| g_i u ∘ T_i)(x) v(x)
      double du = 0;
      for (std::size_t bi = 0; bi < view.branches.size(); ++bi) {
        const auto& br = view.branches[bi];
        if (!br.member(x)) continue;
        Eigen::Vector2d tx = view.wrap(br.apply(x));
        du += br.det_abs * branch_weight(map, bi, x, br.det_abs) * u(tx.x(), tx.y());
        if (map.mode == MapMode::Standard) break;
      }
      rhs += du * v(x.x(), x.y()) * cell;
    }
  return std::abs(lhs - rhs);
}

BasinScanResult birkhoff_basin_scan(const PiecewiseMap& map,
                                    const std::function<double(double, double)>& observable,
                                    int horizon, int samples, unsigned seed,
                                    const UlamOperator& op,
                                    const std::vector<std::vector<double>>& densities,
                                    double tol) {
  DoubleMapView view(map);
  BasinScanResult res;
  const double wx = op.lx / op.nx, wy = op.ly / op.ny;
  for (const auto& d : densities) {
    double mean = 0;
    for (int iy = 0; iy < op.ny; ++iy)
      for (int ix = 0; ix < op.nx; ++ix)
        mean += observable(op.x0 + (ix + 0.5) * wx, op.y0 + (iy + 0.5) * wy) *
                d[static_cast<std::size_t>(op.index(ix, iy))] * op.cell_area();
    res.density_means.push_back(mean);
  }
  res.fractions.assign(densities.size(), 0.0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(view.x0, view.x1), uy(view.y0, view.y1);
  int undecided = 0;
  for (int s = 0; s < samples; ++s) {
    Eigen::Vector2d q;
    do {
      q = {ux(rng), uy(rng)};
    } while (!view.carrier.contains(q));
    double acc = 0;
    bool alive = true;
    int steps = 0;
    for (int k = 0; k < horizon && alive; ++k) {
      acc += observable(q.x(), q.y());
      ++steps;
      alive = false;
      for (const auto& br : view.branches) {
        if (br.member(q)) {
          q = view.wrap(br.apply(q));
          alive = true;
          break;
        }
      }
    }
    int label = -1;
    if (steps == horizon) {
      double avg = acc / steps;
      double best = tol;
      for (std::size_t d = 0; d < res.density_means.size(); ++d) {
        double dist = std::abs(avg - res.density_means[d]);
        if (dist < best) {
          best = dist;
          label = static_cast<int>(d);
        }
      }
    }
    res.labels.push_back(label);
    if (label < 0) ++undecided;
    else res.fractions[static_cast<std::size_t>(label)] += 1.0;
  }
  for (double& f : res.fractions) f /= samples;
  res.undecided_fraction = static_cast<double>(undecided) / samples;
  return res;
}

}  // namespace conehyp
