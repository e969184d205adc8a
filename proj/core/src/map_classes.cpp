#include "conehyp/map_classes.hpp"

#include <cmath>
#include <random>

namespace conehyp {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1.0);
  return v;
}

DClassResult dclass_check(const PlaneFn& f, const std::vector<Eigen::Vector2d>& points, double C) {
  DClassResult r;
  r.lower = 1e300;
  std::vector<Eigen::Vector2d> img(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) img[i] = f(points[i]);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      double dz = (points[i] - points[j]).norm();
      if (dz < 1e-12) continue;
      double q = (img[i] - img[j]).norm() / dz;
      if (q > r.upper) {
        r.upper = q;
        r.extremal = {points[i], points[j]};
      }
      if (q < r.lower) {
        r.lower = q;
        if (q * C < 1.0) r.extremal = {points[i], points[j]};
      }
    }
  r.pass = r.upper <= C + 1e-12 && r.lower >= 1.0 / C - 1e-12;
  return r;
}

namespace {

struct GridCache {
  std::vector<Eigen::MatrixXd> vals;
  int nx, ny;
  const Eigen::MatrixXd& at(int i, int j) const {
    return vals[static_cast<std::size_t>(j) * nx + i];
  }
};

GridCache cache_field(const MatField& k, const std::vector<double>& xs,
                      const std::vector<double>& ys) {
  GridCache g;
  g.nx = static_cast<int>(xs.size());
  g.ny = static_cast<int>(ys.size());
  g.vals.reserve(static_cast<std::size_t>(g.nx) * g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      g.vals.push_back(k(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]));
  return g;
}

}  // namespace

KNormParts kclass_norm(const MatField& k, const std::vector<double>& xs,
                       const std::vector<double>& ys, double alpha, double beta,
                       const KNormOptions& opt) {
  GridCache g = cache_field(k, xs, ys);
  KNormParts parts;
  for (const auto& m : g.vals) parts.sup = std::max(parts.sup, m.norm());

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> ux(0, g.nx - 1), uy(0, g.ny - 1);
  auto dx = [&](int i, int i2) { return std::abs(xs[static_cast<std::size_t>(i2)] - xs[static_cast<std::size_t>(i)]); };
  auto dy = [&](int j, int j2) { return std::abs(ys[static_cast<std::size_t>(j2)] - ys[static_cast<std::size_t>(j)]); };

  // structured sweeps along rows/columns plus random pairs
  for (int j = 0; j < g.ny; j += 3)
    for (int i = 0; i + 1 < g.nx; ++i)
      for (int i2 = i + 1; i2 < g.nx; i2 += 7)
        parts.qx = std::max(parts.qx, (g.at(i, j) - g.at(i2, j)).norm() / std::pow(dx(i, i2), beta));
  for (int i = 0; i < g.nx; i += 3)
    for (int j = 0; j + 1 < g.ny; ++j)
      for (int j2 = j + 1; j2 < g.ny; j2 += 7)
        parts.qy = std::max(parts.qy, (g.at(i, j) - g.at(i, j2)).norm() / std::pow(dy(j, j2), alpha));
  for (std::size_t s = 0; s < opt.pair_samples; ++s) {
    int i = ux(rng), i2 = ux(rng), j = uy(rng), j2 = uy(rng);
    if (i == i2 || j == j2) continue;
    parts.qx = std::max(parts.qx, (g.at(i, j) - g.at(i2, j)).norm() / std::pow(dx(i, i2), beta));
    parts.qy = std::max(parts.qy, (g.at(i, j) - g.at(i, j2)).norm() / std::pow(dy(j, j2), alpha));
    double num = (g.at(i, j) - g.at(i2, j) - g.at(i, j2) + g.at(i2, j2)).norm();
    parts.qxy = std::max(parts.qxy,
                         num / (std::pow(dx(i, i2), beta) * std::pow(dy(j, j2), alpha - beta)));
  }
  return parts;
}

double kclass_y2_quotient(const MatField& k, const std::vector<double>& xs,
                          const std::vector<double>& ys, double alpha, double beta,
                          const KNormOptions& opt) {
  GridCache g = cache_field(k, xs, ys);
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> ux(0, g.nx - 1), uy(0, g.ny - 1);
  double q = 0;
  for (std::size_t s = 0; s < opt.pair_samples; ++s) {
    int i = ux(rng), j = uy(rng), j2 = uy(rng);
    if (j == j2) continue;
    double d = std::abs(ys[static_cast<std::size_t>(j2)] - ys[static_cast<std::size_t>(j)]);
    q = std::max(q, (g.at(i, j) - g.at(i, j2)).norm() / std::pow(d, alpha - beta));
  }
  return q;
}

bool ddbigimage_check(const PlaneFn& f, const Eigen::Vector2d& z, double r, double C,
                      int boundary_samples, int probe_dirs, double slack) {
  std::vector<Eigen::Vector2d> img;
  img.reserve(static_cast<std::size_t>(boundary_samples) + 1);
  for (int k = 0; k < boundary_samples; ++k) {
    double th = 2 * M_PI * k / boundary_samples;
    img.push_back(f(z + r * Eigen::Vector2d(std::cos(th), std::sin(th))));
  }
  Eigen::Vector2d fz = f(z);
  // support-function containment of the disk B(fz, slack r / C) in the hull
  for (int k = 0; k < probe_dirs; ++k) {
    double th = 2 * M_PI * k / probe_dirs;
    Eigen::Vector2d dir(std::cos(th), std::sin(th));
    double best = -1e300;
    for (const auto& p : img) best = std::max(best, dir.dot(p - fz));
    if (best < slack * r / C) return false;
  }
  return true;
}

PlaneFn lemextend_glue(const PlaneFn& f) {
  return [f](const Eigen::Vector2d& z) {
    double rn = z.norm();
    double u = (1.0 - rn) / 0.5;  // 1 inside radius 1/2, 0 outside radius 1
    u = std::clamp(u, 0.0, 1.0);
    double g = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    if (g == 0.0) return z;
    Eigen::Vector2d psi = f(z) - z;
    return Eigen::Vector2d(z + g * psi);
  };
}

}  // namespace conehyp
