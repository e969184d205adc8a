#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "conehyp/errors.hpp"

namespace conehyp {

using PlaneFn = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;

/// Bi-Lipschitz class membership on a sampled point set.
struct DClassResult {
  bool pass = false;
  double upper = 0;  // max |f(z)-f(z')| / |z-z'|
  double lower = 0;  // min |f(z)-f(z')| / |z-z'|
  std::pair<Eigen::Vector2d, Eigen::Vector2d> extremal;
};

DClassResult dclass_check(const PlaneFn& f, const std::vector<Eigen::Vector2d>& points, double C);

/// Matrix field on the plane; scalars are 1x1 matrices.
using MatField = std::function<Eigen::MatrixXd(double, double)>;

struct KNormParts {
  double sup = 0, qx = 0, qy = 0, qxy = 0;
  double norm() const { return std::max(std::max(sup, qx), std::max(qy, qxy)); }
};

struct KNormOptions {
  std::size_t pair_samples = 10000;
  unsigned seed = 0;
};

/// Empirical class norm: smallest constant satisfying the sup bound, the two
/// one-sided Hoelder bounds, and the mixed double-difference bound over the
/// sampled product grid (Frobenius matrix norm).
KNormParts kclass_norm(const MatField& k, const std::vector<double>& xs,
                       const std::vector<double>& ys, double alpha, double beta,
                       const KNormOptions& opt = {});

/// Worst quotient |K(x,y)-K(x,y')| / |y-y'|^{alpha-beta}; bounded by 2 norm(K).
double kclass_y2_quotient(const MatField& k, const std::vector<double>& xs,
                          const std::vector<double>& ys, double alpha, double beta,
                          const KNormOptions& opt = {});

/// Empirical range check: the ball B(f(z), r/C) lies in the convex hull of the
/// images of sampled points of B(z, r).
bool ddbigimage_check(const PlaneFn& f, const Eigen::Vector2d& z, double r, double C,
                      int boundary_samples = 256, int probe_dirs = 128, double slack = 0.98);

/// Bump-glued global extension z + gamma(z) (f(z) - z), equal to f on B(0, 1/2)
/// and to the identity outside B(0, 1).
PlaneFn lemextend_glue(const PlaneFn& f);

std::vector<double> linspace(double lo, double hi, int n);

}  // namespace conehyp
