#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "conehyp/errors.hpp"

namespace conehyp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ConeKind { Stable, Unstable };

struct ConeTolerances {
  double angular_margin = 1e-3;   // radians; below it decisions raise IndeterminateMargin
  double exact2d_eps = 1e-12;     // sector-angle comparisons in d = 2
  double frame_cond_cap = 1e8;
  int boundary_samples_per_dsq = 64;  // 64 * d^2 directions
  int max_refinements = 3;
};

/// A graph cone: the frame image of {|x| <= |A y|} (stable kind, core block y of
/// dimension d_s) or {|y| <= |A x|} (unstable kind, core block x of dimension d_u).
class GraphCone {
 public:
  /// Default: the 2-D axis-aligned stable cone {|x| <= |y|/2}.
  GraphCone();
  GraphCone(MatrixXd frame, int du, int ds, ConeKind kind, MatrixXd aperture,
            bool allow_degenerate = false);

  // identity-frame helpers
  static GraphCone stable(int du, int ds, MatrixXd aperture);
  static GraphCone unstable(int du, int ds, MatrixXd aperture);
  // 2-D axis cones: stable = {|x| <= a |y|}, unstable = {|y| <= a |x|}
  static GraphCone axis2d(ConeKind kind, double aperture, bool allow_degenerate = false);

  int dim() const { return du_ + ds_; }
  int du() const { return du_; }
  int ds() const { return ds_; }
  ConeKind kind() const { return kind_; }
  /// Dimension of the maximal subspace contained in the cone.
  int core_dim() const { return kind_ == ConeKind::Stable ? ds_ : du_; }
  int off_dim() const { return dim() - core_dim(); }
  bool degenerate() const { return degenerate_; }

  const MatrixXd& frame() const { return frame_; }
  const MatrixXd& frame_inv() const { return frame_inv_; }
  const MatrixXd& aperture() const { return aperture_; }
  double aperture_norm() const { return aperture_norm_; }

  bool contains(const VectorXd& v) const;
  /// Model-coordinate membership slack, normalized: (|A core| - |off|)/|z|.
  /// Nonnegative inside the cone; Lipschitz constant <= 1 + |A| on unit vectors.
  double slack(const VectorXd& v) const;
  /// True if every direction within `margin` radians (model coordinates) of v
  /// stays inside the cone.
  bool contains_with_margin(const VectorXd& v, double margin) const;

  /// Unit direction of the cone's core axis image (2-D only, for diagnostics).
  Eigen::Vector2d axis2() const;

  /// Angular interval of ambient directions mod pi (2-D only), width < pi.
  struct Sector {
    double lo, hi;  // hi - lo = width in (0, pi); angles mod pi
  };
  Sector sector() const;

  /// Model coordinates of an ambient vector: (off block, core block).
  void split_model(const VectorXd& v, VectorXd& off, VectorXd& core) const;

  /// Deterministic boundary + interior direction samples (ambient coordinates).
  std::vector<VectorXd> sample_directions(int count, unsigned seed) const;

 private:
  MatrixXd frame_, frame_inv_, aperture_;
  int du_, ds_;
  ConeKind kind_;
  bool degenerate_;
  double aperture_norm_;
};

/// Quadruple (outer_s, inner_s, outer_u, inner_u) with inner cones compactly
/// inside the outer ones and outer_s, outer_u convexly transverse.
struct ExtendedCone {
  GraphCone outer_s, inner_s, outer_u, inner_u;

  /// Axis-aligned 2-D extended cone with the given outer/inner apertures.
  static ExtendedCone axis2d(double outer_aperture, double inner_aperture);
  /// Validates the defining inclusions; throws CertificationFailed.
  void validate(const ConeTolerances& tol = {}) const;
};

/// Factor range of |Mv|/|v| on the unstable cone (u_min..u_max) and of the
/// contraction factors on the stable side, measured through M^{-1} on the
/// image stable cone (s_min..s_max).
struct ConeExpansion {
  double u_min = 0, u_max = 0;
  double s_min = 0, s_max = 0;
  bool hyperbolic() const { return u_min > 1.0 && s_max < 1.0; }
};

bool contains(const GraphCone& cone, const VectorXd& v);

/// Trivial-intersection test for complementary graph cones. In d = 2 the answer
/// is exact sector arithmetic; in d >= 3 a sufficient operator-norm bound
/// certifies the trivial side and an interior witness certifies the other.
bool convexly_transverse(const GraphCone& c1, const GraphCone& c2,
                         const ConeTolerances& tol = {});

/// True iff M maps from.outer_u into to.inner_u and M^{-1} maps to.outer_s into
/// from.inner_s, with the configured angular margin.
bool sends_compactly(const MatrixXd& M, const ExtendedCone& from, const ExtendedCone& to,
                     const ConeTolerances& tol = {});

/// Factor range of |Mv|/|v| over unit vectors of a plain graph cone.
/// Closed form in d = 2 (boundary rays + interior critical angles of |Mv(theta)|^2),
/// projected ascent/descent with dense-sampling fallback in d >= 3.
void expansion_range(const MatrixXd& M, const GraphCone& cone, double& lo, double& hi,
                     const ConeTolerances& tol = {});

ConeExpansion cone_expansion(const MatrixXd& M, const ExtendedCone& from,
                             const ExtendedCone& to, const ConeTolerances& tol = {});

/// Expansion data without the compact-sending precondition; used by the
/// certification paths that establish the cone conditions themselves.
ConeExpansion cone_expansion_unchecked(const MatrixXd& M, const GraphCone& unstable_from,
                                       const GraphCone& stable_to,
                                       const ConeTolerances& tol = {});

}  // namespace conehyp
