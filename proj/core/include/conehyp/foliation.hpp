#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "conehyp/cones.hpp"

namespace conehyp {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct FoliationClassParams {
  double C0 = 4.0;
  double C1 = 64.0;
  double alpha = 1.0;
  double beta = 0.5;
  Vec2 base = Vec2::Zero();
  GraphCone cone = GraphCone::axis2d(ConeKind::Stable, 0.5);

  void validate() const {
    if (!(C0 > 1.0 && C1 > 2.0 * C0))
      throw CertificationFailed("FoliationClassParams: need 1 < C0 < C1/2", "C0,C1");
    if (!(alpha > 0 && alpha <= 1 && beta > 0 && beta <= alpha))
      throw CertificationFailed("FoliationClassParams: exponents out of range", "alpha,beta");
  }
};

/// Grid samples of a chart (F(x,y), y) on B(base, C0): F values and DF = (Fx, Fy)
/// per node. Interpolation is cubic along y, linear along x.
class FoliationChart {
 public:
  FoliationClassParams params;
  double h = 0;
  int nx = 0, ny = 0;  // node counts per axis
  std::vector<double> F, Fx, Fy;

  static FoliationChart from_function(const FoliationClassParams& p, double h,
                                      const std::function<double(double, double)>& f,
                                      const std::function<Vec2(double, double)>& df = nullptr);

  double x0() const { return params.base.x() - params.C0; }
  double y0() const { return params.base.y() - params.C0; }
  double x1() const { return params.base.x() + params.C0; }
  double y1() const { return params.base.y() + params.C0; }
  bool in_domain(double x, double y, double margin = 0) const;

  double eval_F(double x, double y) const;
  Vec2 eval_DF(double x, double y) const;

  std::size_t idx(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(ix);
  }
};

struct QuotientWitness {
  Vec2 a = Vec2::Zero(), b = Vec2::Zero();
  double value = 0;  // measured quotient relative to the allowed bound
};

struct FoliationCertificate {
  bool passed = false;
  double worst_base_line = 0;    // max |F(x, y_base) - x|
  double worst_cone_slack = 0;   // min slack of (Fy, 1) in the stable cone
  QuotientWitness worst_y;       // y-Hoelder quotient relative to |dy|^alpha / C1
  QuotientWitness worst_x;       // x-Hoelder quotient relative to |dx|^beta / C1
  QuotientWitness worst_mixed;   // double difference relative to |dx|^beta |dy|^{alpha-beta} / C1
  double partial_x_dev = 0;      // max |Fx - 1|; must be <= C0^alpha / C1 < 1/2
  double global_beta_holder = 0; // measured constant of the d^beta bound
  double dclass_constant = 0;    // induced bi-Lipschitz constant of (F, y)
  std::string failure;
};

struct CertifyFoliationOptions {
  int column_stride = 4;               // every k-th column scanned exhaustively
  std::size_t rect_samples = 10000;    // random rectangle quadruples
  unsigned seed = 0;
  bool exhaustive = false;
  double min_separation_cells = 2.0;   // pair separation >= 2h
  double base_line_tol = 1e-10;
};

FoliationCertificate certify_foliation(const FoliationChart& chart,
                                       const CertifyFoliationOptions& opt = {});

/// Map of the plane sending vertical leaves to vertical leaves:
/// (x, y) -> (u(x), v(x, y)).
struct LeafMap {
  std::function<Vec2(const Vec2&)> f;
  std::function<Mat2(const Vec2&)> df;
  static LeafMap identity();
};

struct LeafMapCertificate {
  double sup_df = 0, sup_df_inv = 0, y_holder = 0;
  double constant() const { return std::max({sup_df, sup_df_inv, y_holder}); }
};

LeafMapCertificate certify_leaf_map(const LeafMap& m, const Vec2& lo, const Vec2& hi,
                                    double alpha, int samples_per_axis = 17);

struct PlanarMap {
  std::function<Vec2(const Vec2&)> f;
  std::function<Mat2(const Vec2&)> df;
  static PlanarMap affine(const Mat2& m, const Vec2& b);
  static PlanarMap shear_q(double p);        // (x, y - p x)
  static PlanarMap shear_qprime(double pp);  // (x - pp y, y)
};

struct StraightenOptions {
  double monotone_floor = 1e-6;
  double out_radius = 0;  // default sqrt(C0)
  double out_h = 0;       // default input h
  Vec2 out_base = Vec2::Zero();
};

struct StraightenResult {
  FoliationChart chart;  // standard-form output
  LeafMap psi;           // output ∘ psi = q ∘ input
  LeafMapCertificate psi_cert;
};

/// Restraighten q ∘ chart into standard form via per-column monotone
/// root-finding; q must send the chart's leaves to graphs over y.
StraightenResult straighten(const FoliationChart& chart, const PlanarMap& q,
                            const StraightenOptions& opt = {});

struct HyperbolicBranch2 {
  PlanarMap map;      // the diffeomorphism whose inverse pulls foliations back
  PlanarMap inverse;
  bool affine = true;
  static HyperbolicBranch2 from_affine(const Mat2& m, const Vec2& b);
};

struct GraphTransformConfig {
  double separation_factor = 2.0;  // required |m - m'| >= factor * C0
  double nonlinearity_eps = 1e-2;  // C^{1+alpha} distance of T^{-1} M to id
  double reinforce_slack = 1.0;    // 1.0 = require the reinforced constants exactly
  unsigned seed = 0;
};

struct GateMargin {
  std::string hypothesis;
  double margin = 0;  // positive = satisfied
};

struct GridSnapshot {
  Vec2 lo = Vec2::Zero(), hi = Vec2::Zero();
  int n = 0;
  std::vector<double> values;
};

struct GraphTransformDecomposition {
  FoliationChart output;  // admissible chart at the domain-side base point
  std::vector<int> kept_charts;
  std::vector<Vec2> base_points;       // image-side m (kept)
  std::vector<Vec2> projected_bases;   // Pi m
  std::vector<double> piqm;            // |Qm - Pi m|
  std::vector<FoliationChart> phi1;    // per-m straightened charts
  std::vector<LeafMap> psi_m;
  std::vector<LeafMapCertificate> psi_m_cert;
  Mat2 Q = Mat2::Identity(), Qp = Mat2::Identity(), D = Mat2::Identity();
  double A = 1, B = 1;
  LeafMap psi;  // final straightening
  LeafMapCertificate psi_cert;
  std::vector<GateMargin> gates;
  GridSnapshot phi2_snapshot, phi3_snapshot, phi4_snapshot;
  std::function<double(const Vec2&)> F2, F4;  // glued and pushed evaluators
  std::function<double(std::size_t, int, unsigned)> residual_fn;

  /// Max residual of (pullback-of-chart == output ∘ T_m) over sample points of
  /// the m-th kept chart, with T_m = psi ∘ D^{-1} ∘ psi_m.
  double factorization_residual(std::size_t kept_index, int samples = 200,
                                unsigned seed = 1) const;
};

/// Pulls the admissible charts at the (image-side) base points back through the
/// branch, glues them with a smoothstep bump, pushes through the hyperbolic
/// block-diagonal part, and restraightens, returning the admissible output
/// chart with the full factorization data.
GraphTransformDecomposition graph_transform(const std::vector<FoliationChart>& charts,
                                            const HyperbolicBranch2& branch,
                                            const Vec2& domain_base, const ExtendedCone& from,
                                            const ExtendedCone& to,
                                            const FoliationClassParams& out_params,
                                            const GraphTransformConfig& cfg = {});

}  // namespace conehyp
