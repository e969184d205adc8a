#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "conehyp/cones.hpp"
#include "conehyp/exact.hpp"

namespace conehyp {

struct Dimensions {
  int d = 2, du = 1, ds = 1;
  void validate() const {
    if (d != du + ds || d < 2 || du < 1 || ds < 1)
      throw CertificationFailed("Dimensions: need d = du + ds, du >= 1, ds >= 1", "dimensions");
  }
};

struct AffineBranch {
  PolyRegion domain;  // closure pieces of O_i inside the carrier
  AffineMapR map;
  double extension_pad = 0.05;

  Eigen::Matrix2d jac() const {
    Eigen::Matrix2d m;
    m << to_double(map.lin.a), to_double(map.lin.b), to_double(map.lin.c), to_double(map.lin.d);
    return m;
  }
  double det_abs() const { return std::abs(to_double(map.lin.det())); }
};

struct OracleBranch {
  std::function<bool(const Eigen::Vector2d&)> member;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> map;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&)> jacobian;
  double holder_alpha = 1.0;
  double holder_const = 0.0;  // Hoelder constant of the Jacobian
  double extension_pad = 0.05;
  Eigen::AlignedBox2d bbox;
};

struct Branch {
  std::variant<AffineBranch, OracleBranch> impl;
  bool is_affine() const { return std::holds_alternative<AffineBranch>(impl); }
  const AffineBranch& affine() const { return std::get<AffineBranch>(impl); }
  const OracleBranch& oracle() const { return std::get<OracleBranch>(impl); }
};

enum class WeightKind { OneOverDet, ConstantOne, Custom };

struct WeightSpec {
  WeightKind kind = WeightKind::OneOverDet;
  double holder_gamma = 1.0;
  std::function<double(int, const Eigen::Vector2d&)> evaluator;  // custom g_i(q)

  double eval(int branch, const Eigen::Vector2d& q, double det_abs) const {
    switch (kind) {
      case WeightKind::OneOverDet:
        return 1.0 / det_abs;
      case WeightKind::ConstantOne:
        return 1.0;
      case WeightKind::Custom:
        return evaluator(branch, q);
    }
    return 1.0;
  }
};

enum class MapMode { Standard, Generalized };

struct ConeDomain {
  PolyRegion region;
  GraphCone unstable, stable;
};

struct Carrier {
  ConvexPolygon polygon;
  bool periodic_x = false, periodic_y = false;
  Rational period_x{1}, period_y{1};  // lattice spacing when periodic
};

/// One C^1 boundary piece; carrier_edge marks pieces on a non-periodic carrier
/// side (excluded from the transversality requirements, reported separately).
struct BoundarySegment {
  SegmentR seg;
  std::vector<int> branches;  // adjacent branch indices
  bool carrier_edge = false;
  bool cone_domain_boundary = false;
};

class PiecewiseMap {
 public:
  Dimensions dims;
  Carrier carrier;
  std::vector<Branch> branches;
  std::vector<ConeDomain> cone_domains;
  WeightSpec weight;
  MapMode mode = MapMode::Standard;
  std::string name;
  std::vector<BoundarySegment> boundary_pieces;

  bool all_affine() const;
  int cone_index_at(const Vec2R& q) const;  // -1 when not covered
  int cone_index_at(const Eigen::Vector2d& q) const;
  const ConeDomain& cone_at(const Vec2R& q) const;
  /// Recompute boundary_pieces from branch domains + cone domains.
  void rebuild_boundary_pieces();
  std::string content_hash() const;
};

// ---------------------------------------------------------------------------
// cylinders

struct CylinderPiece {
  ConvexPolygon poly;   // closure of the piece
  AffineMapR composed;  // exact composed branch map valid on the piece
};

struct CoeffInterval {
  double lo = 0, hi = 0;
};

/// Cone-restricted coefficient enclosures of the composed branch over the
/// cylinder region: factor ranges of the expansion on the unstable cone and of
/// the contraction on the stable side, plus weight/determinant data.
struct CylinderCoeffs {
  CoeffInterval u_min, u_max;  // enclosure of the weakest/strongest expansion
  CoeffInterval s_min, s_max;  // enclosure of the strongest/weakest contraction
  CoeffInterval det_abs;       // |det DT^n| over the region
  CoeffInterval weight_abs;    // sup-range of |g^{(n)}|
};

struct ItineraryCylinder {
  std::vector<int> word;
  std::vector<CylinderPiece> pieces;
  std::optional<CylinderCoeffs> coeffs;

  Rational region_area2() const;
  PolyRegion region() const;
  PolyRegion image_region() const;
};

struct EnumerationOptions {
  std::size_t explosion_cap = 1000000;
  std::size_t bit_budget = 4096;
};

std::vector<ItineraryCylinder> enumerate_cylinders(const PiecewiseMap& map, int n,
                                                   const EnumerationOptions& opt = {});

/// Sampling backend: itineraries of a seeded point cloud.
struct SampledCylinder {
  std::vector<int> word;
  std::vector<Eigen::Vector2d> points;
  double confidence = 0.0;  // fraction of the cloud landing in this cylinder
};

std::vector<SampledCylinder> enumerate_cylinders_sampled(const PiecewiseMap& map, int n,
                                                         int samples, unsigned seed);

// ---------------------------------------------------------------------------
// builtins

PiecewiseMap builtin_baker();
PiecewiseMap builtin_doubling();
/// Single unwrapped linear branch; the carrier is marked fully periodic so the
/// measure-transfer paths unfold it over the integer lattice.
PiecewiseMap builtin_toral(const Mat2R& m);
PiecewiseMap builtin_lozi(const Rational& a, const Rational& b,
                          const ConvexPolygon& invariant_domain);
/// Default compact invariant quadrilateral for the classic parameters (1.7, 0.5).
ConvexPolygon lozi_default_domain();
PiecewiseMap builtin_by_name(const std::string& name);

/// Inverse of an invertible all-affine standard-mode map; branch domains become
/// the images and the cone field swaps stable/unstable roles.
PiecewiseMap invert(const PiecewiseMap& map);

// ---------------------------------------------------------------------------
// certification

struct TransitionVerdict {
  int branch = 0;
  int from_region = 0, to_region = 0;
  double margin_u = 0, margin_s = 0;  // strict cone-inclusion margins (radians)
  ConeExpansion expansion;
  bool cone_invariance = false;
  bool hyperbolic = false;
};

struct TransversalityVerdict {
  int piece = 0;
  int branch = -1;
  double margin = 0;  // angular distance to the relevant cone; negative inside
  bool transverse = false;
  bool carrier_edge = false;
  std::string check;  // standard | image | dual_domain | dual_preimage
};

struct CertificationReport {
  std::vector<TransitionVerdict> transitions;
  std::vector<TransversalityVerdict> transversality;
  bool domains_disjoint = true;
  bool domains_cover = true;
  bool cones_ok = false;
  bool hyperbolic_ok = false;
  bool transversality_standard_ok = false;
  bool transversality_image_ok = false;   // Appendix-style time-1 condition
  bool transversality_dual_ok = false;    // time-reversed condition
  double weakest_expansion = 0;           // min per-transition u_min
  double weakest_contraction_bound = 0;   // max per-transition s_max
  unsigned seed = 0;

  bool forward_certified() const {
    return cones_ok && hyperbolic_ok && transversality_image_ok;
  }
  bool dual_certified() const { return cones_ok && hyperbolic_ok && transversality_dual_ok; }
};

CertificationReport certify(const PiecewiseMap& map, unsigned seed = 0,
                            const ConeTolerances& tol = {});

}  // namespace conehyp
