#include "conehyp/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace conehyp {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::Vector2d v2d(const Vec2R& v) { return {to_double(v.x), to_double(v.y)}; }

double angle_mod_pi(double x, double y) {
  double a = std::atan2(y, x);
  while (a < 0) a += kPi;
  while (a >= kPi) a -= kPi;
  return a;
}

/// Signed angular distance from direction angle t (mod pi) to a sector:
/// positive = outside by that angle, negative = inside by that depth.
double sector_distance(double t, const GraphCone::Sector& s) {
  double best_outside = 1e9;
  double best_inside = -1e9;
  for (int k = -2; k <= 2; ++k) {
    double tt = t + k * kPi;
    if (tt >= s.lo && tt <= s.hi) best_inside = std::max(best_inside, -std::min(tt - s.lo, s.hi - tt));
    else best_outside = std::min(best_outside, tt < s.lo ? s.lo - tt : tt - s.hi);
  }
  return best_inside > -1e9 ? best_inside : best_outside;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool carrier_is_box(const Carrier& c, Rational& x0, Rational& y0, Rational& x1, Rational& y1) {
  c.polygon.bbox(x0, y0, x1, y1);
  ConvexPolygon b = ConvexPolygon::box(x0, y0, x1, y1);
  return b.canonical_key() == c.polygon.canonical_key();
}

}  // namespace

bool PiecewiseMap::all_affine() const {
  for (const auto& b : branches)
    if (!b.is_affine()) return false;
  return true;
}

int PiecewiseMap::cone_index_at(const Vec2R& q) const {
  for (std::size_t i = 0; i < cone_domains.size(); ++i)
    if (cone_domains[i].region.contains_closed(q)) return static_cast<int>(i);
  return -1;
}

int PiecewiseMap::cone_index_at(const Eigen::Vector2d& q) const {
  // doubles convert to rationals exactly
  return cone_index_at(Vec2R{Rational(q.x()), Rational(q.y())});
}

const ConeDomain& PiecewiseMap::cone_at(const Vec2R& q) const {
  int i = cone_index_at(q);
  if (i < 0) throw Error("cone_at: point is outside every cone domain");
  return cone_domains[static_cast<std::size_t>(i)];
}

namespace {

struct SeamEdge {
  SegmentR seg;  // normalized onto the low line
  int branch;
  bool from_high_side;  // edge was on the high line (left neighbor of the seam)
};

bool on_line_x(const SegmentR& s, const Rational& x) { return s.a.x == x && s.b.x == x; }
bool on_line_y(const SegmentR& s, const Rational& y) { return s.a.y == y && s.b.y == y; }

std::string seg_key(const SegmentR& s) {
  Vec2R a = s.a, b = s.b;
  if (b.x < a.x || (b.x == a.x && b.y < a.y)) std::swap(a, b);
  std::ostringstream os;
  os << a.x << ',' << a.y << '|' << b.x << ',' << b.y;
  return os.str();
}

bool lattice_valued(const Vec2R& v, const Carrier& c) {
  auto is_multiple = [](const Rational& x, const Rational& period) {
    Rational q = x / period;
    return boost::multiprecision::denominator(q) == 1;
  };
  bool ok_x = c.periodic_x ? is_multiple(v.x, c.period_x) : v.x == 0;
  bool ok_y = c.periodic_y ? is_multiple(v.y, c.period_y) : v.y == 0;
  return ok_x && ok_y;
}

}  // namespace

void PiecewiseMap::rebuild_boundary_pieces() {
  boundary_pieces.clear();
  if (!all_affine()) return;  // oracle backends declare pieces explicitly

  Rational x0, y0, x1, y1;
  bool box = carrier_is_box(carrier, x0, y0, x1, y1);
  if ((carrier.periodic_x || carrier.periodic_y) && !box)
    throw ConfigError("periodic carriers must be boxes");

  auto carrier_edges = carrier.polygon.edges();
  auto on_carrier_line = [&](const SegmentR& s, SegmentR& which) {
    for (const auto& ce : carrier_edges) {
      Rational c1 = cross(ce.a, ce.b, s.a);
      Rational c2 = cross(ce.a, ce.b, s.b);
      if (c1 == 0 && c2 == 0) {
        which = ce;
        return true;
      }
    }
    return false;
  };

  std::map<std::string, BoundarySegment> internal;
  std::vector<SeamEdge> seam_x, seam_y;

  auto add_internal = [&](const SegmentR& s, int branch, bool cone_boundary) {
    auto key = seg_key(s);
    auto it = internal.find(key);
    if (it == internal.end()) {
      BoundarySegment b;
      b.seg = s;
      if (branch >= 0) b.branches = {branch};
      b.cone_domain_boundary = cone_boundary;
      internal.emplace(key, std::move(b));
    } else {
      if (branch >= 0 &&
          std::find(it->second.branches.begin(), it->second.branches.end(), branch) ==
              it->second.branches.end())
        it->second.branches.push_back(branch);
      it->second.cone_domain_boundary = it->second.cone_domain_boundary || cone_boundary;
    }
  };

  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    for (const auto& piece : branches[bi].affine().domain.parts) {
      for (const auto& e : piece.edges()) {
        SegmentR ce;
        if (!on_carrier_line(e, ce)) {
          add_internal(e, static_cast<int>(bi), false);
          continue;
        }
        bool handled = false;
        if (box && carrier.periodic_x && (on_line_x(e, x0) || on_line_x(e, x1))) {
          SegmentR norm = e;
          bool high = on_line_x(e, x1);
          if (high) {
            norm.a.x = x0;
            norm.b.x = x0;
          }
          seam_x.push_back({norm, static_cast<int>(bi), high});
          handled = true;
        } else if (box && carrier.periodic_y && (on_line_y(e, y0) || on_line_y(e, y1))) {
          SegmentR norm = e;
          bool high = on_line_y(e, y1);
          if (high) {
            norm.a.y = y0;
            norm.b.y = y0;
          }
          seam_y.push_back({norm, static_cast<int>(bi), high});
          handled = true;
        }
        if (!handled) {
          BoundarySegment b;
          b.seg = e;
          b.branches = {static_cast<int>(bi)};
          b.carrier_edge = true;
          boundary_pieces.push_back(std::move(b));
        }
      }
    }
  }

  // periodic seams: keep only the discontinuous overlaps
  auto process_seam = [&](std::vector<SeamEdge>& edges, bool is_x) {
    Rational shift_x = is_x ? (x1 - x0) : Rational(0);
    Rational shift_y = is_x ? Rational(0) : (y1 - y0);
    for (const auto& lo_e : edges) {
      if (lo_e.from_high_side) continue;
      for (const auto& hi_e : edges) {
        if (!hi_e.from_high_side) continue;
        // overlap along the seam parameter
        auto lo_t = [&](const Vec2R& p) { return is_x ? p.y : p.x; };
        Rational a0 = std::min(lo_t(lo_e.seg.a), lo_t(lo_e.seg.b));
        Rational a1 = std::max(lo_t(lo_e.seg.a), lo_t(lo_e.seg.b));
        Rational b0 = std::min(lo_t(hi_e.seg.a), lo_t(hi_e.seg.b));
        Rational b1 = std::max(lo_t(hi_e.seg.a), lo_t(hi_e.seg.b));
        Rational o0 = std::max(a0, b0), o1 = std::min(a1, b1);
        if (o1 <= o0) continue;
        const auto& ml = branches[static_cast<std::size_t>(hi_e.branch)].affine().map;
        const auto& mr = branches[static_cast<std::size_t>(lo_e.branch)].affine().map;
        // high-side branch evaluated at q + shift, low-side at q
        auto diff_at = [&](const Rational& t) {
          Vec2R q = is_x ? Vec2R{x0, t} : Vec2R{t, y0};
          Vec2R qh = q + Vec2R{shift_x, shift_y};
          return ml.apply(qh) - mr.apply(q);
        };
        Vec2R d0 = diff_at(o0);
        Vec2R d1 = diff_at(o1);
        bool continuous = d0 == d1 && lattice_valued(d0, carrier);
        if (!continuous) {
          SegmentR s = is_x ? SegmentR{{x0, o0}, {x0, o1}} : SegmentR{{o0, y0}, {o1, y0}};
          add_internal(s, lo_e.branch, false);
          add_internal(s, hi_e.branch, false);
        }
      }
    }
  };
  process_seam(seam_x, true);
  process_seam(seam_y, false);

  // cone-domain boundaries interior to the carrier
  if (cone_domains.size() > 1) {
    for (const auto& cd : cone_domains)
      for (const auto& piece : cd.region.parts)
        for (const auto& e : piece.edges()) {
          SegmentR ce;
          if (!on_carrier_line(e, ce)) add_internal(e, -1, true);
        }
  }

  for (auto& [k, b] : internal) boundary_pieces.push_back(std::move(b));
}

std::string PiecewiseMap::content_hash() const {
  std::ostringstream os;
  os << name << '|' << dims.d << ',' << dims.du << ',' << dims.ds << '|'
     << carrier.polygon.canonical_key() << '|' << carrier.periodic_x << carrier.periodic_y << '|'
     << static_cast<int>(mode) << '|' << static_cast<int>(weight.kind) << '|';
  for (const auto& b : branches) {
    if (b.is_affine()) {
      const auto& a = b.affine();
      os << 'A' << a.map.lin.a << ',' << a.map.lin.b << ',' << a.map.lin.c << ',' << a.map.lin.d
         << ',' << a.map.off.x << ',' << a.map.off.y << ':';
      for (const auto& p : a.domain.parts) os << p.canonical_key();
    } else {
      os << 'O';
    }
    os << '|';
  }
  for (const auto& cd : cone_domains) {
    for (const auto& p : cd.region.parts) os << p.canonical_key();
    char buf[128];
    std::snprintf(buf, sizeof buf, "%a/%a;", cd.unstable.aperture_norm(),
                  cd.stable.aperture_norm());
    os << buf;
  }
  std::ostringstream hex;
  hex << std::hex << fnv1a(os.str());
  return hex.str();
}

// ---------------------------------------------------------------------------
// cylinders

Rational ItineraryCylinder::region_area2() const {
  Rational a = 0;
  for (const auto& p : pieces) a += p.poly.area2();
  return a;
}

PolyRegion ItineraryCylinder::region() const {
  PolyRegion r;
  for (const auto& p : pieces) r.parts.push_back(p.poly);
  return r;
}

PolyRegion ItineraryCylinder::image_region() const {
  PolyRegion r;
  for (const auto& p : pieces) {
    ConvexPolygon q = p.poly.image(p.composed);
    if (!q.empty()) r.parts.push_back(std::move(q));
  }
  return r;
}

namespace {

struct Node {
  std::vector<int> word;
  ConvexPolygon poly;
  AffineMapR composed;
};

void shift_range(const PiecewiseMap& map, const ConvexPolygon& img, const ConvexPolygon& dom,
                 std::vector<Vec2R>& shifts) {
  shifts.clear();
  Rational ix0, iy0, ix1, iy1, dx0, dy0, dx1, dy1;
  img.bbox(ix0, iy0, ix1, iy1);
  dom.bbox(dx0, dy0, dx1, dy1);
  auto bounds = [](const Rational& lo_gap, const Rational& hi_gap, const Rational& period,
                   long& klo, long& khi) {
    klo = static_cast<long>(std::floor(to_double(lo_gap / period))) - 1;
    khi = static_cast<long>(std::ceil(to_double(hi_gap / period))) + 1;
  };
  long kx0 = 0, kx1 = 0, ky0 = 0, ky1 = 0;
  if (map.carrier.periodic_x) bounds(ix0 - dx1, ix1 - dx0, map.carrier.period_x, kx0, kx1);
  if (map.carrier.periodic_y) bounds(iy0 - dy1, iy1 - dy0, map.carrier.period_y, ky0, ky1);
  for (long kx = kx0; kx <= kx1; ++kx)
    for (long ky = ky0; ky <= ky1; ++ky)
      shifts.push_back({Rational(kx) * map.carrier.period_x, Rational(ky) * map.carrier.period_y});
}

}  // namespace

std::vector<ItineraryCylinder> enumerate_cylinders(const PiecewiseMap& map, int n,
                                                   const EnumerationOptions& opt) {
  if (n < 1) throw Error("enumerate_cylinders: depth must be >= 1");
  if (!map.all_affine())
    throw Error("enumerate_cylinders: exact enumeration needs the affine backend");

  std::vector<Node> level;
  for (std::size_t bi = 0; bi < map.branches.size(); ++bi) {
    for (const auto& piece : map.branches[bi].affine().domain.parts) {
      ConvexPolygon p = piece.intersect(map.carrier.polygon);
      if (p.empty()) continue;
      level.push_back({{static_cast<int>(bi)}, std::move(p), map.branches[bi].affine().map});
    }
  }

  std::vector<Vec2R> shifts{{Rational(0), Rational(0)}};
  for (int depth = 1; depth < n; ++depth) {
    std::vector<Node> next;
    for (const auto& node : level) {
      ConvexPolygon img = node.poly.image(node.composed);
      AffineMapR inv = node.composed.inverse();
      for (std::size_t bj = 0; bj < map.branches.size(); ++bj) {
        const auto& br = map.branches[bj].affine();
        for (const auto& dom : br.domain.parts) {
          if (map.carrier.periodic_x || map.carrier.periodic_y)
            shift_range(map, img, dom, shifts);
          for (const auto& sh : shifts) {
            ConvexPolygon target = dom.translate(sh).intersect(img);
            if (target.empty()) continue;
            ConvexPolygon child = target.image(inv).intersect(node.poly);
            if (child.empty()) continue;
            if (child.max_coord_bits() > opt.bit_budget)
              throw ArithmeticOverflow("enumerate_cylinders: rational bit budget exceeded");
            Node c;
            c.word = node.word;
            c.word.push_back(static_cast<int>(bj));
            c.poly = std::move(child);
            // branch applied after unwrapping by the shift
            AffineMapR unwrap{Mat2R::identity(), {-sh.x, -sh.y}};
            c.composed = br.map.compose(unwrap.compose(node.composed));
            next.push_back(std::move(c));
            if (next.size() > opt.explosion_cap)
              throw ExplosionGuard("enumerate_cylinders: cylinder cap exceeded", next.size());
          }
          if (!(map.carrier.periodic_x || map.carrier.periodic_y))
            shifts.assign(1, {Rational(0), Rational(0)});
        }
      }
    }
    level = std::move(next);
  }

  std::map<std::vector<int>, ItineraryCylinder> grouped;
  for (auto& node : level) {
    auto& cyl = grouped[node.word];
    cyl.word = node.word;
    cyl.pieces.push_back({std::move(node.poly), node.composed});
  }
  std::vector<ItineraryCylinder> out;
  out.reserve(grouped.size());
  for (auto& [w, c] : grouped) out.push_back(std::move(c));
  return out;
}

std::vector<SampledCylinder> enumerate_cylinders_sampled(const PiecewiseMap& map, int n,
                                                         int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  Rational x0, y0, x1, y1;
  map.carrier.polygon.bbox(x0, y0, x1, y1);
  std::uniform_real_distribution<double> ux(to_double(x0), to_double(x1));
  std::uniform_real_distribution<double> uy(to_double(y0), to_double(y1));

  auto member = [&](std::size_t bi, const Eigen::Vector2d& q) {
    const auto& b = map.branches[bi];
    if (b.is_affine()) {
      Vec2R qr{Rational(q.x()), Rational(q.y())};
      return b.affine().domain.contains_closed(qr);
    }
    return b.oracle().member(q);
  };
  auto apply = [&](std::size_t bi, const Eigen::Vector2d& q) {
    const auto& b = map.branches[bi];
    if (b.is_affine()) {
      auto m = b.affine().jac();
      Eigen::Vector2d off(to_double(b.affine().map.off.x), to_double(b.affine().map.off.y));
      return Eigen::Vector2d(m * q + off);
    }
    return b.oracle().map(q);
  };

  std::map<std::vector<int>, SampledCylinder> grouped;
  int kept = 0;
  for (int s = 0; s < samples; ++s) {
    Eigen::Vector2d q(ux(rng), uy(rng));
    std::vector<int> word;
    Eigen::Vector2d start = q;
    bool alive = true;
    for (int k = 0; k < n && alive; ++k) {
      alive = false;
      for (std::size_t bi = 0; bi < map.branches.size(); ++bi) {
        if (member(bi, q)) {
          word.push_back(static_cast<int>(bi));
          q = apply(bi, q);
          alive = true;
          break;
        }
      }
    }
    if (!alive || static_cast<int>(word.size()) != n) continue;
    ++kept;
    auto& c = grouped[word];
    c.word = word;
    c.points.push_back(start);
  }
  std::vector<SampledCylinder> out;
  for (auto& [w, c] : grouped) {
    c.confidence = kept > 0 ? static_cast<double>(c.points.size()) / kept : 0.0;
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// builtins

namespace {

GraphCone cone_from_sector(double lo_angle, double hi_angle, ConeKind kind) {
  double mid = 0.5 * (lo_angle + hi_angle);
  double half = 0.5 * (hi_angle - lo_angle);
  Eigen::Matrix2d f;
  Eigen::Vector2d axis(std::cos(mid), std::sin(mid));
  Eigen::Vector2d perp(-std::sin(mid), std::cos(mid));
  MatrixXd frame(2, 2);
  MatrixXd ap(1, 1);
  ap(0, 0) = std::tan(half);
  if (kind == ConeKind::Stable) {
    frame.col(0) = perp;
    frame.col(1) = axis;
  } else {
    frame.col(0) = axis;
    frame.col(1) = perp;
  }
  return GraphCone(frame, 1, 1, kind, ap);
}

AffineMapR affine(const Rational& a, const Rational& b, const Rational& c, const Rational& d,
                  const Rational& ox, const Rational& oy) {
  return AffineMapR{{a, b, c, d}, {ox, oy}};
}

}  // namespace

PiecewiseMap builtin_baker() {
  PiecewiseMap m;
  m.name = "baker";
  m.dims = {2, 1, 1};
  m.carrier.polygon = ConvexPolygon::box(0, 0, 1, 1);
  m.carrier.periodic_x = true;

  Branch b1, b2;
  AffineBranch a1, a2;
  a1.domain = PolyRegion::one(ConvexPolygon::box(0, 0, Rational(1, 2), 1));
  a1.map = affine(2, 0, 0, Rational(1, 2), 0, 0);
  a2.domain = PolyRegion::one(ConvexPolygon::box(Rational(1, 2), 0, 1, 1));
  a2.map = affine(2, 0, 0, Rational(1, 2), -1, Rational(1, 2));
  b1.impl = a1;
  b2.impl = a2;
  m.branches = {b1, b2};

  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  m.cone_domains = {cd};
  m.weight.kind = WeightKind::OneOverDet;
  m.rebuild_boundary_pieces();
  return m;
}

PiecewiseMap builtin_doubling() {
  PiecewiseMap m;
  m.name = "doubling";
  m.dims = {2, 1, 1};
  m.carrier.polygon = ConvexPolygon::box(0, 0, 1, 1);

  Branch b1, b2;
  AffineBranch a1, a2;
  a1.domain = PolyRegion::one(ConvexPolygon::box(0, 0, Rational(1, 2), 1));
  a1.map = affine(2, 0, 0, Rational(1, 2), 0, 0);
  a2.domain = PolyRegion::one(ConvexPolygon::box(Rational(1, 2), 0, 1, 1));
  a2.map = affine(2, 0, 0, Rational(1, 2), -1, 0);
  b1.impl = a1;
  b2.impl = a2;
  m.branches = {b1, b2};

  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone::axis2d(ConeKind::Unstable, 0.25);
  cd.stable = GraphCone::axis2d(ConeKind::Stable, 0.25);
  m.cone_domains = {cd};
  m.weight.kind = WeightKind::OneOverDet;
  m.rebuild_boundary_pieces();
  return m;
}

PiecewiseMap builtin_toral(const Mat2R& mat) {
  PiecewiseMap m;
  m.name = "toral";
  m.dims = {2, 1, 1};
  m.carrier.polygon = ConvexPolygon::box(0, 0, 1, 1);
  m.carrier.periodic_x = m.carrier.periodic_y = true;

  Branch b;
  AffineBranch a;
  a.domain = PolyRegion::one(m.carrier.polygon);
  a.map = AffineMapR{mat, {0, 0}};
  b.impl = a;
  m.branches = {b};

  Eigen::Matrix2d md;
  md << to_double(mat.a), to_double(mat.b), to_double(mat.c), to_double(mat.d);
  Eigen::EigenSolver<Eigen::Matrix2d> es(md);
  auto ev = es.eigenvalues();
  if (std::abs(ev(0).imag()) > 1e-12 || std::abs(ev(1).imag()) > 1e-12)
    throw CertificationFailed("toral: complex eigenvalues", "hyperbolicity");
  int iu = std::abs(ev(0).real()) > std::abs(ev(1).real()) ? 0 : 1;
  double lu = std::abs(ev(iu).real()), ls = std::abs(ev(1 - iu).real());
  if (!(lu > 1.0 && ls < 1.0))
    throw CertificationFailed("toral: matrix is not hyperbolic", "hyperbolicity");
  Eigen::Vector2d vu = es.eigenvectors().col(iu).real().normalized();
  Eigen::Vector2d vs = es.eigenvectors().col(1 - iu).real().normalized();

  MatrixXd frame(2, 2);
  frame.col(0) = vu;
  frame.col(1) = vs;
  MatrixXd ap(1, 1);
  ap(0, 0) = 0.25;
  ConeDomain cd;
  cd.region = PolyRegion::one(m.carrier.polygon);
  cd.unstable = GraphCone(frame, 1, 1, ConeKind::Unstable, ap);
  cd.stable = GraphCone(frame, 1, 1, ConeKind::Stable, ap);
  m.cone_domains = {cd};
  m.weight.kind = WeightKind::OneOverDet;
  m.rebuild_boundary_pieces();
  return m;
}

ConvexPolygon lozi_default_domain() {
  // vertex-cycle trapping triangle for (a, b) = (1.7, 0.5): a rational point R
  // on the x-axis just past the unstable-manifold crossing, together with its
  // two exact images; containment is re-verified exactly by builtin_lozi
  Rational a(17, 10), b(1, 2);
  Vec2R r{Rational(168, 125), Rational(0)};
  auto step = [&](const Vec2R& p) {
    Rational ax = a * p.x;
    if (ax < 0) ax = -ax;
    return Vec2R{1 + p.y - ax, b * p.x};
  };
  Vec2R tr = step(r);
  Vec2R t2r = step(tr);
  return ConvexPolygon::from_points({r, tr, t2r});
}

PiecewiseMap builtin_lozi(const Rational& a, const Rational& b,
                          const ConvexPolygon& invariant_domain) {
  PiecewiseMap m;
  m.name = "lozi";
  m.dims = {2, 1, 1};
  m.carrier.polygon = invariant_domain;

  Rational bx0, by0, bx1, by1;
  invariant_domain.bbox(bx0, by0, bx1, by1);
  ConvexPolygon left = invariant_domain.clip_halfplane(1, 0, 0);    // x <= 0
  ConvexPolygon right = invariant_domain.clip_halfplane(-1, 0, 0);  // x >= 0
  if (left.empty() || right.empty())
    throw CertificationFailed("lozi: invariant domain must straddle the switching line x = 0",
                              "domain");

  Branch bl, br;
  AffineBranch al, ar;
  al.domain = PolyRegion::one(left);
  al.map = affine(a, 1, b, 0, 1, 0);  // x < 0: (1 + y + a x, b x)
  ar.domain = PolyRegion::one(right);
  ar.map = affine(-a, 1, b, 0, 1, 0);  // x > 0: (1 + y - a x, b x)
  bl.impl = al;
  br.impl = ar;
  m.branches = {bl, br};

  // exact forward-invariance of the supplied domain
  for (const auto& bb : m.branches) {
    for (const auto& piece : bb.affine().domain.parts) {
      ConvexPolygon img = piece.image(bb.affine().map);
      for (const auto& v : img.vertices())
        if (!invariant_domain.contains_closed(v))
          throw CertificationFailed("lozi: supplied domain is not forward invariant",
                                    "invariant domain containment");
    }
  }

  const double ad = to_double(a), bd = to_double(b);
  double disc = ad * ad - 4 * bd;
  if (disc <= 0) throw CertificationFailed("lozi: parameters outside the hyperbolic range",
                                           "hyperbolicity");
  double cmin = (ad - std::sqrt(disc)) / 2, cmax = (ad + std::sqrt(disc)) / 2;
  double w = std::min(1.25 * cmin, 0.5 * (cmin + cmax));
  if (!(w * (ad - w) > bd))
    throw CertificationFailed("lozi: no invariant cone width found", "cone invariance");

  // unstable: symmetric slope band |slope| <= w; stable: signed bands around
  // slopes +-a with half-width w
  GraphCone cu = cone_from_sector(-std::atan(w), std::atan(w), ConeKind::Unstable);
  GraphCone cs_plus =
      cone_from_sector(std::atan(ad - w), std::atan(ad + w), ConeKind::Stable);
  GraphCone cs_minus =
      cone_from_sector(-std::atan(ad + w), -std::atan(ad - w), ConeKind::Stable);

  ConeDomain cd_left, cd_right;
  cd_left.region = PolyRegion::one(left);
  cd_left.unstable = cu;
  cd_left.stable = cs_minus;
  cd_right.region = PolyRegion::one(right);
  cd_right.unstable = cu;
  cd_right.stable = cs_plus;
  m.cone_domains = {cd_left, cd_right};
  m.weight.kind = WeightKind::OneOverDet;
  m.rebuild_boundary_pieces();
  return m;
}

PiecewiseMap builtin_by_name(const std::string& name) {
  if (name == "baker") return builtin_baker();
  if (name == "doubling") return builtin_doubling();
  if (name == "toral") return builtin_toral({2, 1, 1, 1});
  if (name == "lozi")
    return builtin_lozi(Rational(17, 10), Rational(1, 2), lozi_default_domain());
  throw ConfigError("unknown builtin map: " + name);
}

namespace {

GraphCone swap_kind(const GraphCone& c) {
  // same point set, relabeled as the opposite kind with swapped block order
  const int d = c.dim();
  MatrixXd perm = MatrixXd::Zero(d, d);
  const int du = c.du(), ds = c.ds();
  // new coordinates: first block' = old second block, second' = old first
  for (int i = 0; i < ds; ++i) perm(du + i, i) = 1.0;
  for (int i = 0; i < du; ++i) perm(i, ds + i) = 1.0;
  ConeKind nk = c.kind() == ConeKind::Stable ? ConeKind::Unstable : ConeKind::Stable;
  return GraphCone(c.frame() * perm, ds, du, nk, c.aperture(), c.degenerate());
}

}  // namespace

PiecewiseMap invert(const PiecewiseMap& map) {
  if (!map.all_affine() || map.mode != MapMode::Standard)
    throw Error("invert: needs a standard-mode affine map");
  PiecewiseMap inv;
  inv.name = map.name + "_inverse";
  inv.dims = {map.dims.d, map.dims.ds, map.dims.du};
  inv.carrier = map.carrier;
  inv.weight = map.weight;
  inv.mode = map.mode;

  std::vector<PolyRegion> images;
  for (const auto& b : map.branches) {
    PolyRegion img;
    for (const auto& piece : b.affine().domain.parts) {
      ConvexPolygon q = piece.image(b.affine().map);
      if (!q.empty()) img.parts.push_back(std::move(q));
    }
    images.push_back(std::move(img));
  }
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = i + 1; j < images.size(); ++j)
      if (images[i].intersect(images[j]).area2() != 0)
        throw Error("invert: branch images overlap, map is not invertible");

  for (std::size_t i = 0; i < map.branches.size(); ++i) {
    Branch b;
    AffineBranch a;
    a.domain = images[i];
    a.map = map.branches[i].affine().map.inverse();
    b.impl = a;
    inv.branches.push_back(std::move(b));
  }
  for (const auto& cd : map.cone_domains) {
    ConeDomain ncd;
    ncd.region = cd.region;
    ncd.unstable = swap_kind(cd.stable);
    ncd.stable = swap_kind(cd.unstable);
    inv.cone_domains.push_back(std::move(ncd));
  }
  inv.rebuild_boundary_pieces();
  return inv;
}

// ---------------------------------------------------------------------------
// certification

CertificationReport certify(const PiecewiseMap& map, unsigned seed, const ConeTolerances& tol) {
  CertificationReport rep;
  rep.seed = seed;

  // domain structure (exact in the affine backend)
  if (map.all_affine()) {
    Rational total = 0;
    for (std::size_t i = 0; i < map.branches.size(); ++i) {
      total += map.branches[i].affine().domain.area2();
      for (std::size_t j = i + 1; j < map.branches.size(); ++j)
        if (map.branches[i].affine().domain.intersect(map.branches[j].affine().domain).area2() !=
            0)
          rep.domains_disjoint = false;
    }
    rep.domains_cover = total == map.carrier.polygon.area2();
    if (map.mode == MapMode::Generalized) rep.domains_disjoint = true;  // overlap allowed
  }

  // cone invariance and hyperbolicity, per branch and cone-region transition
  rep.weakest_expansion = 1e300;
  rep.weakest_contraction_bound = 0.0;
  for (std::size_t bi = 0; bi < map.branches.size(); ++bi) {
    if (!map.branches[bi].is_affine()) continue;  // oracle transitions handled below
    const auto& br = map.branches[bi].affine();
    Eigen::Matrix2d M = br.jac();
    for (std::size_t e = 0; e < map.cone_domains.size(); ++e) {
      PolyRegion src = br.domain.intersect(map.cone_domains[e].region);
      if (src.area2() == 0) continue;
      PolyRegion img = src.image(br.map);
      for (std::size_t e2 = 0; e2 < map.cone_domains.size(); ++e2) {
        bool hit = img.intersect(map.cone_domains[e2].region).area2() != 0;
        if (!hit && (map.carrier.periodic_x || map.carrier.periodic_y)) {
          // wrapped overlap
          std::vector<Vec2R> shifts;
          for (const auto& ip : img.parts)
            for (const auto& dp : map.cone_domains[e2].region.parts) {
              shift_range(map, ip, dp, shifts);
              for (const auto& sh : shifts)
                if (!dp.translate(sh).intersect(ip).empty()) hit = true;
            }
        }
        if (!hit) continue;
        TransitionVerdict tv;
        tv.branch = static_cast<int>(bi);
        tv.from_region = static_cast<int>(e);
        tv.to_region = static_cast<int>(e2);
        const GraphCone& cu = map.cone_domains[e].unstable;
        const GraphCone& cs_from = map.cone_domains[e].stable;
        const GraphCone& cu_to = map.cone_domains[e2].unstable;
        const GraphCone& cs_to = map.cone_domains[e2].stable;
        GraphCone img_u(M * cu.frame(), cu.du(), cu.ds(), cu.kind(), cu.aperture(),
                        cu.degenerate());
        GraphCone pre_s(M.inverse() * cs_to.frame(), cs_to.du(), cs_to.ds(), cs_to.kind(),
                        cs_to.aperture(), cs_to.degenerate());
        auto inside_margin = [](const GraphCone& inner, const GraphCone& outer) {
          auto si = inner.sector();
          auto so = outer.sector();
          double best = -1e9;
          for (int k = -2; k <= 2; ++k)
            best = std::max(best, std::min(si.lo + k * kPi - so.lo, so.hi - (si.hi + k * kPi)));
          return best;
        };
        tv.margin_u = inside_margin(img_u, cu_to);
        tv.margin_s = inside_margin(pre_s, cs_from);
        tv.cone_invariance = tv.margin_u > 0 && tv.margin_s > 0;
        tv.expansion = cone_expansion_unchecked(M, cu, cs_to, tol);
        tv.hyperbolic = tv.expansion.hyperbolic();
        rep.weakest_expansion = std::min(rep.weakest_expansion, tv.expansion.u_min);
        rep.weakest_contraction_bound =
            std::max(rep.weakest_contraction_bound, tv.expansion.s_max);
        rep.transitions.push_back(tv);
      }
    }
  }
  // oracle branches: sampled transitions
  for (std::size_t bi = 0; bi < map.branches.size(); ++bi) {
    if (map.branches[bi].is_affine()) continue;
    const auto& ob = map.branches[bi].oracle();
    std::mt19937_64 rng(seed + 17 * bi);
    std::uniform_real_distribution<double> ux(ob.bbox.min().x(), ob.bbox.max().x());
    std::uniform_real_distribution<double> uy(ob.bbox.min().y(), ob.bbox.max().y());
    int found = 0;
    for (int s = 0; s < 4000 && found < 256; ++s) {
      Eigen::Vector2d q(ux(rng), uy(rng));
      if (!ob.member(q)) continue;
      ++found;
      int e = map.cone_index_at(q);
      Eigen::Vector2d p = ob.map(q);
      int e2 = map.cone_index_at(p);
      if (e < 0 || e2 < 0) continue;
      Eigen::Matrix2d M = ob.jacobian(q);
      TransitionVerdict tv;
      tv.branch = static_cast<int>(bi);
      tv.from_region = e;
      tv.to_region = e2;
      const GraphCone& cu = map.cone_domains[e].unstable;
      const GraphCone& cs_to = map.cone_domains[e2].stable;
      GraphCone img_u(M * cu.frame(), cu.du(), cu.ds(), cu.kind(), cu.aperture(), cu.degenerate());
      GraphCone pre_s(M.inverse() * cs_to.frame(), cs_to.du(), cs_to.ds(), cs_to.kind(),
                      cs_to.aperture(), cs_to.degenerate());
      auto inside_margin = [](const GraphCone& inner, const GraphCone& outer) {
        auto si = inner.sector();
        auto so = outer.sector();
        double best = -1e9;
        for (int k = -2; k <= 2; ++k)
          best = std::max(best, std::min(si.lo + k * kPi - so.lo, so.hi - (si.hi + k * kPi)));
        return best;
      };
      tv.margin_u = inside_margin(img_u, map.cone_domains[e2].unstable);
      tv.margin_s = inside_margin(pre_s, map.cone_domains[e].stable);
      tv.cone_invariance = tv.margin_u > 0 && tv.margin_s > 0;
      tv.expansion = cone_expansion_unchecked(M, cu, cs_to, tol);
      tv.hyperbolic = tv.expansion.hyperbolic();
      rep.weakest_expansion = std::min(rep.weakest_expansion, tv.expansion.u_min);
      rep.weakest_contraction_bound = std::max(rep.weakest_contraction_bound, tv.expansion.s_max);
      rep.transitions.push_back(tv);
    }
  }

  rep.cones_ok = !rep.transitions.empty();
  rep.hyperbolic_ok = !rep.transitions.empty();
  for (const auto& tv : rep.transitions) {
    rep.cones_ok = rep.cones_ok && tv.cone_invariance;
    rep.hyperbolic_ok = rep.hyperbolic_ok && tv.hyperbolic;
  }

  // transversality of boundary pieces
  bool std_ok = true, img_ok = true, dual_ok = true;
  auto angle_of = [](const Eigen::Vector2d& v) { return angle_mod_pi(v.x(), v.y()); };
  for (std::size_t pi = 0; pi < map.boundary_pieces.size(); ++pi) {
    const auto& piece = map.boundary_pieces[pi];
    Vec2R midr{(piece.seg.a.x + piece.seg.b.x) / 2, (piece.seg.a.y + piece.seg.b.y) / 2};
    Eigen::Vector2d t = v2d(piece.seg.b - piece.seg.a);
    if (t.norm() == 0) continue;
    double ta = angle_of(t);

    std::vector<int> regions;
    for (std::size_t e = 0; e < map.cone_domains.size(); ++e)
      if (map.cone_domains[e].region.contains_closed(midr)) regions.push_back(static_cast<int>(e));

    auto add_verdict = [&](const char* check, int branch, double margin) {
      TransversalityVerdict v;
      v.piece = static_cast<int>(pi);
      v.branch = branch;
      v.margin = margin;
      v.transverse = margin > 0;
      v.carrier_edge = piece.carrier_edge;
      v.check = check;
      rep.transversality.push_back(v);
      return v.transverse;
    };

    // carrier-boundary pieces are reported but not part of the requirements
    if (piece.carrier_edge) {
      for (int e : regions) add_verdict("standard", -1, sector_distance(ta, map.cone_domains[e].stable.sector()));
      continue;
    }

    for (int e : regions) {
      bool ok_std =
          add_verdict("standard", -1, sector_distance(ta, map.cone_domains[e].stable.sector()));
      bool ok_dualdom =
          add_verdict("dual_domain", -1, sector_distance(ta, map.cone_domains[e].unstable.sector()));
      std_ok = std_ok && ok_std;
      if (piece.cone_domain_boundary) {
        img_ok = img_ok && ok_std;       // time-0 condition on cone domains
        dual_ok = dual_ok && ok_dualdom; // time-0 condition, reversed analysis
      }
    }
    if (piece.branches.empty()) continue;  // pure cone-domain boundary

    // discontinuity pieces of T: image condition (vs stable) and preimage
    // condition (vs unstable)
    for (int bi : piece.branches) {
      if (bi < 0 || !map.branches[static_cast<std::size_t>(bi)].is_affine()) continue;
      const auto& br = map.branches[static_cast<std::size_t>(bi)].affine();
      Eigen::Matrix2d M = br.jac();
      Vec2R img_mid = br.map.apply(midr);
      double ia = angle_of(M * t);
      std::vector<int> img_regions;
      for (std::size_t e = 0; e < map.cone_domains.size(); ++e)
        if (map.cone_domains[e].region.contains_closed(img_mid))
          img_regions.push_back(static_cast<int>(e));
      if (img_regions.empty() && (map.carrier.periodic_x || map.carrier.periodic_y)) {
        // wrap the image point into the carrier before the lookup
        Rational cx0, cy0, cx1, cy1;
        map.carrier.polygon.bbox(cx0, cy0, cx1, cy1);
        Vec2R w = img_mid;
        if (map.carrier.periodic_x)
          while (w.x > cx1) w.x -= map.carrier.period_x;
        if (map.carrier.periodic_x)
          while (w.x < cx0) w.x += map.carrier.period_x;
        if (map.carrier.periodic_y)
          while (w.y > cy1) w.y -= map.carrier.period_y;
        if (map.carrier.periodic_y)
          while (w.y < cy0) w.y += map.carrier.period_y;
        for (std::size_t e = 0; e < map.cone_domains.size(); ++e)
          if (map.cone_domains[e].region.contains_closed(w))
            img_regions.push_back(static_cast<int>(e));
      }
      for (int e2 : img_regions)
        img_ok = add_verdict("image", bi, sector_distance(ia, map.cone_domains[e2].stable.sector())) &&
                 img_ok;
    }
    // preimages: any branch whose image closure meets the piece pulls it back
    for (std::size_t bj = 0; bj < map.branches.size(); ++bj) {
      if (!map.branches[bj].is_affine()) continue;
      const auto& br = map.branches[bj].affine();
      bool meets = false;
      for (const auto& dp : br.domain.parts)
        if (dp.image(br.map).contains_closed(midr)) meets = true;
      if (!meets) continue;
      Eigen::Matrix2d Minv = br.jac().inverse();
      Vec2R pre_mid = br.map.inverse().apply(midr);
      double pa = angle_of(Minv * t);
      std::vector<int> pre_regions;
      for (std::size_t e = 0; e < map.cone_domains.size(); ++e)
        if (map.cone_domains[e].region.contains_closed(pre_mid))
          pre_regions.push_back(static_cast<int>(e));
      for (int e : pre_regions)
        dual_ok = add_verdict("dual_preimage", static_cast<int>(bj),
                              sector_distance(pa, map.cone_domains[e].unstable.sector())) &&
                  dual_ok;
    }
  }

  rep.transversality_standard_ok = std_ok;
  rep.transversality_image_ok = img_ok;
  rep.transversality_dual_ok = dual_ok;
  return rep;
}

}  // namespace conehyp
