#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conehyp/errors.hpp"

namespace conehyp {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

Rational rational_from_decimal(const std::string& s);
double to_double(const Rational& r);
std::size_t rational_bits(const Rational& r);

struct Vec2R {
  Rational x, y;
  Vec2R() = default;
  Vec2R(Rational xx, Rational yy) : x(std::move(xx)), y(std::move(yy)) {}
  Vec2R operator+(const Vec2R& o) const { return {x + o.x, y + o.y}; }
  Vec2R operator-(const Vec2R& o) const { return {x - o.x, y - o.y}; }
  bool operator==(const Vec2R& o) const { return x == o.x && y == o.y; }
};

struct Mat2R {
  Rational a, b, c, d;  // [[a, b], [c, d]]
  Vec2R apply(const Vec2R& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  Mat2R mul(const Mat2R& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Rational det() const { return a * d - b * c; }
  Mat2R inverse() const;
  static Mat2R identity() { return {1, 0, 0, 1}; }
};

struct AffineMapR {
  Mat2R lin = Mat2R::identity();
  Vec2R off{0, 0};
  Vec2R apply(const Vec2R& v) const { return lin.apply(v) + off; }
  /// this ∘ g
  AffineMapR compose(const AffineMapR& g) const {
    return {lin.mul(g.lin), lin.apply(g.off) + off};
  }
  AffineMapR inverse() const;
};

struct SegmentR {
  Vec2R a, b;
};

/// Closed convex polygon with rational vertices, counter-clockwise, no
/// duplicate or collinear vertices. Degenerate (area 0) polygons are empty.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;
  static ConvexPolygon box(const Rational& x0, const Rational& y0, const Rational& x1,
                           const Rational& y1);
  static ConvexPolygon from_points(std::vector<Vec2R> pts);

  bool empty() const { return vs_.size() < 3; }
  const std::vector<Vec2R>& vertices() const { return vs_; }
  Rational area2() const;  // twice the area

  /// Keep {a x + b y <= c}.
  ConvexPolygon clip_halfplane(const Rational& a, const Rational& b, const Rational& c) const;
  ConvexPolygon intersect(const ConvexPolygon& other) const;
  ConvexPolygon image(const AffineMapR& m) const;
  ConvexPolygon translate(const Vec2R& t) const;
  bool contains_closed(const Vec2R& p) const;
  void bbox(Rational& x0, Rational& y0, Rational& x1, Rational& y1) const;
  std::vector<SegmentR> edges() const;
  std::size_t max_coord_bits() const;
  std::string canonical_key() const;

 private:
  std::vector<Vec2R> vs_;
  void normalize();
};

/// Finite union of convex polygons with pairwise disjoint interiors.
struct PolyRegion {
  std::vector<ConvexPolygon> parts;

  static PolyRegion one(ConvexPolygon p);
  bool empty() const;
  Rational area2() const;
  PolyRegion intersect(const ConvexPolygon& p) const;
  PolyRegion intersect(const PolyRegion& r) const;
  PolyRegion image(const AffineMapR& m) const;
  PolyRegion translate(const Vec2R& t) const;
  bool contains_closed(const Vec2R& p) const;
  std::size_t max_coord_bits() const;
};

Rational cross(const Vec2R& o, const Vec2R& a, const Vec2R& b);

/// Intersection point of two segments when they cross at a single point.
std::optional<Vec2R> segment_intersection(const SegmentR& s1, const SegmentR& s2);

}  // namespace conehyp
