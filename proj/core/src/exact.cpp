#include "conehyp/exact.hpp"

#include <algorithm>
#include <sstream>

namespace conehyp {

Rational rational_from_decimal(const std::string& s) {
  std::string t = s;
  bool neg = false;
  std::size_t i = 0;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) {
    neg = t[i] == '-';
    ++i;
  }
  std::string digits;
  long frac_digits = 0;
  bool seen_dot = false;
  long exp10 = 0;
  for (; i < t.size(); ++i) {
    char c = t[i];
    if (c == '.') {
      if (seen_dot) throw ConfigError("bad decimal literal: " + s);
      seen_dot = true;
    } else if (c == 'e' || c == 'E') {
      exp10 = std::stol(t.substr(i + 1));
      break;
    } else if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_dot) ++frac_digits;
    } else if (c == '/') {
      // plain fraction "p/q"
      Rational num(BigInt(t.substr(0, i)), BigInt(t.substr(i + 1)));
      return num;
    } else {
      throw ConfigError("bad decimal literal: " + s);
    }
  }
  if (digits.empty()) throw ConfigError("bad decimal literal: " + s);
  // strip leading zeros so the big-integer parser never sees an octal prefix
  std::size_t nz = digits.find_first_not_of('0');
  digits = nz == std::string::npos ? "0" : digits.substr(nz);
  BigInt n(digits);
  Rational r(n, 1);
  long shift = exp10 - frac_digits;
  BigInt ten(10);
  if (shift > 0)
    for (long k = 0; k < shift; ++k) r *= ten;
  else
    for (long k = 0; k < -shift; ++k) r /= ten;
  return neg ? -r : r;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::size_t rational_bits(const Rational& r) {
  const BigInt num = boost::multiprecision::numerator(r);
  const BigInt den = boost::multiprecision::denominator(r);
  auto bits = [](const BigInt& v) {
    return v == 0 ? std::size_t(1) : boost::multiprecision::msb(boost::multiprecision::abs(v)) + 1;
  };
  return std::max(bits(num), bits(den));
}

Mat2R Mat2R::inverse() const {
  Rational dt = det();
  if (dt == 0) throw SingularMatrix("Mat2R: zero determinant");
  return {d / dt, -b / dt, -c / dt, a / dt};
}

AffineMapR AffineMapR::inverse() const {
  Mat2R li = lin.inverse();
  Vec2R o = li.apply(off);
  return {li, {-o.x, -o.y}};
}

Rational cross(const Vec2R& o, const Vec2R& a, const Vec2R& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

ConvexPolygon ConvexPolygon::box(const Rational& x0, const Rational& y0, const Rational& x1,
                                 const Rational& y1) {
  ConvexPolygon p;
  if (x1 <= x0 || y1 <= y0) return p;
  p.vs_ = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  return p;
}

void ConvexPolygon::normalize() {
  if (vs_.size() < 3) {
    vs_.clear();
    return;
  }
  // drop consecutive duplicates
  std::vector<Vec2R> out;
  for (const auto& v : vs_)
    if (out.empty() || !(out.back() == v)) out.push_back(v);
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  // drop collinear vertices
  std::vector<Vec2R> final_vs;
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2R& prev = out[(i + n - 1) % n];
    const Vec2R& cur = out[i];
    const Vec2R& next = out[(i + 1) % n];
    if (cross(prev, cur, next) != 0) final_vs.push_back(cur);
  }
  vs_ = std::move(final_vs);
  if (vs_.size() < 3) {
    vs_.clear();
    return;
  }
  // orientation
  Rational a2 = 0;
  for (std::size_t i = 0; i < vs_.size(); ++i) {
    const auto& p = vs_[i];
    const auto& q = vs_[(i + 1) % vs_.size()];
    a2 += p.x * q.y - q.x * p.y;
  }
  if (a2 == 0) {
    vs_.clear();
    return;
  }
  if (a2 < 0) std::reverse(vs_.begin(), vs_.end());
}

ConvexPolygon ConvexPolygon::from_points(std::vector<Vec2R> pts) {
  // monotone chain hull
  std::sort(pts.begin(), pts.end(), [](const Vec2R& a, const Vec2R& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  ConvexPolygon out;
  if (pts.size() < 3) return out;
  std::vector<Vec2R> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  std::size_t lower = k + 1;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
    while (k >= lower && cross(h[k - 2], h[k - 1], *it) <= 0) --k;
    h[k++] = *it;
  }
  h.resize(k - 1);
  out.vs_ = std::move(h);
  out.normalize();
  return out;
}

Rational ConvexPolygon::area2() const {
  Rational a = 0;
  for (std::size_t i = 0; i < vs_.size(); ++i) {
    const auto& p = vs_[i];
    const auto& q = vs_[(i + 1) % vs_.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return a;
}

ConvexPolygon ConvexPolygon::clip_halfplane(const Rational& a, const Rational& b,
                                            const Rational& c) const {
  ConvexPolygon out;
  if (empty()) return out;
  const std::size_t n = vs_.size();
  std::vector<Vec2R> res;
  res.reserve(n + 2);
  auto val = [&](const Vec2R& p) { return a * p.x + b * p.y - c; };
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2R& p = vs_[i];
    const Vec2R& q = vs_[(i + 1) % n];
    Rational vp = val(p), vq = val(q);
    if (vp <= 0) res.push_back(p);
    if ((vp < 0 && vq > 0) || (vp > 0 && vq < 0)) {
      Rational t = vp / (vp - vq);
      res.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
    }
  }
  out.vs_ = std::move(res);
  out.normalize();
  return out;
}

ConvexPolygon ConvexPolygon::intersect(const ConvexPolygon& other) const {
  if (empty() || other.empty()) return {};
  ConvexPolygon cur = *this;
  const auto& vs = other.vs_;
  for (std::size_t i = 0; i < vs.size() && !cur.empty(); ++i) {
    const Vec2R& p = vs[i];
    const Vec2R& q = vs[(i + 1) % vs.size()];
    // inside is the left of p->q for CCW: cross(p, q, z) >= 0
    // as halfplane: (q.y - p.y) x - (q.x - p.x) y <= q.y*p.x... derive:
    // cross = (q.x-p.x)(z.y-p.y) - (q.y-p.y)(z.x-p.x) >= 0
    Rational a = q.y - p.y;
    Rational b = p.x - q.x;
    Rational c = a * p.x + b * p.y;
    cur = cur.clip_halfplane(a, b, c);
  }
  return cur;
}

ConvexPolygon ConvexPolygon::image(const AffineMapR& m) const {
  ConvexPolygon out;
  out.vs_.reserve(vs_.size());
  for (const auto& v : vs_) out.vs_.push_back(m.apply(v));
  out.normalize();
  return out;
}

ConvexPolygon ConvexPolygon::translate(const Vec2R& t) const {
  ConvexPolygon out;
  out.vs_.reserve(vs_.size());
  for (const auto& v : vs_) out.vs_.push_back(v + t);
  return out;
}

bool ConvexPolygon::contains_closed(const Vec2R& p) const {
  if (empty()) return false;
  const std::size_t n = vs_.size();
  for (std::size_t i = 0; i < n; ++i)
    if (cross(vs_[i], vs_[(i + 1) % n], p) < 0) return false;
  return true;
}

void ConvexPolygon::bbox(Rational& x0, Rational& y0, Rational& x1, Rational& y1) const {
  x0 = y0 = Rational(1);
  x1 = y1 = Rational(0);
  if (empty()) return;
  x0 = x1 = vs_[0].x;
  y0 = y1 = vs_[0].y;
  for (const auto& v : vs_) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
}

std::vector<SegmentR> ConvexPolygon::edges() const {
  std::vector<SegmentR> out;
  const std::size_t n = vs_.size();
  for (std::size_t i = 0; i < n; ++i) out.push_back({vs_[i], vs_[(i + 1) % n]});
  return out;
}

std::size_t ConvexPolygon::max_coord_bits() const {
  std::size_t m = 1;
  for (const auto& v : vs_) m = std::max({m, rational_bits(v.x), rational_bits(v.y)});
  return m;
}

std::string ConvexPolygon::canonical_key() const {
  if (empty()) return "<empty>";
  // rotate so the lexicographically smallest vertex comes first
  std::size_t best = 0;
  for (std::size_t i = 1; i < vs_.size(); ++i) {
    const auto& a = vs_[i];
    const auto& b = vs_[best];
    if (a.x < b.x || (a.x == b.x && a.y < b.y)) best = i;
  }
  std::ostringstream os;
  for (std::size_t k = 0; k < vs_.size(); ++k) {
    const auto& v = vs_[(best + k) % vs_.size()];
    os << v.x << ',' << v.y << ';';
  }
  return os.str();
}

PolyRegion PolyRegion::one(ConvexPolygon p) {
  PolyRegion r;
  if (!p.empty()) r.parts.push_back(std::move(p));
  return r;
}

bool PolyRegion::empty() const {
  for (const auto& p : parts)
    if (!p.empty()) return false;
  return true;
}

Rational PolyRegion::area2() const {
  Rational a = 0;
  for (const auto& p : parts) a += p.area2();
  return a;
}

PolyRegion PolyRegion::intersect(const ConvexPolygon& p) const {
  PolyRegion out;
  for (const auto& q : parts) {
    ConvexPolygon r = q.intersect(p);
    if (!r.empty()) out.parts.push_back(std::move(r));
  }
  return out;
}

PolyRegion PolyRegion::intersect(const PolyRegion& r) const {
  PolyRegion out;
  for (const auto& p : parts)
    for (const auto& q : r.parts) {
      ConvexPolygon s = p.intersect(q);
      if (!s.empty()) out.parts.push_back(std::move(s));
    }
  return out;
}

PolyRegion PolyRegion::image(const AffineMapR& m) const {
  PolyRegion out;
  for (const auto& p : parts) {
    ConvexPolygon q = p.image(m);
    if (!q.empty()) out.parts.push_back(std::move(q));
  }
  return out;
}

PolyRegion PolyRegion::translate(const Vec2R& t) const {
  PolyRegion out;
  for (const auto& p : parts) out.parts.push_back(p.translate(t));
  return out;
}

bool PolyRegion::contains_closed(const Vec2R& p) const {
  for (const auto& q : parts)
    if (q.contains_closed(p)) return true;
  return false;
}

std::size_t PolyRegion::max_coord_bits() const {
  std::size_t m = 1;
  for (const auto& p : parts) m = std::max(m, p.max_coord_bits());
  return m;
}

std::optional<Vec2R> segment_intersection(const SegmentR& s1, const SegmentR& s2) {
  Vec2R r = s1.b - s1.a;
  Vec2R s = s2.b - s2.a;
  Rational denom = r.x * s.y - r.y * s.x;
  if (denom == 0) return std::nullopt;  // parallel or collinear
  Vec2R qp = s2.a - s1.a;
  Rational t = (qp.x * s.y - qp.y * s.x) / denom;
  Rational u = (qp.x * r.y - qp.y * r.x) / denom;
  if (t < 0 || t > 1 || u < 0 || u > 1) return std::nullopt;
  return Vec2R{s1.a.x + t * r.x, s1.a.y + t * r.y};
}

}  // namespace conehyp
