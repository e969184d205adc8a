#include "conehyp/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

namespace conehyp {

namespace {

struct TaggedPoly {
  ConvexPolygon poly;
  std::vector<int> words;  // distinct word ids sharing this exact polygon
  double bx0, by0, bx1, by1;
};

struct BBoxGrid {
  double x0, y0, x1, y1;
  int g;
  std::vector<std::vector<int>> cells;

  BBoxGrid(const std::vector<TaggedPoly>& polys) {
    x0 = y0 = 1e300;
    x1 = y1 = -1e300;
    for (const auto& p : polys) {
      x0 = std::min(x0, p.bx0);
      y0 = std::min(y0, p.by0);
      x1 = std::max(x1, p.bx1);
      y1 = std::max(y1, p.by1);
    }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    g = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(polys.size()))));
    cells.assign(static_cast<std::size_t>(g) * g, {});
    for (std::size_t i = 0; i < polys.size(); ++i) {
      int cx0, cy0, cx1, cy1;
      cell_range(polys[i].bx0, polys[i].by0, polys[i].bx1, polys[i].by1, cx0, cy0, cx1, cy1);
      for (int cx = cx0; cx <= cx1; ++cx)
        for (int cy = cy0; cy <= cy1; ++cy)
          cells[static_cast<std::size_t>(cy) * g + cx].push_back(static_cast<int>(i));
    }
  }

  void cell_range(double bx0, double by0, double bx1, double by1, int& cx0, int& cy0, int& cx1,
                  int& cy1) const {
    auto clampi = [&](int v) { return std::min(g - 1, std::max(0, v)); };
    cx0 = clampi(static_cast<int>((bx0 - x0) / (x1 - x0) * g) - 1);
    cx1 = clampi(static_cast<int>((bx1 - x0) / (x1 - x0) * g) + 1);
    cy0 = clampi(static_cast<int>((by0 - y0) / (y1 - y0) * g) - 1);
    cy1 = clampi(static_cast<int>((by1 - y0) / (y1 - y0) * g) + 1);
  }

  void candidates_at(double px, double py, std::vector<int>& out,
                     std::vector<int>& stamp, int epoch) const {
    out.clear();
    int cx0, cy0, cx1, cy1;
    cell_range(px, py, px, py, cx0, cy0, cx1, cy1);
    for (int cx = cx0; cx <= cx1; ++cx)
      for (int cy = cy0; cy <= cy1; ++cy)
        for (int id : cells[static_cast<std::size_t>(cy) * g + cx])
          if (stamp[static_cast<std::size_t>(id)] != epoch) {
            stamp[static_cast<std::size_t>(id)] = epoch;
            out.push_back(id);
          }
  }
};

long long max_multiplicity(const std::vector<std::pair<int, ConvexPolygon>>& word_polys,
                           int num_words, ComplexityWitness* witness) {
  // dedupe identical polygons, collecting the word ids behind each
  std::map<std::string, TaggedPoly> dedup;
  for (const auto& [w, p] : word_polys) {
    if (p.empty()) continue;
    auto& t = dedup[p.canonical_key()];
    if (t.words.empty()) {
      t.poly = p;
      Rational a, b, c, d;
      p.bbox(a, b, c, d);
      t.bx0 = to_double(a);
      t.by0 = to_double(b);
      t.bx1 = to_double(c);
      t.by1 = to_double(d);
    }
    if (std::find(t.words.begin(), t.words.end(), w) == t.words.end()) t.words.push_back(w);
  }
  std::vector<TaggedPoly> polys;
  polys.reserve(dedup.size());
  for (auto& [k, t] : dedup) polys.push_back(std::move(t));
  if (polys.empty()) return 0;

  BBoxGrid grid(polys);
  std::vector<int> stamp(polys.size(), -1), near;
  int epoch = 0;

  // candidate points: vertices, edge midpoints, pairwise edge crossings
  std::vector<Vec2R> candidates;
  for (const auto& t : polys) {
    const auto& vs = t.poly.vertices();
    for (std::size_t i = 0; i < vs.size(); ++i) {
      candidates.push_back(vs[i]);
      const auto& q = vs[(i + 1) % vs.size()];
      candidates.push_back({(vs[i].x + q.x) / 2, (vs[i].y + q.y) / 2});
    }
  }
  for (std::size_t i = 0; i < polys.size(); ++i) {
    ++epoch;
    grid.candidates_at((polys[i].bx0 + polys[i].bx1) / 2, (polys[i].by0 + polys[i].by1) / 2, near,
                       stamp, epoch);
    // bbox-overlap pairs only
    for (std::size_t j = i + 1; j < polys.size(); ++j) {
      if (polys[i].bx1 < polys[j].bx0 || polys[j].bx1 < polys[i].bx0 ||
          polys[i].by1 < polys[j].by0 || polys[j].by1 < polys[i].by0)
        continue;
      for (const auto& e1 : polys[i].poly.edges())
        for (const auto& e2 : polys[j].poly.edges())
          if (auto p = segment_intersection(e1, e2)) candidates.push_back(*p);
    }
  }

  // count distinct words at every candidate
  long long best = 0;
  std::vector<char> word_seen(static_cast<std::size_t>(num_words), 0);
  std::vector<int> seen_list;
  Vec2R best_point;
  std::vector<int> best_words;
  for (const auto& c : candidates) {
    ++epoch;
    grid.candidates_at(to_double(c.x), to_double(c.y), near, stamp, epoch);
    seen_list.clear();
    for (int id : near) {
      const auto& t = polys[static_cast<std::size_t>(id)];
      if (!t.poly.contains_closed(c)) continue;
      for (int w : t.words)
        if (!word_seen[static_cast<std::size_t>(w)]) {
          word_seen[static_cast<std::size_t>(w)] = 1;
          seen_list.push_back(w);
        }
    }
    if (static_cast<long long>(seen_list.size()) > best) {
      best = static_cast<long long>(seen_list.size());
      best_point = c;
      best_words = seen_list;
    }
    for (int w : seen_list) word_seen[static_cast<std::size_t>(w)] = 0;
  }
  if (witness) {
    witness->point = best_point;
    witness->words.clear();
    std::sort(best_words.begin(), best_words.end());
    witness->words.reserve(best_words.size());
    for (int w : best_words) witness->words.push_back({w});
  }
  return best;
}

long long complexity_of(const PiecewiseMap& map, int n, const ComplexityOptions& opt, bool end,
                        ComplexityWitness* witness) {
  auto cylinders = enumerate_cylinders(map, n, opt.enumeration);
  std::vector<std::pair<int, ConvexPolygon>> word_polys;
  std::vector<std::vector<int>> words;
  for (std::size_t w = 0; w < cylinders.size(); ++w) {
    words.push_back(cylinders[w].word);
    for (const auto& piece : cylinders[w].pieces) {
      if (piece.poly.max_coord_bits() > opt.enumeration.bit_budget)
        throw ArithmeticOverflow("complexity: rational bit budget exceeded");
      word_polys.emplace_back(static_cast<int>(w),
                              end ? piece.poly.image(piece.composed) : piece.poly);
    }
  }
  ComplexityWitness wit;
  long long result = max_multiplicity(word_polys, static_cast<int>(cylinders.size()),
                                      witness ? &wit : nullptr);
  if (witness) {
    witness->point = wit.point;
    witness->words.clear();
    for (const auto& idx : wit.words)
      witness->words.push_back(words[static_cast<std::size_t>(idx[0])]);
  }
  return result;
}

}  // namespace

long long complexity_begin(const PiecewiseMap& map, int n, const ComplexityOptions& opt,
                           ComplexityWitness* witness) {
  return complexity_of(map, n, opt, /*end=*/false, witness);
}

long long complexity_end(const PiecewiseMap& map, int n, const ComplexityOptions& opt,
                         ComplexityWitness* witness) {
  return complexity_of(map, n, opt, /*end=*/true, witness);
}

SampledComplexity complexity_sampled(const PiecewiseMap& map, int n, bool end, int samples,
                                     int probe_grid, double dilation, unsigned seed) {
  auto cylinders = enumerate_cylinders_sampled(map, n, samples, seed);
  // clouds per word; the image side pushes every point through its itinerary
  std::vector<std::vector<Eigen::Vector2d>> clouds;
  for (const auto& sc : cylinders) {
    std::vector<Eigen::Vector2d> cloud;
    for (const auto& q0 : sc.points) {
      Eigen::Vector2d q = q0;
      if (end) {
        for (int k = 0; k < n; ++k) {
          const auto& br = map.branches[static_cast<std::size_t>(sc.word[static_cast<std::size_t>(k)])];
          if (br.is_affine()) {
            q = br.affine().jac() * q +
                Eigen::Vector2d(to_double(br.affine().map.off.x),
                                to_double(br.affine().map.off.y));
          } else {
            q = br.oracle().map(q);
          }
        }
      }
      cloud.push_back(q);
    }
    clouds.push_back(std::move(cloud));
  }
  Rational bx0, by0, bx1, by1;
  map.carrier.polygon.bbox(bx0, by0, bx1, by1);
  double x0 = to_double(bx0), y0 = to_double(by0), x1 = to_double(bx1), y1 = to_double(by1);
  SampledComplexity out;
  for (int j = 0; j < probe_grid; ++j)
    for (int i = 0; i < probe_grid; ++i) {
      Eigen::Vector2d probe(x0 + (x1 - x0) * (i + 0.5) / probe_grid,
                            y0 + (y1 - y0) * (j + 0.5) / probe_grid);
      long long lo = 0, hi = 0;
      for (const auto& cloud : clouds) {
        double dist = 1e300;
        for (const auto& p : cloud) dist = std::min(dist, (p - probe).norm());
        if (dist <= dilation / 8) ++lo;
        if (dist <= dilation) ++hi;
      }
      out.lower = std::max(out.lower, lo);
      out.upper = std::max(out.upper, hi);
    }
  return out;
}

ComplexityReport complexity_range(const PiecewiseMap& map, int n_max,
                                  const ComplexityOptions& opt) {
  ComplexityReport rep;
  for (int n = 1; n <= n_max; ++n) {
    rep.ns.push_back(n);
    try {
      rep.d_begin.push_back(complexity_begin(map, n, opt));
      rep.d_end.push_back(complexity_end(map, n, opt));
    } catch (const ArithmeticOverflow&) {
      // degrade to the sampling backend and flag the report
      SampledComplexity sb = complexity_sampled(map, n, false, 4000, 64, 0.05, 1);
      SampledComplexity se = complexity_sampled(map, n, true, 4000, 64, 0.05, 1);
      rep.d_begin.push_back(sb.upper);
      rep.d_end.push_back(se.upper);
      rep.exact = false;
      rep.flags = "bit budget exceeded at depth " + std::to_string(n) +
                  "; sampling-backend dilation bounds reported";
    }
  }
  return rep;
}

GrowthRates growth_rate(const ComplexityReport& report) {
  GrowthRates g;
  auto fill = [&](const std::vector<long long>& d, std::vector<double>& rates,
                  std::vector<double>& fekete) {
    double best = 1e300;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double n = static_cast<double>(report.ns[i]);
      double r = std::pow(static_cast<double>(d[i]), 1.0 / n);
      rates.push_back(r);
      best = std::min(best, r);
      fekete.push_back(best);
    }
  };
  fill(report.d_begin, g.rates_begin, g.fekete_begin);
  fill(report.d_end, g.rates_end, g.fekete_end);
  auto trending = [&](const std::vector<double>& fekete) {
    if (fekete.empty()) return false;
    std::size_t last = fekete.size() - 1;
    std::size_t half = last / 2;
    double tail = fekete[last] - 1.0;
    double mid = fekete[half] - 1.0;
    if (tail <= 1e-12) return true;
    return tail <= g.decay_window * mid + 1e-12;
  };
  g.subexponential_evidence = trending(g.fekete_begin) && trending(g.fekete_end);
  return g;
}

}  // namespace conehyp
