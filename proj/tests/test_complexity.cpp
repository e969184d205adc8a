#include <doctest.h>

#include <map>

#include "conehyp/complexity.hpp"

using namespace conehyp;

namespace {

// independent oracle: pairwise closed-polygon intersections provide candidate
// points; containment counted naively over every polygon
long long closure_oracle(const std::vector<ItineraryCylinder>& cylinders, bool end) {
  std::vector<std::pair<int, ConvexPolygon>> polys;
  for (std::size_t w = 0; w < cylinders.size(); ++w)
    for (const auto& piece : cylinders[w].pieces)
      polys.emplace_back(static_cast<int>(w),
                         end ? piece.poly.image(piece.composed) : piece.poly);
  std::vector<Vec2R> candidates;
  for (const auto& [w, p] : polys)
    for (const auto& v : p.vertices()) candidates.push_back(v);
  for (std::size_t i = 0; i < polys.size(); ++i)
    for (std::size_t j = i + 1; j < polys.size(); ++j) {
      ConvexPolygon inter = polys[i].second.intersect(polys[j].second);
      for (const auto& v : inter.vertices()) candidates.push_back(v);
      // closures meeting in a segment or point leave no intersection polygon;
      // fall back to edge crossings
      for (const auto& e1 : polys[i].second.edges())
        for (const auto& e2 : polys[j].second.edges())
          if (auto p = segment_intersection(e1, e2)) candidates.push_back(*p);
    }
  long long best = 0;
  for (const auto& c : candidates) {
    std::map<int, bool> words;
    for (const auto& [w, p] : polys)
      if (p.contains_closed(c)) words[w] = true;
    best = std::max(best, static_cast<long long>(words.size()));
  }
  return best;
}

}  // namespace

TEST_CASE("doubling model: breakpoints carry two cylinders, images carry 2^n") {
  PiecewiseMap doubling = builtin_doubling();
  for (int n = 1; n <= 6; ++n) {
    CHECK(complexity_begin(doubling, n) == 2);
    CHECK(complexity_end(doubling, n) == (1LL << n));
  }
}

TEST_CASE("single full branch has complexity one") {
  PiecewiseMap cat = builtin_toral({2, 1, 1, 1});
  CHECK(complexity_begin(cat, 3) == 1);
  CHECK(complexity_end(cat, 3) == 1);
}

TEST_CASE("exact counts match the pairwise-closure oracle on the lozi map") {
  PiecewiseMap lozi = builtin_lozi(Rational(17, 10), Rational(1, 2), lozi_default_domain());
  for (int n = 1; n <= 4; ++n) {
    auto cylinders = enumerate_cylinders(lozi, n);
    CHECK(complexity_begin(lozi, n) == closure_oracle(cylinders, false));
    CHECK(complexity_end(lozi, n) == closure_oracle(cylinders, true));
  }
}

TEST_CASE("exact counts match the oracle on the baker map") {
  PiecewiseMap baker = builtin_baker();
  for (int n = 1; n <= 4; ++n) {
    auto cylinders = enumerate_cylinders(baker, n);
    CHECK(complexity_begin(baker, n) == closure_oracle(cylinders, false));
    CHECK(complexity_end(baker, n) == closure_oracle(cylinders, true));
  }
}

TEST_CASE("submultiplicativity holds exactly for computed depths") {
  PiecewiseMap lozi = builtin_lozi(Rational(17, 10), Rational(1, 2), lozi_default_domain());
  ComplexityReport rep = complexity_range(lozi, 6);
  for (std::size_t i = 0; i < rep.ns.size(); ++i)
    for (std::size_t j = 0; j < rep.ns.size(); ++j) {
      int n = rep.ns[i], m = rep.ns[j];
      if (n + m > 6) continue;
      long long dnm_b = rep.d_begin[static_cast<std::size_t>(n + m - 1)];
      long long dnm_e = rep.d_end[static_cast<std::size_t>(n + m - 1)];
      CHECK(dnm_b <= rep.d_begin[i] * rep.d_begin[j]);
      CHECK(dnm_e <= rep.d_end[i] * rep.d_end[j]);
    }
}

TEST_CASE("time reversal: image complexity equals the inverse map's begin count") {
  PiecewiseMap baker = builtin_baker();
  PiecewiseMap inv = invert(baker);
  for (int n = 1; n <= 6; ++n) CHECK(complexity_end(baker, n) == complexity_begin(inv, n));
}

TEST_CASE("growth verdicts separate bounded from exponential complexity") {
  ComplexityReport bounded;
  ComplexityReport expo;
  for (int n = 1; n <= 10; ++n) {
    bounded.ns.push_back(n);
    bounded.d_begin.push_back(2);
    bounded.d_end.push_back(2);
    expo.ns.push_back(n);
    expo.d_begin.push_back(1LL << n);
    expo.d_end.push_back(1LL << n);
  }
  CHECK(growth_rate(bounded).subexponential_evidence);
  CHECK(!growth_rate(expo).subexponential_evidence);
  CHECK(growth_rate(bounded).label == "heuristic");
}

TEST_CASE("witness points name the meeting cylinders") {
  PiecewiseMap doubling = builtin_doubling();
  ComplexityOptions opt;
  opt.want_witness = true;
  ComplexityWitness wit;
  long long d = complexity_begin(doubling, 3, opt, &wit);
  CHECK(d == 2);
  CHECK(wit.words.size() == 2);
  // the two words share a dyadic breakpoint
  CHECK(wit.words[0] != wit.words[1]);
}

TEST_CASE("sampling bounds bracket the exact counts on the doubling model") {
  PiecewiseMap doubling = builtin_doubling();
  for (int n = 2; n <= 4; ++n) {
    long long exact_b = complexity_begin(doubling, n);
    long long exact_e = complexity_end(doubling, n);
    SampledComplexity sb = complexity_sampled(doubling, n, false, 6000, 48, 0.04, 2);
    SampledComplexity se = complexity_sampled(doubling, n, true, 6000, 48, 0.04, 2);
    CHECK(sb.lower <= exact_b);
    CHECK(exact_b <= sb.upper);
    CHECK(se.lower <= exact_e);
    CHECK(exact_e <= se.upper);
  }
}
