#include "conehyp/hyperbolicity.hpp"

#include <cmath>
#include <map>

namespace conehyp {

namespace {

struct StepData {
  CoeffInterval u_min, u_max, s_min, s_max;
  double det_abs = 1.0;
  double weight_abs = 1.0;
};

CoeffInterval mul(const CoeffInterval& a, const CoeffInterval& b) {
  return {a.lo * b.lo, a.hi * b.hi};
}

// Per-step expansion data for branch b followed by branch b_next (the image
// cone region is pinned by where the next symbol's domain lives); hull over
// every cone-region combination the transition can touch.
StepData step_data(const PiecewiseMap& map, int b, int b_next, const ConeTolerances& tol) {
  const auto& br = map.branches[static_cast<std::size_t>(b)].affine();
  Eigen::Matrix2d M = br.jac();

  std::vector<int> src, tgt;
  for (std::size_t e = 0; e < map.cone_domains.size(); ++e) {
    if (br.domain.intersect(map.cone_domains[e].region).area2() != 0)
      src.push_back(static_cast<int>(e));
    const PolyRegion& next_dom =
        b_next >= 0 ? map.branches[static_cast<std::size_t>(b_next)].affine().domain
                    : PolyRegion{};
    if (b_next >= 0) {
      if (next_dom.intersect(map.cone_domains[e].region).area2() != 0)
        tgt.push_back(static_cast<int>(e));
    }
  }
  if (b_next < 0) {
    // final step: image-side regions
    PolyRegion img = br.domain.image(br.map);
    for (std::size_t e = 0; e < map.cone_domains.size(); ++e)
      if (img.intersect(map.cone_domains[e].region).area2() != 0)
        tgt.push_back(static_cast<int>(e));
    if (tgt.empty())
      for (std::size_t e = 0; e < map.cone_domains.size(); ++e)
        tgt.push_back(static_cast<int>(e));
  }

  StepData out;
  bool first = true;
  for (int e : src)
    for (int e2 : tgt) {
      ConeExpansion ce = cone_expansion_unchecked(
          M, map.cone_domains[static_cast<std::size_t>(e)].unstable,
          map.cone_domains[static_cast<std::size_t>(e2)].stable, tol);
      if (first) {
        out.u_min = {ce.u_min, ce.u_min};
        out.u_max = {ce.u_max, ce.u_max};
        out.s_min = {ce.s_min, ce.s_min};
        out.s_max = {ce.s_max, ce.s_max};
        first = false;
      } else {
        out.u_min.lo = std::min(out.u_min.lo, ce.u_min);
        out.u_min.hi = std::max(out.u_min.hi, ce.u_min);
        out.u_max.lo = std::min(out.u_max.lo, ce.u_max);
        out.u_max.hi = std::max(out.u_max.hi, ce.u_max);
        out.s_min.lo = std::min(out.s_min.lo, ce.s_min);
        out.s_min.hi = std::max(out.s_min.hi, ce.s_min);
        out.s_max.lo = std::min(out.s_max.lo, ce.s_max);
        out.s_max.hi = std::max(out.s_max.hi, ce.s_max);
      }
    }
  if (first) throw Error("coefficients: branch touches no cone domain");
  out.det_abs = br.det_abs();
  switch (map.weight.kind) {
    case WeightKind::OneOverDet:
      out.weight_abs = 1.0 / out.det_abs;
      break;
    case WeightKind::ConstantOne:
      out.weight_abs = 1.0;
      break;
    case WeightKind::Custom: {
      double w = 0;
      for (const auto& piece : br.domain.parts)
        for (const auto& v : piece.vertices())
          w = std::max(w, std::abs(map.weight.evaluator(
                              b, {to_double(v.x), to_double(v.y)})));
      out.weight_abs = w;
      break;
    }
  }
  return out;
}

}  // namespace

namespace {

// Sampling backend: per-cylinder Jacobian products at cloud points, padded by
// the branches' Hoelder moduli over the sampled cell diameter.
HyperbolicityReport coefficients_sampled(const PiecewiseMap& map, int n,
                                         const HyperbolicityOptions& opt) {
  HyperbolicityReport rep;
  rep.n = n;
  rep.seed = opt.seed;
  rep.map_hash = map.content_hash();
  auto sampled = enumerate_cylinders_sampled(map, n, opt.oracle_samples, opt.seed);
  ConeTolerances tol;
  rep.lambda = 1e300;
  rep.lambda_u_n_min = 1e300;
  rep.lambda_s_n_max = 0;
  for (const auto& sc : sampled) {
    ItineraryCylinder cyl;
    cyl.word = sc.word;
    CylinderCoeffs c;
    bool first = true;
    double pad = 0.0;
    double diam = 0.0;
    for (std::size_t a = 0; a < sc.points.size(); ++a)
      for (std::size_t b = a + 1; b < sc.points.size(); ++b)
        diam = std::max(diam, (sc.points[a] - sc.points[b]).norm());
    for (const auto& q0 : sc.points) {
      Eigen::Vector2d q = q0;
      CylinderCoeffs pc;
      pc.u_min = pc.u_max = pc.s_min = pc.s_max = {1.0, 1.0};
      pc.det_abs = {1.0, 1.0};
      pc.weight_abs = {1.0, 1.0};
      for (int k = 0; k < n; ++k) {
        int bi = sc.word[static_cast<std::size_t>(k)];
        const auto& br = map.branches[static_cast<std::size_t>(bi)];
        Eigen::Matrix2d jac = br.is_affine() ? br.affine().jac() : br.oracle().jacobian(q);
        double holder = br.is_affine() ? 0.0 : br.oracle().holder_const;
        double alpha = br.is_affine() ? 1.0 : br.oracle().holder_alpha;
        pad = std::max(pad, holder * std::pow(std::max(diam, 1e-12), alpha));
        int e = map.cone_index_at(q);
        Eigen::Vector2d p = br.is_affine()
                                ? Eigen::Vector2d(jac * q + Eigen::Vector2d(
                                                                to_double(br.affine().map.off.x),
                                                                to_double(br.affine().map.off.y)))
                                : br.oracle().map(q);
        int e2 = map.cone_index_at(p);
        if (e < 0) e = 0;
        if (e2 < 0) e2 = 0;
        ConeExpansion ce = cone_expansion_unchecked(
            jac, map.cone_domains[static_cast<std::size_t>(e)].unstable,
            map.cone_domains[static_cast<std::size_t>(e2)].stable, tol);
        pc.u_min = mul(pc.u_min, {ce.u_min, ce.u_min});
        pc.u_max = mul(pc.u_max, {ce.u_max, ce.u_max});
        pc.s_min = mul(pc.s_min, {ce.s_min, ce.s_min});
        pc.s_max = mul(pc.s_max, {ce.s_max, ce.s_max});
        double det = std::abs(jac.determinant());
        pc.det_abs = mul(pc.det_abs, {det, det});
        double w = map.weight.eval(bi, q, det);
        pc.weight_abs = mul(pc.weight_abs, {std::abs(w), std::abs(w)});
        q = p;
      }
      if (first) {
        c = pc;
        first = false;
      } else {
        c.u_min.lo = std::min(c.u_min.lo, pc.u_min.lo);
        c.u_min.hi = std::max(c.u_min.hi, pc.u_min.hi);
        c.u_max.lo = std::min(c.u_max.lo, pc.u_max.lo);
        c.u_max.hi = std::max(c.u_max.hi, pc.u_max.hi);
        c.s_min.lo = std::min(c.s_min.lo, pc.s_min.lo);
        c.s_min.hi = std::max(c.s_min.hi, pc.s_min.hi);
        c.s_max.lo = std::min(c.s_max.lo, pc.s_max.lo);
        c.s_max.hi = std::max(c.s_max.hi, pc.s_max.hi);
        c.det_abs.lo = std::min(c.det_abs.lo, pc.det_abs.lo);
        c.det_abs.hi = std::max(c.det_abs.hi, pc.det_abs.hi);
        c.weight_abs.lo = std::min(c.weight_abs.lo, pc.weight_abs.lo);
        c.weight_abs.hi = std::max(c.weight_abs.hi, pc.weight_abs.hi);
      }
    }
    // Hoelder padding over the region cover (relative, per step count)
    double rel = 1.0 + pad;
    c.u_min.lo /= std::pow(rel, n);
    c.u_max.hi *= std::pow(rel, n);
    c.s_min.lo /= std::pow(rel, n);
    c.s_max.hi *= std::pow(rel, n);
    c.det_abs.lo /= std::pow(rel, 2 * n);
    c.det_abs.hi *= std::pow(rel, 2 * n);
    c.weight_abs.hi *= std::pow(rel, 2 * n);
    cyl.coeffs = c;
    rep.lambda = std::min({rep.lambda, std::pow(c.u_min.lo, 1.0 / n),
                           std::pow(1.0 / c.s_max.hi, 1.0 / n)});
    rep.lambda_u_n_min = std::min(rep.lambda_u_n_min, c.u_min.lo);
    rep.lambda_s_n_max = std::max(rep.lambda_s_n_max, c.s_max.hi);
    rep.cylinders.push_back(std::move(cyl));
  }
  return rep;
}

}  // namespace

HyperbolicityReport coefficients(const PiecewiseMap& map, int n, const HyperbolicityOptions& opt) {
  if (!map.all_affine()) return coefficients_sampled(map, n, opt);
  HyperbolicityReport rep;
  rep.n = n;
  rep.seed = opt.seed;
  rep.map_hash = map.content_hash();
  rep.cylinders = enumerate_cylinders(map, n, opt.enumeration);

  ConeTolerances tol;
  std::map<std::pair<int, int>, StepData> cache;
  auto step = [&](int b, int b_next) -> const StepData& {
    auto key = std::make_pair(b, b_next);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, step_data(map, b, b_next, tol)).first;
    return it->second;
  };

  rep.lambda = 1e300;
  rep.lambda_u_n_min = 1e300;
  rep.lambda_s_n_max = 0;
  for (auto& cyl : rep.cylinders) {
    CylinderCoeffs c;
    c.u_min = c.u_max = c.s_min = c.s_max = {1.0, 1.0};
    c.det_abs = {1.0, 1.0};
    c.weight_abs = {1.0, 1.0};
    for (std::size_t k = 0; k < cyl.word.size(); ++k) {
      int b = cyl.word[k];
      int b_next = k + 1 < cyl.word.size() ? cyl.word[k + 1] : -1;
      const StepData& sd = step(b, b_next);
      c.u_min = mul(c.u_min, sd.u_min);
      c.u_max = mul(c.u_max, sd.u_max);
      c.s_min = mul(c.s_min, sd.s_min);
      c.s_max = mul(c.s_max, sd.s_max);
      c.det_abs = mul(c.det_abs, {sd.det_abs, sd.det_abs});
      c.weight_abs = mul(c.weight_abs, {sd.weight_abs, sd.weight_abs});
      rep.lambda = std::min({rep.lambda, sd.u_min.lo, 1.0 / sd.s_max.hi});
    }
    rep.lambda_u_n_min = std::min(rep.lambda_u_n_min, c.u_min.lo);
    rep.lambda_s_n_max = std::max(rep.lambda_s_n_max, c.s_max.hi);
    cyl.coeffs = c;
  }
  return rep;
}

BunchingCertificate check_bunching(const HyperbolicityReport& report, double alpha, double beta,
                                   AnalysisMode mode) {
  if (!(beta > 0 && beta < alpha && alpha <= 1.0))
    throw Error("check_bunching: need 0 < beta < alpha <= 1");
  BunchingCertificate cert;
  cert.n = report.n;
  cert.alpha = alpha;
  cert.beta = beta;
  cert.mode = mode;
  cert.sup_value = {0, 0};
  for (const auto& cyl : report.cylinders) {
    if (!cyl.coeffs) throw MissingReport("check_bunching: cylinder coefficients missing");
    const auto& c = *cyl.coeffs;
    double hi, lo;
    if (mode == AnalysisMode::Forward) {
      hi = std::pow(c.s_max.hi, alpha - beta) * std::pow(c.u_max.hi, 1 + beta) / c.u_min.lo;
      lo = std::pow(c.s_max.lo, alpha - beta) * std::pow(c.u_max.lo, 1 + beta) / c.u_min.hi;
    } else {
      // time-reversed coefficients: contraction 1/u_min, strongest expansion
      // 1/s_min, weakest expansion 1/s_max
      hi = std::pow(c.u_min.lo, beta - alpha) * std::pow(c.s_min.lo, -(1 + beta)) * c.s_max.hi;
      lo = std::pow(c.u_min.hi, beta - alpha) * std::pow(c.s_min.hi, -(1 + beta)) * c.s_max.lo;
    }
    if (hi > cert.sup_value.hi) {
      cert.sup_value.hi = hi;
      cert.argmax_word = cyl.word;
    }
    cert.sup_value.lo = std::max(cert.sup_value.lo, lo);
  }
  cert.passed = cert.sup_value.hi < 1.0;
  return cert;
}

std::optional<double> find_beta(const HyperbolicityReport& report, double alpha,
                                AnalysisMode mode, const FindBetaOptions& opt) {
  for (int k = opt.grid - 1; k >= 1; --k) {
    double beta = alpha * static_cast<double>(k) / opt.grid;
    if (check_bunching(report, alpha, beta, mode).passed) return beta;
  }
  return std::nullopt;
}

}  // namespace conehyp
