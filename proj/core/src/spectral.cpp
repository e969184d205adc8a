#include "conehyp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace conehyp {

FeasibilityResult feasible(const SpectralParams& pr, AnalysisMode mode) {
  FeasibilityResult r;
  const double p = pr.p, t = pr.t, s = pr.s, beta = pr.beta, alpha = pr.alpha;
  const double as = std::abs(s);
  r.margins.emplace_back("s-(1/p-1)", s - (1.0 / p - 1.0));
  r.margins.emplace_back("-s", -s);
  r.margins.emplace_back("t", t);
  r.margins.emplace_back("1/p-t", 1.0 / p - t);
  if (mode == AnalysisMode::Forward) {
    r.margins.emplace_back("(t-|s|)+beta", (t - as) + beta);
    r.margins.emplace_back("|s|-t", as - t);
    r.margins.emplace_back("alpha-alpha*t-|s|", alpha - alpha * t - as);
  } else {
    r.margins.emplace_back("(|s|-t)+beta", (as - t) + beta);
    r.margins.emplace_back("t-|s|", t - as);
    r.margins.emplace_back("alpha-alpha*|s|-t", alpha - alpha * as - t);
  }
  r.min_margin = 1e300;
  r.feasible = true;
  for (const auto& [name, m] : r.margins) {
    r.min_margin = std::min(r.min_margin, m);
    if (!(m > 0)) r.feasible = false;
  }
  if (!(p > 1.0)) r.feasible = false;
  return r;
}

CylinderWeights CylinderWeights::from_report(const HyperbolicityReport& report) {
  CylinderWeights w;
  for (const auto& cyl : report.cylinders) {
    if (!cyl.coeffs) throw MissingReport("CylinderWeights: coefficients missing");
    w.words.push_back(cyl.word);
    w.weight_sup.push_back(cyl.coeffs->weight_abs.hi);
    w.det_range.push_back(cyl.coeffs->det_abs);
  }
  return w;
}

namespace {

struct WordFactors {
  double u_min_lo, s_max_hi, weight_sup;
  CoeffInterval det;
  std::vector<int> word;
};

double complexity_at(const ComplexityReport& rep, int n, bool end, bool& fekete) {
  const auto& d = end ? rep.d_end : rep.d_begin;
  for (std::size_t i = 0; i < rep.ns.size(); ++i)
    if (rep.ns[i] == n) return static_cast<double>(d[i]);
  if (rep.ns.empty()) throw MissingReport("evaluate_bound: complexity report is empty");
  // submultiplicative upper bound D_n <= min_k (D_k)^{n/k}
  fekete = true;
  double best = 1e300;
  for (std::size_t i = 0; i < rep.ns.size(); ++i)
    best = std::min(best, std::pow(static_cast<double>(d[i]),
                                   static_cast<double>(n) / rep.ns[i]));
  return best;
}

}  // namespace

BoundReport evaluate_bound(const PiecewiseMap& map, const SpectralParams& params, int n,
                           AnalysisMode mode, const BoundInputs& in) {
  if (!in.complexity || !in.hyperbolicity)
    throw MissingReport("evaluate_bound: complexity and hyperbolicity reports required");
  if (in.hyperbolicity->n != n)
    throw MissingReport("evaluate_bound: hyperbolicity report depth mismatch");
  FeasibilityResult fr = feasible(params, mode);
  if (!fr.feasible)
    throw PreconditionFailed("evaluate_bound: parameters infeasible", "pstcond", fr.min_margin);

  BoundReport rep;
  rep.n = n;
  rep.mode = mode;
  rep.params = params;
  rep.feas = fr;
  bool fek = false;
  double db = complexity_at(*in.complexity, n, false, fek);
  double de = complexity_at(*in.complexity, n, true, fek);
  rep.complexity_fekete_extended = fek;
  const double p = params.p, t = params.t, as = std::abs(params.s);
  rep.factor_complexity_begin = std::pow(db, 1.0 / (p * n));
  rep.factor_complexity_end = std::pow(de, (1.0 / n) * (1.0 - 1.0 / p));

  double sup_term = 0;
  for (const auto& cyl : in.hyperbolicity->cylinders) {
    const auto& c = *cyl.coeffs;
    double hyp = mode == AnalysisMode::Forward
                     ? std::max(std::pow(c.u_min.lo, -t), std::pow(c.s_max.hi, as - t))
                     : std::max(std::pow(c.u_min.lo, as - t), std::pow(c.s_max.hi, as));
    double wdet;
    if (in.force_one_over_det || map.weight.kind == WeightKind::OneOverDet) {
      double e = 1.0 / p - 1.0;
      wdet = std::max(std::pow(c.det_abs.lo, e), std::pow(c.det_abs.hi, e));
    } else {
      wdet = c.weight_abs.hi * std::pow(c.det_abs.hi, 1.0 / p);
    }
    double v = wdet * hyp;
    if (v > sup_term) {
      sup_term = v;
      rep.argmax_word = cyl.word;
    }
  }
  rep.factor_weight = std::pow(sup_term, 1.0 / n);
  rep.product = rep.factor_complexity_begin * rep.factor_complexity_end * rep.factor_weight;
  rep.spectral_gap_flag = rep.product < 1.0;
  rep.note =
      "finite-n value of the bound formula; the fixed-n normalization carries an "
      "unevaluated combinatorial constant";
  return rep;
}

namespace {

struct ReducedCylinders {
  // distinct (u_min_lo, s_max_hi, weight_sup, det_lo, det_hi) tuples
  std::vector<WordFactors> groups;
};

ReducedCylinders reduce(const HyperbolicityReport& rep) {
  std::map<std::tuple<double, double, double, double, double>, std::size_t> seen;
  ReducedCylinders out;
  for (const auto& cyl : rep.cylinders) {
    const auto& c = *cyl.coeffs;
    auto key = std::make_tuple(c.u_min.lo, c.s_max.hi, c.weight_abs.hi, c.det_abs.lo,
                               c.det_abs.hi);
    if (seen.emplace(key, out.groups.size()).second)
      out.groups.push_back({c.u_min.lo, c.s_max.hi, c.weight_abs.hi, c.det_abs, cyl.word});
  }
  return out;
}

double quick_value(const ReducedCylinders& rc, const SpectralParams& pr, AnalysisMode mode,
                   bool one_over_det, double db, double de, int n) {
  const double p = pr.p, t = pr.t, as = std::abs(pr.s);
  double sup_term = 0;
  for (const auto& g : rc.groups) {
    double hyp = mode == AnalysisMode::Forward
                     ? std::max(std::pow(g.u_min_lo, -t), std::pow(g.s_max_hi, as - t))
                     : std::max(std::pow(g.u_min_lo, as - t), std::pow(g.s_max_hi, as));
    double wdet;
    if (one_over_det) {
      double e = 1.0 / p - 1.0;
      wdet = std::max(std::pow(g.det.lo, e), std::pow(g.det.hi, e));
    } else {
      wdet = g.weight_sup * std::pow(g.det.hi, 1.0 / p);
    }
    sup_term = std::max(sup_term, wdet * hyp);
  }
  return std::pow(db, 1.0 / (p * n)) * std::pow(de, (1.0 / n) * (1.0 - 1.0 / p)) *
         std::pow(sup_term, 1.0 / n);
}

}  // namespace

OptimizeResult optimize(const PiecewiseMap& map, int n, AnalysisMode mode, double alpha,
                        double beta, const BoundInputs& in, const OptimizeOptions& opt) {
  if (!in.complexity || !in.hyperbolicity)
    throw MissingReport("optimize: complexity and hyperbolicity reports required");
  OptimizeResult result;
  bool fek = false;
  double db = complexity_at(*in.complexity, n, false, fek);
  double de = complexity_at(*in.complexity, n, true, fek);
  bool one_over_det = in.force_one_over_det || map.weight.kind == WeightKind::OneOverDet;
  ReducedCylinders rc = reduce(*in.hyperbolicity);

  SpectralParams best_params;
  double best_value = 1e300;
  double best_tiebreak = -1e300;
  bool any = false;

  auto consider = [&](const SpectralParams& pr) {
    FeasibilityResult fr = feasible(pr, mode);
    if (!fr.feasible) return;
    any = true;
    double v = quick_value(rc, pr, mode, one_over_det, db, de, n);
    if (v < best_value - 1e-15 ||
        (std::abs(v - best_value) <= 1e-15 && fr.min_margin > best_tiebreak)) {
      best_value = v;
      best_params = pr;
      best_tiebreak = fr.min_margin;
    }
  };

  for (int iq = 1; iq <= opt.q_grid; ++iq) {
    double q = static_cast<double>(iq) / (opt.q_grid + 1);  // q = 1/p
    for (int it = 1; it <= opt.t_grid; ++it) {
      double t = static_cast<double>(it) / (opt.t_grid + 1);
      for (int is = 1; is <= opt.s_grid; ++is) {
        double as = static_cast<double>(is) / (opt.s_grid + 1);
        consider({1.0 / q, t, -as, beta, alpha});
      }
    }
  }
  // coordinate-descent refinement around the best grid point
  double step = 1.0 / (std::max({opt.q_grid, opt.t_grid, opt.s_grid}) + 1);
  for (int round = 0; round < opt.refine_rounds && any; ++round) {
    step /= 5.0;
    SpectralParams base = best_params;
    for (int dq = -2; dq <= 2; ++dq)
      for (int dt = -2; dt <= 2; ++dt)
        for (int ds = -2; ds <= 2; ++ds) {
          double q = 1.0 / base.p + dq * step;
          double t = base.t + dt * step;
          double as = std::abs(base.s) + ds * step;
          if (q <= 0.005 || q >= 0.995 || t <= 0 || as <= 0) continue;
          consider({1.0 / q, t, -as, beta, alpha});
        }
  }

  // Corollary recipe points: p near 1, t = beta/2, s = 1/p - 1 + eps
  for (double dp : {1e-1, 1e-2, 1e-3}) {
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      SpectralParams pr{1.0 + dp, beta / 2.0, (1.0 / (1.0 + dp) - 1.0) + eps, beta, alpha};
      FeasibilityResult fr = feasible(pr, mode);
      if (!fr.feasible) continue;
      any = true;
      BoundReport rep = evaluate_bound(map, pr, n, mode, in);
      result.recipe_points.push_back(rep);
      consider(pr);
    }
  }

  if (!any)
    throw InfeasibleRegion("optimize: the feasibility polytope contains no grid point");
  result.found = true;
  result.best = evaluate_bound(map, best_params, n, mode, in);
  if (result.best.product >= 1.0) {
    std::ostringstream os;
    os << "hyperbolicity dominates complexity: FAILED -- need "
          "lim (D_n^b)^{1/(pn)} (D_n^e)^{(1/n)(1-1/p)} < lambda^{min(t,-(t-|s|))}; "
       << "complexity factor " << result.best.factor_complexity_begin * result.best.factor_complexity_end
       << " vs hyperbolic factor " << result.best.factor_weight;
    result.failure_condition = os.str();
  }
  return result;
}

PhysicalDescriptionResult physical_description_check(const PiecewiseMap& map, int n,
                                                     const CertificationReport& cert,
                                                     const ComplexityReport& complexity,
                                                     const HyperbolicityReport& hyperbolicity) {
  PhysicalDescriptionResult out;
  double alpha = 1.0;
  for (const auto& b : map.branches)
    if (!b.is_affine()) alpha = std::min(alpha, b.oracle().holder_alpha);

  BoundInputs in;
  in.complexity = &complexity;
  in.hyperbolicity = &hyperbolicity;
  in.force_one_over_det = true;

  auto run_mode = [&](AnalysisMode mode) {
    ModeVerdict v;
    v.mode = mode;
    v.transversality_ok = mode == AnalysisMode::Forward ? cert.transversality_image_ok
                                                        : cert.transversality_dual_ok;
    auto beta = find_beta(hyperbolicity, alpha, mode);
    v.bunching_ok = beta.has_value();
    if (!beta) return v;
    v.beta = *beta;
    try {
      OptimizeResult opt = optimize(map, n, mode, alpha, *beta, in);
      v.best = opt.best;
      v.best_value = opt.best.product;
      v.value_pass = opt.best.product < 1.0;
      if (mode == AnalysisMode::Dual) {
        for (const auto& rp : opt.recipe_points) {
          if (!out.recipe_best || rp.product < out.recipe_best->product) out.recipe_best = rp;
        }
      }
    } catch (const InfeasibleRegion&) {
      v.value_pass = false;
    }
    v.certified = cert.cones_ok && cert.hyperbolic_ok && v.bunching_ok && v.value_pass &&
                  v.transversality_ok;
    return v;
  };

  out.forward = run_mode(AnalysisMode::Forward);
  out.dual = run_mode(AnalysisMode::Dual);
  out.recipe_pass = out.recipe_best && out.recipe_best->product < 1.0;
  out.pass = out.forward.certified || out.dual.certified;
  if (out.forward.certified && out.dual.certified)
    out.route = "both modes";
  else if (out.forward.certified)
    out.route = "forward";
  else if (out.dual.certified)
    out.route = out.recipe_pass ? "dual (recipe point passes)" : "dual";
  else
    out.route = "none";
  return out;
}

}  // namespace conehyp
