#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conehyp/complexity.hpp"
#include "conehyp/hyperbolicity.hpp"
#include "conehyp/map_model.hpp"

namespace conehyp {

inline constexpr const char* kFiniteNDisclaimer = "conditional on theorem hypotheses at finite n";

struct SpectralParams {
  double p = 2.0;
  double t = 0.2;
  double s = -0.4;
  double beta = 0.5;
  double alpha = 1.0;
};

struct FeasibilityResult {
  bool feasible = false;
  std::vector<std::pair<std::string, double>> margins;  // all strict, signed
  double min_margin = 0;
};

FeasibilityResult feasible(const SpectralParams& params, AnalysisMode mode);

/// Per-cylinder sups of |g^{(n)}| and the |det DT^n| range, extracted from a
/// coefficient report.
struct CylinderWeights {
  std::vector<std::vector<int>> words;
  std::vector<double> weight_sup;
  std::vector<CoeffInterval> det_range;

  static CylinderWeights from_report(const HyperbolicityReport& report);
};

struct BoundReport {
  int n = 0;
  AnalysisMode mode = AnalysisMode::Forward;
  SpectralParams params;
  double factor_complexity_begin = 0;  // (D_n^b)^{1/(p n)}
  double factor_complexity_end = 0;    // (D_n^e)^{(1/n)(1 - 1/p)}
  double factor_weight = 0;            // sup-term^{1/n}
  double product = 0;
  FeasibilityResult feas;
  bool spectral_gap_flag = false;  // product < 1, conditional statement
  std::vector<int> argmax_word;
  bool complexity_fekete_extended = false;
  std::string note;  // fixed-n normalization carries an unevaluated constant
};

struct BoundInputs {
  const ComplexityReport* complexity = nullptr;
  const HyperbolicityReport* hyperbolicity = nullptr;
  bool force_one_over_det = false;
};

BoundReport evaluate_bound(const PiecewiseMap& map, const SpectralParams& params, int n,
                           AnalysisMode mode, const BoundInputs& in);

struct OptimizeOptions {
  int q_grid = 19;   // 1/p values
  int t_grid = 49;
  int s_grid = 49;
  int refine_rounds = 2;
};

struct OptimizeResult {
  bool found = false;
  BoundReport best;
  std::vector<BoundReport> recipe_points;  // p near 1, t = beta/2, s = 1/p - 1 + eps
  std::string failure_condition;           // set when the best product is >= 1
};

OptimizeResult optimize(const PiecewiseMap& map, int n, AnalysisMode mode, double alpha,
                        double beta, const BoundInputs& in, const OptimizeOptions& opt = {});

struct ModeVerdict {
  AnalysisMode mode = AnalysisMode::Forward;
  bool bunching_ok = false;
  double beta = 0;
  bool transversality_ok = false;
  bool value_pass = false;
  double best_value = 0;
  std::optional<BoundReport> best;
  bool certified = false;
};

struct PhysicalDescriptionResult {
  ModeVerdict forward, dual;
  std::optional<BoundReport> recipe_best;  // best Corollary-recipe point (dual mode)
  bool recipe_pass = false;
  bool pass = false;
  std::string route;
  std::string disclaimer = kFiniteNDisclaimer;
};

PhysicalDescriptionResult physical_description_check(const PiecewiseMap& map, int n,
                                                     const CertificationReport& cert,
                                                     const ComplexityReport& complexity,
                                                     const HyperbolicityReport& hyperbolicity);

}  // namespace conehyp
