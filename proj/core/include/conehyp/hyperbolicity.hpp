#pragma once

#include <optional>
#include <vector>

#include "conehyp/map_model.hpp"

namespace conehyp {

enum class AnalysisMode { Forward, Dual };

struct HyperbolicityOptions {
  EnumerationOptions enumeration;
  unsigned seed = 0;
  int oracle_samples = 2000;  // sampling backend cloud size
};

struct HyperbolicityReport {
  int n = 0;
  std::vector<ItineraryCylinder> cylinders;  // coeffs filled
  double lambda = 0;                         // global weakest per-step rate
  double lambda_u_n_min = 0;                 // min over words of the expansion lower end
  double lambda_s_n_max = 0;                 // max over words of the contraction upper end
  unsigned seed = 0;
  std::string map_hash;
};

/// Interval enclosures of the cone-restricted coefficients of every depth-n
/// cylinder, via products of per-step expansion data.
HyperbolicityReport coefficients(const PiecewiseMap& map, int n,
                                 const HyperbolicityOptions& opt = {});

struct BunchingCertificate {
  int n = 0;
  double alpha = 0, beta = 0;
  CoeffInterval sup_value;
  bool passed = false;
  AnalysisMode mode = AnalysisMode::Forward;
  std::vector<int> argmax_word;
};

/// Forward mode: sup over cylinders of the upper bound of
/// (weakest contraction)^{alpha-beta} (strongest expansion)^{1+beta} / (weakest expansion);
/// dual mode evaluates the same expression for the time-reversed coefficients.
BunchingCertificate check_bunching(const HyperbolicityReport& report, double alpha, double beta,
                                   AnalysisMode mode = AnalysisMode::Forward);

struct FindBetaOptions {
  int grid = 512;
};

/// Largest grid value of beta in (0, alpha) whose certificate passes.
std::optional<double> find_beta(const HyperbolicityReport& report, double alpha,
                                AnalysisMode mode = AnalysisMode::Forward,
                                const FindBetaOptions& opt = {});

}  // namespace conehyp
