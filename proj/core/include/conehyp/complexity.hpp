#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conehyp/map_model.hpp"

namespace conehyp {

struct ComplexityWitness {
  Vec2R point;
  std::vector<std::vector<int>> words;
};

struct ComplexityOptions {
  EnumerationOptions enumeration;
  bool want_witness = false;
};

/// Maximal number of depth-n cylinder closures sharing a point, from the exact
/// rational arrangement skeleton (vertices, pairwise edge crossings, midpoints).
long long complexity_begin(const PiecewiseMap& map, int n, const ComplexityOptions& opt = {},
                           ComplexityWitness* witness = nullptr);

/// Same count on the image polygons of the depth-n cylinders.
long long complexity_end(const PiecewiseMap& map, int n, const ComplexityOptions& opt = {},
                         ComplexityWitness* witness = nullptr);

struct ComplexityReport {
  std::vector<int> ns;
  std::vector<long long> d_begin, d_end;
  bool exact = true;
  std::string flags;
};

/// Point-grid estimate for the sampling backend: multiplicity of cylinder
/// clouds near probe points, with a boundary-dilation upper count.
struct SampledComplexity {
  long long lower = 0, upper = 0;
};

SampledComplexity complexity_sampled(const PiecewiseMap& map, int n, bool end, int samples,
                                     int probe_grid, double dilation, unsigned seed);

ComplexityReport complexity_range(const PiecewiseMap& map, int n_max,
                                  const ComplexityOptions& opt = {});

struct GrowthRates {
  std::vector<double> rates_begin, rates_end;        // D_n^{1/n}
  std::vector<double> fekete_begin, fekete_end;      // decreasing upper bounds
  bool subexponential_evidence = false;
  std::string label = "heuristic";
  double decay_window = 0.75;
};

GrowthRates growth_rate(const ComplexityReport& report);

}  // namespace conehyp
