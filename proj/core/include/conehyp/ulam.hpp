#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "conehyp/map_model.hpp"

namespace conehyp {

struct UlamOptions {
  enum class Kind { Exact, MonteCarlo };
  Kind kind = Kind::Exact;
  long long mc_samples = 1000000;
  unsigned seed = 0;
};

/// Box discretization of the weighted transfer operator on a uniform grid over
/// the carrier bounding box; column k holds the mass it sends to each row box.
struct UlamOperator {
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0, lx = 1, ly = 1;
  std::vector<std::vector<std::pair<int, double>>> cols;
  std::vector<double> col_sums;
  bool exact = true;
  bool degraded_to_monte_carlo = false;
  unsigned seed = 0;
  long long mc_samples = 0;

  int size() const { return nx * ny; }
  int index(int ix, int iy) const { return iy * nx + ix; }
  double cell_area() const { return (lx / nx) * (ly / ny); }
  std::vector<double> apply(const std::vector<double>& density) const;
};

UlamOperator build_ulam(const PiecewiseMap& map, int nx, int ny, const UlamOptions& opt = {});

struct InvariantDensityResult {
  std::vector<std::vector<double>> densities;  // nonnegative, integral one
  double leading = 0;                          // Rayleigh value of the fixed vector
  std::vector<std::complex<double>> eigenvalues;  // leading part of the spectrum
  double mixing_gap_estimate = 0;              // 1 - |second eigenvalue|
  int iterations = 0;
};

InvariantDensityResult invariant_density(const UlamOperator& op, int max_densities = 2,
                                         int top_k = 10, int max_iter = 20000,
                                         double tol = 1e-13);

/// | ∫ u · (L_g v) - ∫ (dual u) · v | with both sides evaluated by the same
/// midpoint rule at the given resolution.
double adjoint_residual(const PiecewiseMap& map, const std::function<double(double, double)>& u,
                        const std::function<double(double, double)>& v, int quad_n);

struct BasinScanResult {
  std::vector<int> labels;        // per sample; -1 undecided
  std::vector<double> fractions;  // per density
  double undecided_fraction = 0;
  std::vector<double> density_means;  // observable averaged against each density
};

BasinScanResult birkhoff_basin_scan(const PiecewiseMap& map,
                                    const std::function<double(double, double)>& observable,
                                    int horizon, int samples, unsigned seed,
                                    const UlamOperator& op,
                                    const std::vector<std::vector<double>>& densities,
                                    double tol = 0.05);

}  // namespace conehyp
