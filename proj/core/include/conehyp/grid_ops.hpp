#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "conehyp/errors.hpp"

namespace conehyp {

struct GridBox {
  double x0 = 0, y0 = 0, lx = 1, ly = 1;
};

/// Periodic complex sample grid; sizes are powers of two.
class GridFunction {
 public:
  GridBox box;
  int n1 = 0, n2 = 0;
  std::vector<std::complex<double>> v;

  static GridFunction zeros(const GridBox& b, int n1, int n2);
  static GridFunction from_function(const GridBox& b, int n1, int n2,
                                    const std::function<std::complex<double>(double, double)>& f);

  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n1) + static_cast<std::size_t>(i);
  }
  double hx() const { return box.lx / n1; }
  double hy() const { return box.ly / n2; }

  /// Embed centered into a grid enlarged by the padding factor per side
  /// (rounded up to powers of two), zero outside.
  GridFunction padded(double factor = 0.25) const;
  GridFunction translated(int di, int dj) const;  // cyclic
};

void fft2(std::vector<std::complex<double>>& a, int n1, int n2, bool inverse);

/// Frequency-side multiplier (1 + |xi|^2 + |eta|^2)^{t/2} (1 + |eta|^2)^{s/2}
/// at the grid's physical frequencies.
GridFunction apply_multiplier(const GridFunction& w, double t, double s);

double lp_norm(const GridFunction& w, double p);

/// Discrete estimator: transform, multiply, inverse transform, discrete L^p.
double anisotropic_norm(const GridFunction& w, double t, double s, double p);

}  // namespace conehyp
