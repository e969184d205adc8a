#include "conehyp/grid_ops.hpp"

#include <cmath>

namespace conehyp {

namespace {

constexpr double kTau = 6.28318530717958647692;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft1(std::complex<double>* a, int n, int stride, bool inverse,
          std::vector<std::complex<double>>& scratch) {
  // iterative radix-2 with bit reversal on a strided view
  scratch.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) scratch[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i) * stride];
  int lg = 0;
  while ((1 << lg) < n) ++lg;
  for (int i = 0; i < n; ++i) {
    int j = 0;
    for (int b = 0; b < lg; ++b)
      if (i & (1 << b)) j |= 1 << (lg - 1 - b);
    if (i < j) std::swap(scratch[static_cast<std::size_t>(i)], scratch[static_cast<std::size_t>(j)]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    double ang = kTau / len * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        auto u = scratch[static_cast<std::size_t>(i + k)];
        auto t = scratch[static_cast<std::size_t>(i + k + len / 2)] * w;
        scratch[static_cast<std::size_t>(i + k)] = u + t;
        scratch[static_cast<std::size_t>(i + k + len / 2)] = u - t;
        w *= wl;
      }
    }
  }
  double scale = inverse ? 1.0 / n : 1.0;
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * stride] = scratch[static_cast<std::size_t>(i)] * scale;
}

}  // namespace

void fft2(std::vector<std::complex<double>>& a, int n1, int n2, bool inverse) {
  if (!is_pow2(n1) || !is_pow2(n2)) throw Error("fft2: grid sizes must be powers of two");
  std::vector<std::complex<double>> scratch;
  for (int j = 0; j < n2; ++j) fft1(a.data() + static_cast<std::size_t>(j) * n1, n1, 1, inverse, scratch);
  for (int i = 0; i < n1; ++i) fft1(a.data() + i, n2, n1, inverse, scratch);
}

GridFunction GridFunction::zeros(const GridBox& b, int n1, int n2) {
  if (!is_pow2(n1) || !is_pow2(n2)) throw Error("GridFunction: sizes must be powers of two");
  GridFunction g;
  g.box = b;
  g.n1 = n1;
  g.n2 = n2;
  g.v.assign(static_cast<std::size_t>(n1) * n2, {0.0, 0.0});
  return g;
}

GridFunction GridFunction::from_function(
    const GridBox& b, int n1, int n2,
    const std::function<std::complex<double>(double, double)>& f) {
  GridFunction g = zeros(b, n1, n2);
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i)
      g.v[g.idx(i, j)] = f(b.x0 + (i + 0.5) * b.lx / n1, b.y0 + (j + 0.5) * b.ly / n2);
  return g;
}

GridFunction GridFunction::padded(double factor) const {
  int m1 = n1, m2 = n2;
  while (m1 < n1 * (1.0 + 2 * factor)) m1 <<= 1;
  while (m2 < n2 * (1.0 + 2 * factor)) m2 <<= 1;
  GridBox b2;
  b2.lx = box.lx * m1 / n1;
  b2.ly = box.ly * m2 / n2;
  b2.x0 = box.x0 - (b2.lx - box.lx) / 2;
  b2.y0 = box.y0 - (b2.ly - box.ly) / 2;
  GridFunction g = zeros(b2, m1, m2);
  int oi = (m1 - n1) / 2, oj = (m2 - n2) / 2;
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) g.v[g.idx(i + oi, j + oj)] = v[idx(i, j)];
  return g;
}

GridFunction GridFunction::translated(int di, int dj) const {
  GridFunction g = *this;
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i)
      g.v[g.idx((i + di % n1 + n1) % n1, (j + dj % n2 + n2) % n2)] = v[idx(i, j)];
  return g;
}

GridFunction apply_multiplier(const GridFunction& w, double t, double s) {
  GridFunction g = w;
  fft2(g.v, g.n1, g.n2, false);
  for (int j = 0; j < g.n2; ++j) {
    int kj = j <= g.n2 / 2 ? j : j - g.n2;
    double eta = kTau * kj / g.box.ly;
    for (int i = 0; i < g.n1; ++i) {
      int ki = i <= g.n1 / 2 ? i : i - g.n1;
      double xi = kTau * ki / g.box.lx;
      double a = std::pow(1.0 + xi * xi + eta * eta, t / 2) * std::pow(1.0 + eta * eta, s / 2);
      g.v[g.idx(i, j)] *= a;
    }
  }
  fft2(g.v, g.n1, g.n2, true);
  return g;
}

double lp_norm(const GridFunction& w, double p) {
  double cell = w.hx() * w.hy();
  double acc = 0;
  for (const auto& z : w.v) acc += std::pow(std::abs(z), p);
  return std::pow(acc * cell, 1.0 / p);
}

double anisotropic_norm(const GridFunction& w, double t, double s, double p) {
  return lp_norm(apply_multiplier(w, t, s), p);
}

}  // namespace conehyp
