#include <benchmark/benchmark.h>

#include "conehyp/complexity.hpp"
#include "conehyp/foliation.hpp"
#include "conehyp/grid_ops.hpp"
#include "conehyp/hyperbolicity.hpp"
#include "conehyp/ulam.hpp"

using namespace conehyp;

static void BM_ConeExpansion2d(benchmark::State& state) {
  Eigen::Matrix2d m;
  m << 2.3, 0.4, 0.1, 0.45;
  GraphCone cone = GraphCone::axis2d(ConeKind::Unstable, 0.3);
  double lo, hi;
  for (auto _ : state) {
    expansion_range(m, cone, lo, hi);
    benchmark::DoNotOptimize(lo + hi);
  }
}
BENCHMARK(BM_ConeExpansion2d);

static void BM_EnumerateCylinders(benchmark::State& state) {
  PiecewiseMap baker = builtin_baker();
  for (auto _ : state) {
    auto cyl = enumerate_cylinders(baker, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(cyl.size());
  }
}
BENCHMARK(BM_EnumerateCylinders)->Arg(4)->Arg(6)->Arg(8);

static void BM_ComplexityBegin(benchmark::State& state) {
  PiecewiseMap lozi = builtin_lozi(Rational(17, 10), Rational(1, 2), lozi_default_domain());
  for (auto _ : state) {
    benchmark::DoNotOptimize(complexity_begin(lozi, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_ComplexityBegin)->Arg(3)->Arg(5);

static void BM_Coefficients(benchmark::State& state) {
  PiecewiseMap baker = builtin_baker();
  for (auto _ : state) {
    HyperbolicityReport rep = coefficients(baker, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(rep.lambda);
  }
}
BENCHMARK(BM_Coefficients)->Arg(4)->Arg(6);

static void BM_BuildUlam(benchmark::State& state) {
  PiecewiseMap baker = builtin_baker();
  int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    UlamOperator op = build_ulam(baker, n, n);
    benchmark::DoNotOptimize(op.cols.size());
  }
}
BENCHMARK(BM_BuildUlam)->Arg(16)->Arg(32);

static void BM_AnisotropicNorm(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  GridBox box{-4.0, -4.0, 8.0, 8.0};
  GridFunction g = GridFunction::from_function(box, n, n, [](double x, double y) {
    return std::complex<double>(std::exp(-(x * x + y * y)), 0.0);
  });
  for (auto _ : state) {
    benchmark::DoNotOptimize(anisotropic_norm(g, 0.3, -0.2, 2.0));
  }
}
BENCHMARK(BM_AnisotropicNorm)->Arg(128)->Arg(256);

static void BM_GraphTransform(benchmark::State& state) {
  FoliationClassParams p;
  p.beta = 0.05;
  p.cone = GraphCone::axis2d(ConeKind::Stable, 0.5);
  FoliationChart vertical = FoliationChart::from_function(
      p, p.C0 / 64, [](double x, double) { return x; },
      [](double, double) { return Vec2(1.0, 0.0); });
  HyperbolicBranch2 br = HyperbolicBranch2::from_affine(
      Eigen::DiagonalMatrix<double, 2>(2.0, 0.5), Vec2::Zero());
  ExtendedCone cones = ExtendedCone::axis2d(0.5, 0.2);
  for (auto _ : state) {
    GraphTransformDecomposition dec =
        graph_transform({vertical}, br, Vec2::Zero(), cones, cones, p);
    benchmark::DoNotOptimize(dec.output.F.size());
  }
}
BENCHMARK(BM_GraphTransform);

BENCHMARK_MAIN();
