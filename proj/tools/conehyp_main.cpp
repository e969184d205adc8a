#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "conehyp/complexity.hpp"
#include "conehyp/report.hpp"

using namespace conehyp;

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CertificationFailed& e) {
    std::cerr << "certification failed: " << e.what() << " (" << e.violated << ")\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}

FoliationChart named_chart(const std::string& name) {
  FoliationClassParams p;
  p.beta = 0.25;
  p.cone = GraphCone::axis2d(ConeKind::Stable, 0.5);
  if (name == "vertical")
    return FoliationChart::from_function(p, p.C0 / 64, [](double x, double) { return x; },
                                         [](double, double) { return Vec2(1.0, 0.0); });
  if (name == "affine") {
    const double e = 1e-5;
    return FoliationChart::from_function(
        p, p.C0 / 64, [e](double x, double y) { return x + e * y; },
        [e](double, double) { return Vec2(1.0, e); });
  }
  return load_chart(name);
}

HyperbolicBranch2 named_branch(const std::string& name) {
  Mat2 m;
  if (name == "diag2") {
    m << 2, 0, 0, 0.5;
    return HyperbolicBranch2::from_affine(m, Vec2::Zero());
  }
  if (name == "strong") {
    m << 64, 0.5, 3.2, 0.04;
    return HyperbolicBranch2::from_affine(m, Vec2::Zero());
  }
  throw ConfigError("unknown branch name: " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"piecewise cone hyperbolic map analyzer"};
  app.require_subcommand(1);

  std::string map_name = "baker", config_path, out_dir = "out";
  std::string chart_name = "affine", branch_name = "diag2", mode = "both";
  std::vector<int> depths{4};
  int n = 4, grid = 64;
  unsigned seed = 0;

  auto* c_run = app.add_subcommand("run", "full analysis pipeline from a config file");
  c_run->add_option("config", config_path, "analysis config (json)")->required();

  auto* c_cert = app.add_subcommand("certify", "cone, hyperbolicity and transversality verdicts");
  c_cert->add_option("--map", map_name);
  c_cert->add_option("--seed", seed);

  auto* c_cplx = app.add_subcommand("complexity", "n-complexities D_n^b, D_n^e");
  c_cplx->add_option("--map", map_name);
  c_cplx->add_option("--n", n);

  auto* c_bound = app.add_subcommand("bound", "essential-spectral-radius bound optimization");
  c_bound->add_option("--map", map_name);
  c_bound->add_option("--n", n);
  c_bound->add_option("--mode", mode);

  auto* c_fol = app.add_subcommand("foliation", "graph transform of an admissible chart");
  c_fol->add_option("--chart", chart_name, "named chart (vertical|affine) or dump path");
  c_fol->add_option("--branch", branch_name, "named branch (diag2|shear)");
  c_fol->add_option("--out", out_dir);

  auto* c_ulam = app.add_subcommand("ulam", "box discretization of the transfer operator");
  c_ulam->add_option("--map", map_name);
  c_ulam->add_option("--grid", grid);
  c_ulam->add_option("--out", out_dir);

  auto* c_rep = app.add_subcommand("report", "render the digest of a summary.json");
  c_rep->add_option("summary", config_path, "path to summary.json")->required();

  CLI11_PARSE(app, argc, argv);

  if (c_run->parsed())
    return guarded([&] {
      AnalysisConfig cfg = AnalysisConfig::from_file(config_path);
      RunResult r = run_analysis(cfg);
      std::cout << render_digest(r.summary);
      return r.exit_code;
    });

  if (c_cert->parsed())
    return guarded([&] {
      PiecewiseMap m = load_map(map_name);
      CertificationReport rep = certify(m, seed);
      std::cout << certification_to_json(rep).dump(2) << "\n";
      return 0;
    });

  if (c_cplx->parsed())
    return guarded([&] {
      PiecewiseMap m = load_map(map_name);
      ComplexityReport rep = complexity_range(m, n);
      GrowthRates gr = growth_rate(rep);
      std::cout << "n,D_b,D_e,rate_b,rate_e\n";
      for (std::size_t i = 0; i < rep.ns.size(); ++i)
        std::cout << rep.ns[i] << ',' << rep.d_begin[i] << ',' << rep.d_end[i] << ','
                  << gr.rates_begin[i] << ',' << gr.rates_end[i] << "\n";
      std::cout << "subexponential evidence (" << gr.label
                << "): " << (gr.subexponential_evidence ? "yes" : "no") << "\n";
      return 0;
    });

  if (c_bound->parsed())
    return guarded([&] {
      PiecewiseMap m = load_map(map_name);
      CertificationReport cert = certify(m, seed);
      ComplexityReport comp = complexity_range(m, n);
      HyperbolicityReport hyp = coefficients(m, n);
      auto run_one = [&](AnalysisMode am) {
        auto beta = find_beta(hyp, 1.0, am);
        if (!beta) {
          std::cout << (am == AnalysisMode::Forward ? "forward" : "dual")
                    << ": no bunching exponent found\n";
          return;
        }
        BoundInputs in{&comp, &hyp, false};
        OptimizeResult opt = optimize(m, n, am, 1.0, *beta, in);
        std::cout << bound_to_json(opt.best).dump(2) << "\n";
        if (!opt.failure_condition.empty()) std::cout << opt.failure_condition << "\n";
      };
      if (mode == "forward" || mode == "both") run_one(AnalysisMode::Forward);
      if (mode == "dual" || mode == "both") run_one(AnalysisMode::Dual);
      (void)cert;
      return 0;
    });

  if (c_fol->parsed())
    return guarded([&] {
      FoliationChart chart = named_chart(chart_name);
      HyperbolicBranch2 br = named_branch(branch_name);
      ExtendedCone cones = ExtendedCone::axis2d(0.5, 0.2);
      GraphTransformDecomposition dec =
          graph_transform({chart}, br, Vec2::Zero(), cones, cones, chart.params);
      FoliationCertificate cert = certify_foliation(dec.output);
      std::cout << "output chart admissible: " << (cert.passed ? "yes" : "no") << "\n";
      std::cout << "D = diag(" << dec.A << ", " << dec.B << ")\n";
      std::cout << "residual: " << dec.factorization_residual(0) << "\n";
      std::filesystem::create_directories(out_dir);
      dump_chart(dec.output, out_dir + "/output_chart.bin", &cert);
      return 0;
    });

  if (c_ulam->parsed())
    return guarded([&] {
      PiecewiseMap m = load_map(map_name);
      UlamOperator op = build_ulam(m, grid, grid);
      InvariantDensityResult inv = invariant_density(op);
      std::cout << "leading eigenvalue: " << inv.leading << "\n";
      std::cout << "densities: " << inv.densities.size() << "\n";
      std::filesystem::create_directories(out_dir);
      std::ofstream csv(out_dir + "/density.csv");
      csv << "x,y";
      for (std::size_t d = 0; d < inv.densities.size(); ++d) csv << ",density" << d;
      csv << "\n";
      double wx = op.lx / op.nx, wy = op.ly / op.ny;
      for (int iy = 0; iy < op.ny; ++iy)
        for (int ix = 0; ix < op.nx; ++ix) {
          csv << op.x0 + (ix + 0.5) * wx << ',' << op.y0 + (iy + 0.5) * wy;
          for (const auto& d : inv.densities) csv << ',' << d[static_cast<std::size_t>(op.index(ix, iy))];
          csv << "\n";
        }
      return 0;
    });

  if (c_rep->parsed())
    return guarded([&] {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("summary not found: " + config_path);
      Json j;
      in >> j;
      if (!validate_digest_tags(j)) throw ConfigError("summary digest violates the tag schema");
      std::cout << render_digest(j);
      return 0;
    });

  return 0;
}
