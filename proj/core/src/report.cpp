#include "conehyp/report.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "conehyp/complexity.hpp"

namespace conehyp {

namespace fs = std::filesystem;

AnalysisConfig AnalysisConfig::from_json(const Json& j) {
  AnalysisConfig c;
  if (j.contains("map")) c.map = j["map"].get<std::string>();
  if (j.contains("depths")) c.depths = j["depths"].get<std::vector<int>>();
  if (j.contains("mode")) c.mode = j["mode"].get<std::string>();
  if (j.contains("ulam_grid")) c.ulam_grid = j["ulam_grid"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<unsigned>();
  if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  for (int n : c.depths)
    if (n < 1) throw ConfigError("config: depths must be positive");
  if (c.mode != "forward" && c.mode != "dual" && c.mode != "both")
    throw ConfigError("config: mode must be forward|dual|both");
  return c;
}

AnalysisConfig AnalysisConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  Json j;
  in >> j;
  return from_json(j);
}

namespace {

Rational rat(const Json& j) {
  if (j.is_string()) return rational_from_decimal(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long long>());
  return rational_from_decimal(std::to_string(j.get<double>()));
}

Json rat_json(const Rational& r) {
  std::ostringstream os;
  os << r;
  return Json(os.str());
}

ConvexPolygon polygon_from_json(const Json& j) {
  std::vector<Vec2R> pts;
  for (const auto& v : j) pts.push_back({rat(v[0]), rat(v[1])});
  return ConvexPolygon::from_points(std::move(pts));
}

Json polygon_to_json(const ConvexPolygon& p) {
  Json out = Json::array();
  for (const auto& v : p.vertices()) out.push_back(Json::array({rat_json(v.x), rat_json(v.y)}));
  return out;
}

GraphCone cone_from_json(const Json& j) {
  auto split = j["split"].get<std::vector<int>>();
  int du = split[0], ds = split[1], d = du + ds;
  auto fr = j["frame"].get<std::vector<double>>();  // row-major d x d
  MatrixXd frame(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) frame(r, c) = fr[static_cast<std::size_t>(r) * d + c];
  ConeKind kind = j["kind"].get<std::string>() == "stable" ? ConeKind::Stable : ConeKind::Unstable;
  auto ap = j["aperture"].get<std::vector<double>>();
  int rows = kind == ConeKind::Stable ? du : ds;
  int cols = d - rows;
  MatrixXd aperture(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) aperture(r, c) = ap[static_cast<std::size_t>(r) * cols + c];
  return GraphCone(frame, du, ds, kind, aperture);
}

Json cone_to_json(const GraphCone& c) {
  Json j;
  std::vector<double> fr;
  for (int r = 0; r < c.dim(); ++r)
    for (int col = 0; col < c.dim(); ++col) fr.push_back(c.frame()(r, col));
  j["frame"] = fr;
  j["split"] = Json::array({c.du(), c.ds()});
  j["kind"] = c.kind() == ConeKind::Stable ? "stable" : "unstable";
  std::vector<double> ap;
  for (int r = 0; r < c.aperture().rows(); ++r)
    for (int col = 0; col < c.aperture().cols(); ++col) ap.push_back(c.aperture()(r, col));
  j["aperture"] = ap;
  return j;
}

}  // namespace

PiecewiseMap map_from_config_json(const Json& j) {
  PiecewiseMap m;
  m.name = j.value("name", "map");
  if (j.contains("dimensions")) {
    m.dims.d = j["dimensions"]["d"].get<int>();
    m.dims.du = j["dimensions"]["du"].get<int>();
    m.dims.ds = j["dimensions"]["ds"].get<int>();
    m.dims.validate();
  }
  m.carrier.polygon = polygon_from_json(j["carrier"]["polygon"]);
  if (j["carrier"].contains("periodic")) {
    m.carrier.periodic_x = j["carrier"]["periodic"][0].get<bool>();
    m.carrier.periodic_y = j["carrier"]["periodic"][1].get<bool>();
  }
  Rational x0, y0, x1, y1;
  m.carrier.polygon.bbox(x0, y0, x1, y1);
  m.carrier.period_x = x1 - x0;
  m.carrier.period_y = y1 - y0;
  for (const auto& bj : j["branches"]) {
    Branch b;
    AffineBranch a;
    const auto& mat = bj["matrix"];
    a.map.lin = {rat(mat[0][0]), rat(mat[0][1]), rat(mat[1][0]), rat(mat[1][1])};
    a.map.off = {rat(bj["offset"][0]), rat(bj["offset"][1])};
    a.domain = PolyRegion::one(polygon_from_json(bj["domain"]));
    b.impl = a;
    m.branches.push_back(std::move(b));
  }
  for (const auto& cj : j["cone_domains"]) {
    ConeDomain cd{PolyRegion::one(polygon_from_json(cj["polygon"])),
                  cone_from_json(cj["unstable"]), cone_from_json(cj["stable"])};
    m.cone_domains.push_back(std::move(cd));
  }
  std::string wk = j.value("weight", Json{{"kind", "one_over_det"}}).value("kind", "one_over_det");
  m.weight.kind = wk == "constant_one" ? WeightKind::ConstantOne : WeightKind::OneOverDet;
  m.mode = j.value("mode", "standard") == "generalized" ? MapMode::Generalized : MapMode::Standard;
  m.rebuild_boundary_pieces();
  return m;
}

Json map_to_config_json(const PiecewiseMap& m) {
  Json j;
  j["schema_version"] = 1;
  j["name"] = m.name;
  j["dimensions"] = {{"d", m.dims.d}, {"du", m.dims.du}, {"ds", m.dims.ds}};
  j["carrier"]["polygon"] = polygon_to_json(m.carrier.polygon);
  j["carrier"]["periodic"] = Json::array({m.carrier.periodic_x, m.carrier.periodic_y});
  j["branches"] = Json::array();
  for (const auto& b : m.branches) {
    if (!b.is_affine()) throw ConfigError("map_to_config_json: oracle branches not serializable");
    const auto& a = b.affine();
    Json bj;
    bj["matrix"] = Json::array({Json::array({rat_json(a.map.lin.a), rat_json(a.map.lin.b)}),
                                Json::array({rat_json(a.map.lin.c), rat_json(a.map.lin.d)})});
    bj["offset"] = Json::array({rat_json(a.map.off.x), rat_json(a.map.off.y)});
    bj["domain"] = polygon_to_json(a.domain.parts.at(0));
    j["branches"].push_back(bj);
  }
  j["cone_domains"] = Json::array();
  for (const auto& cd : m.cone_domains) {
    Json cj;
    cj["polygon"] = polygon_to_json(cd.region.parts.at(0));
    cj["unstable"] = cone_to_json(cd.unstable);
    cj["stable"] = cone_to_json(cd.stable);
    j["cone_domains"].push_back(cj);
  }
  j["weight"]["kind"] = m.weight.kind == WeightKind::ConstantOne ? "constant_one" : "one_over_det";
  j["mode"] = m.mode == MapMode::Generalized ? "generalized" : "standard";
  return j;
}

PiecewiseMap load_map(const std::string& name_or_path) {
  if (name_or_path == "baker" || name_or_path == "doubling" || name_or_path == "toral" ||
      name_or_path == "lozi")
    return builtin_by_name(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("map not found: " + name_or_path);
  Json j;
  in >> j;
  return map_from_config_json(j);
}

Json certification_to_json(const CertificationReport& rep) {
  Json j;
  j["cones_ok"] = rep.cones_ok;
  j["hyperbolic_ok"] = rep.hyperbolic_ok;
  j["domains_disjoint"] = rep.domains_disjoint;
  j["domains_cover"] = rep.domains_cover;
  j["transversality"] = {{"standard", rep.transversality_standard_ok},
                         {"image", rep.transversality_image_ok},
                         {"dual", rep.transversality_dual_ok}};
  j["weakest_expansion"] = rep.weakest_expansion;
  j["weakest_contraction_bound"] = rep.weakest_contraction_bound;
  j["margin_convention"] = "angular margins in cone model coordinates, default 1e-3 rad";
  Json pieces = Json::array();
  for (const auto& t : rep.transversality)
    pieces.push_back({{"piece", t.piece},
                      {"branch", t.branch},
                      {"check", t.check},
                      {"margin", t.margin},
                      {"transverse", t.transverse},
                      {"carrier_edge", t.carrier_edge}});
  j["transversality_pieces"] = pieces;
  return j;
}

Json bound_to_json(const BoundReport& rep) {
  Json j;
  j["n"] = rep.n;
  j["mode"] = rep.mode == AnalysisMode::Forward ? "forward" : "dual";
  j["params"] = {{"p", rep.params.p},
                 {"t", rep.params.t},
                 {"s", rep.params.s},
                 {"beta", rep.params.beta},
                 {"alpha", rep.params.alpha}};
  j["factors"] = {{"complexity_begin", rep.factor_complexity_begin},
                  {"complexity_end", rep.factor_complexity_end},
                  {"weight", rep.factor_weight}};
  j["product"] = rep.product;
  j["spectral_gap_conditional"] = rep.spectral_gap_flag;
  Json margins = Json::array();
  for (const auto& [name, v] : rep.feas.margins) margins.push_back({{"name", name}, {"value", v}});
  j["feasibility_margins"] = margins;
  j["complexity_fekete_extended"] = rep.complexity_fekete_extended;
  j["note"] = rep.note;
  return j;
}

Json physical_to_json(const PhysicalDescriptionResult& rep) {
  auto mode = [](const ModeVerdict& v) {
    Json j;
    j["bunching_ok"] = v.bunching_ok;
    j["beta"] = v.beta;
    j["transversality_ok"] = v.transversality_ok;
    j["value_pass"] = v.value_pass;
    j["best_value"] = v.best_value;
    j["certified"] = v.certified;
    if (v.best) j["best"] = bound_to_json(*v.best);
    return j;
  };
  Json j;
  j["forward"] = mode(rep.forward);
  j["dual"] = mode(rep.dual);
  j["pass"] = rep.pass;
  j["route"] = rep.route;
  j["recipe_pass"] = rep.recipe_pass;
  if (rep.recipe_best) j["recipe_best"] = bound_to_json(*rep.recipe_best);
  j["disclaimer"] = rep.disclaimer;
  return j;
}

namespace {

void add_digest(Json& digest, const std::string& name, double value, const std::string& eq) {
  digest.push_back({{"name", name}, {"value", value}, {"eq", eq}});
}

std::string word_string(const std::vector<int>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s.push_back('.');
    s += std::to_string(w[i]);
  }
  return s;
}

}  // namespace

RunResult run_analysis(const AnalysisConfig& config) {
  RunResult result;
  PiecewiseMap map;
  try {
    map = load_map(config.map);
  } catch (const ConfigError&) {
    throw;
  }

  fs::create_directories(config.out_dir);
  Json summary;
  summary["schema_version"] = 1;
  summary["code_version"] = kCodeVersion;
  summary["map"] = map.name;
  summary["map_hash"] = map.content_hash();
  summary["seed"] = config.seed;
  Json digest = Json::array();

  CertificationReport cert = certify(map, config.seed);
  summary["certification"] = certification_to_json(cert);

  int n_max = *std::max_element(config.depths.begin(), config.depths.end());

  // complexity, with the archive keyed on (map hash, n, backend, version)
  ComplexityReport comp;
  {
    std::string cache = cache_dir_from_env();
    std::string key = map.content_hash() + "_n" + std::to_string(n_max) + "_exact_v" + kCodeVersion;
    fs::path cpath = cache.empty() ? fs::path() : fs::path(cache) / (key + ".json");
    bool loaded = false;
    if (!cpath.empty() && fs::exists(cpath)) {
      std::ifstream in(cpath);
      Json cj;
      in >> cj;
      comp.ns = cj["ns"].get<std::vector<int>>();
      comp.d_begin = cj["d_begin"].get<std::vector<long long>>();
      comp.d_end = cj["d_end"].get<std::vector<long long>>();
      loaded = true;
    }
    if (!loaded) {
      comp = complexity_range(map, n_max);
      if (!cpath.empty()) {
        fs::create_directories(cpath.parent_path());
        Json cj;
        cj["ns"] = comp.ns;
        cj["d_begin"] = comp.d_begin;
        cj["d_end"] = comp.d_end;
        std::ofstream out(cpath);
        out << cj.dump(2);
      }
    }
  }
  {
    Json cj;
    cj["ns"] = comp.ns;
    cj["d_begin"] = comp.d_begin;
    cj["d_end"] = comp.d_end;
    GrowthRates gr = growth_rate(comp);
    cj["rates_begin"] = gr.rates_begin;
    cj["rates_end"] = gr.rates_end;
    cj["fekete_begin"] = gr.fekete_begin;
    cj["fekete_end"] = gr.fekete_end;
    cj["subexponential_evidence"] = gr.subexponential_evidence;
    cj["verdict_label"] = gr.label;
    summary["complexity"] = cj;
    for (std::size_t i = 0; i < comp.ns.size(); ++i) {
      add_digest(digest, "D_b(" + std::to_string(comp.ns[i]) + ")",
                 static_cast<double>(comp.d_begin[i]), "cplx");
      add_digest(digest, "D_e(" + std::to_string(comp.ns[i]) + ")",
                 static_cast<double>(comp.d_end[i]), "cplx");
    }
    // complexity.csv
    fs::path p = fs::path(config.out_dir) / "complexity.csv";
    std::ofstream csv(p);
    csv << "n,D_b,D_e,rate_b,rate_e\n";
    for (std::size_t i = 0; i < comp.ns.size(); ++i)
      csv << comp.ns[i] << ',' << comp.d_begin[i] << ',' << comp.d_end[i] << ','
          << gr.rates_begin[i] << ',' << gr.rates_end[i] << "\n";
    result.files.push_back(p.string());
  }

  summary["depths"] = Json::array();
  for (int n : config.depths) {
    Json dj;
    dj["n"] = n;
    HyperbolicityReport hyp = coefficients(map, n, {{}, config.seed, 2000});
    dj["lambda"] = hyp.lambda;
    dj["lambda_u_n_min"] = hyp.lambda_u_n_min;
    dj["lambda_s_n_max"] = hyp.lambda_s_n_max;
    add_digest(digest, "lambda_u," + std::to_string(n), hyp.lambda_u_n_min, "coeffs");

    // coefficients.csv per depth
    {
      fs::path p = fs::path(config.out_dir) / ("coefficients_n" + std::to_string(n) + ".csv");
      std::ofstream csv(p);
      csv << "word,u_min_lo,u_min_hi,u_max_lo,u_max_hi,s_min_lo,s_min_hi,s_max_lo,s_max_hi\n";
      for (const auto& cyl : hyp.cylinders) {
        const auto& c = *cyl.coeffs;
        csv << word_string(cyl.word) << ',' << c.u_min.lo << ',' << c.u_min.hi << ','
            << c.u_max.lo << ',' << c.u_max.hi << ',' << c.s_min.lo << ',' << c.s_min.hi << ','
            << c.s_max.lo << ',' << c.s_max.hi << "\n";
      }
      result.files.push_back(p.string());
    }

    double alpha = 1.0;
    auto betaF = find_beta(hyp, alpha, AnalysisMode::Forward);
    auto betaD = find_beta(hyp, alpha, AnalysisMode::Dual);
    if (betaF) {
      auto certB = check_bunching(hyp, alpha, *betaF, AnalysisMode::Forward);
      dj["bunching_forward"] = {{"beta", *betaF}, {"sup_hi", certB.sup_value.hi}};
      add_digest(digest, "bunching_sup," + std::to_string(n), certB.sup_value.hi, "bunch2");
    }
    if (betaD) dj["bunching_dual"] = {{"beta", *betaD}};

    PhysicalDescriptionResult phys = physical_description_check(map, n, cert, comp, hyp);
    dj["physical_description"] = physical_to_json(phys);
    if (phys.forward.best)
      add_digest(digest, "bound_forward," + std::to_string(n), phys.forward.best->product,
                 "thebest");
    if (phys.dual.best)
      add_digest(digest, "bound_dual," + std::to_string(n), phys.dual.best->product, "D2");
    if (phys.forward.best)
      add_digest(digest, "D1_value," + std::to_string(n), phys.forward.best->product, "D1");
    summary["depths"].push_back(dj);
  }

  if (config.ulam_grid > 0) {
    UlamOptions uopt;
    uopt.seed = config.seed;
    UlamOperator op = build_ulam(map, config.ulam_grid, config.ulam_grid, uopt);
    InvariantDensityResult inv = invariant_density(op);
    Json uj;
    uj["grid"] = config.ulam_grid;
    uj["exact"] = op.exact;
    uj["leading_eigenvalue"] = inv.leading;
    uj["mixing_gap_estimate"] = inv.mixing_gap_estimate;
    uj["num_densities"] = inv.densities.size();
    add_digest(digest, "ulam_leading", inv.leading, "lastar");
    BasinScanResult scan = birkhoff_basin_scan(
        map, [](double x, double y) { return x + 0.37 * y; }, 2000, 500, config.seed, op,
        inv.densities);
    uj["basin_fractions"] = scan.fractions;
    uj["basin_undecided_fraction"] = scan.undecided_fraction;
    summary["ulam"] = uj;

    fs::path p = fs::path(config.out_dir) / "density.csv";
    std::ofstream csv(p);
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
    result.files.push_back(p.string());

    fs::path sp = fs::path(config.out_dir) / "spectrum.json";
    Json spec_json;
    Json evs = Json::array();
    for (const auto& e : inv.eigenvalues) evs.push_back(Json::array({e.real(), e.imag()}));
    spec_json["eigenvalues"] = evs;
    std::ofstream sout(sp);
    sout << spec_json.dump(2);
    result.files.push_back(sp.string());
  }

  summary["digest"] = digest;
  fs::path sp = fs::path(config.out_dir) / "summary.json";
  std::ofstream out(sp);
  out << summary.dump(2) << "\n";
  result.files.push_back(sp.string());
  result.summary = summary;
  result.exit_code = 0;
  return result;
}

std::string render_digest(const Json& summary) {
  std::ostringstream os;
  os << "map " << summary["map"].get<std::string>() << " (hash "
     << summary["map_hash"].get<std::string>() << ")\n";
  for (const auto& e : summary["digest"]) {
    os << "  " << e["name"].get<std::string>() << " = " << e["value"].dump() << "  ["
       << e["eq"].get<std::string>() << "]\n";
  }
  if (summary.contains("depths"))
    for (const auto& d : summary["depths"])
      if (d.contains("physical_description"))
        os << "  physical description @n=" << d["n"].dump() << ": "
           << (d["physical_description"]["pass"].get<bool>() ? "PASS" : "FAIL") << " via "
           << d["physical_description"]["route"].get<std::string>() << " ("
           << d["physical_description"]["disclaimer"].get<std::string>() << ")\n";
  return os.str();
}

bool validate_digest_tags(const Json& summary) {
  if (!summary.contains("digest")) return false;
  for (const auto& e : summary["digest"]) {
    if (!e.contains("eq") || !e["eq"].is_string() || e["eq"].get<std::string>().empty())
      return false;
    if (!e.contains("value")) return false;
  }
  return true;
}

void dump_chart(const FoliationChart& chart, const std::string& path,
                const FoliationCertificate* cert) {
  Json header;
  header["C0"] = chart.params.C0;
  header["C1"] = chart.params.C1;
  header["alpha"] = chart.params.alpha;
  header["beta"] = chart.params.beta;
  header["base"] = Json::array({chart.params.base.x(), chart.params.base.y()});
  header["h"] = chart.h;
  header["nx"] = chart.nx;
  header["ny"] = chart.ny;
  header["cone_aperture"] = chart.params.cone.aperture_norm();
  if (cert) {
    header["certificate"] = {{"passed", cert->passed},
                             {"worst_y", cert->worst_y.value},
                             {"worst_x", cert->worst_x.value},
                             {"worst_mixed", cert->worst_mixed.value},
                             {"worst_base_line", cert->worst_base_line},
                             {"cone_slack", cert->worst_cone_slack},
                             {"dclass_constant", cert->dclass_constant}};
  }
  std::ofstream out(path, std::ios::binary);
  std::string hs = header.dump();
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.put('\0');
  auto write_vec = [&](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  write_vec(chart.F);
  write_vec(chart.Fx);
  write_vec(chart.Fy);
}

FoliationChart load_chart(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("chart file not found: " + path);
  std::string hs;
  std::getline(in, hs, '\0');
  Json header = Json::parse(hs);
  FoliationChart c;
  c.params.C0 = header["C0"].get<double>();
  c.params.C1 = header["C1"].get<double>();
  c.params.alpha = header["alpha"].get<double>();
  c.params.beta = header["beta"].get<double>();
  c.params.base = Vec2(header["base"][0].get<double>(), header["base"][1].get<double>());
  c.params.cone = GraphCone::axis2d(ConeKind::Stable, header["cone_aperture"].get<double>());
  c.h = header["h"].get<double>();
  c.nx = header["nx"].get<int>();
  c.ny = header["ny"].get<int>();
  std::size_t total = static_cast<std::size_t>(c.nx) * c.ny;
  auto read_vec = [&](std::vector<double>& v) {
    v.resize(total);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(total * sizeof(double)));
  };
  read_vec(c.F);
  read_vec(c.Fx);
  read_vec(c.Fy);
  return c;
}

std::string cache_dir_from_env() {
  const char* env = std::getenv("CONEHYP_CACHE");
  return env ? std::string(env) : std::string();
}

}  // namespace conehyp
