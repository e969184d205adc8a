#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "conehyp/report.hpp"

using namespace conehyp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("map configs round-trip through their file format") {
  PiecewiseMap baker = builtin_baker();
  Json j = map_to_config_json(baker);
  PiecewiseMap back = map_from_config_json(j);
  CHECK(back.content_hash() == baker.content_hash());
  CHECK(back.branches.size() == 2);
  CHECK(back.carrier.periodic_x);
  CHECK(!back.carrier.periodic_y);
}

TEST_CASE("configs validate their fields") {
  Json bad1 = {{"map", "baker"}, {"depths", {0}}};
  CHECK_THROWS_AS(AnalysisConfig::from_json(bad1), ConfigError);
  Json bad2 = {{"map", "baker"}, {"mode", "sideways"}};
  CHECK_THROWS_AS(AnalysisConfig::from_json(bad2), ConfigError);
  CHECK_THROWS_AS(load_map("/nonexistent/map.json"), ConfigError);
}

TEST_CASE("chart dumps round-trip bit exactly") {
  FoliationClassParams p;
  p.cone = GraphCone::axis2d(ConeKind::Stable, 0.5);
  FoliationChart c = FoliationChart::from_function(
      p, p.C0 / 64, [](double x, double y) { return x + 0.017 * y; },
      [](double, double) { return Vec2(1.0, 0.017); });
  fs::path path = fs::temp_directory_path() / "conehyp_chart_test.bin";
  dump_chart(c, path.string());
  FoliationChart back = load_chart(path.string());
  REQUIRE(back.F.size() == c.F.size());
  for (std::size_t i = 0; i < c.F.size(); ++i) {
    CHECK(back.F[i] == c.F[i]);
    CHECK(back.Fx[i] == c.Fx[i]);
    CHECK(back.Fy[i] == c.Fy[i]);
  }
  fs::remove(path);
}

TEST_CASE("analysis summaries carry tagged digests and render") {
  AnalysisConfig cfg;
  cfg.map = "toral";
  cfg.depths = {2};
  cfg.ulam_grid = 8;
  cfg.out_dir = (fs::temp_directory_path() / "conehyp_run_digest").string();
  RunResult r = run_analysis(cfg);
  CHECK(r.exit_code == 0);
  CHECK(validate_digest_tags(r.summary));
  std::string digest = render_digest(r.summary);
  CHECK(digest.find("[cplx]") != std::string::npos);
  CHECK(digest.find("[thebest]") != std::string::npos);
  CHECK(digest.find("conditional on theorem hypotheses at finite n") != std::string::npos);
  Json broken = r.summary;
  broken["digest"][0].erase("eq");
  CHECK(!validate_digest_tags(broken));
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("identical seeds reproduce the bundle byte for byte") {
  AnalysisConfig cfg;
  cfg.map = "baker";
  cfg.depths = {3};
  cfg.ulam_grid = 8;
  cfg.seed = 9;
  cfg.out_dir = (fs::temp_directory_path() / "conehyp_run_a").string();
  RunResult a = run_analysis(cfg);
  cfg.out_dir = (fs::temp_directory_path() / "conehyp_run_b").string();
  RunResult b = run_analysis(cfg);
  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i)
    CHECK(slurp(a.files[i]) == slurp(b.files[i]));
  fs::remove_all(fs::temp_directory_path() / "conehyp_run_a");
  fs::remove_all(fs::temp_directory_path() / "conehyp_run_b");
}

TEST_CASE("the archive reproduces cached complexity results") {
  fs::path cache = fs::temp_directory_path() / "conehyp_cache_test";
  fs::remove_all(cache);
  setenv("CONEHYP_CACHE", cache.c_str(), 1);
  AnalysisConfig cfg;
  cfg.map = "baker";
  cfg.depths = {3};
  cfg.out_dir = (fs::temp_directory_path() / "conehyp_run_c1").string();
  RunResult first = run_analysis(cfg);
  CHECK(fs::exists(cache));
  cfg.out_dir = (fs::temp_directory_path() / "conehyp_run_c2").string();
  RunResult second = run_analysis(cfg);  // served from the archive
  CHECK(first.summary["complexity"] == second.summary["complexity"]);
  unsetenv("CONEHYP_CACHE");
  fs::remove_all(cache);
  fs::remove_all(fs::temp_directory_path() / "conehyp_run_c1");
  fs::remove_all(fs::temp_directory_path() / "conehyp_run_c2");
}
