#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "conehyp/foliation.hpp"
#include "conehyp/spectral.hpp"
#include "conehyp/ulam.hpp"

namespace conehyp {

inline constexpr const char* kCodeVersion = "0.1.0";

using Json = nlohmann::ordered_json;

struct AnalysisConfig {
  std::string map = "baker";  // builtin name or path to a map-config file
  std::vector<int> depths{4};
  std::string mode = "both";  // forward | dual | both
  int ulam_grid = 0;          // 0 skips the operator pipeline
  unsigned seed = 0;
  std::string out_dir = "out";
  OptimizeOptions optimize;

  static AnalysisConfig from_json(const Json& j);
  static AnalysisConfig from_file(const std::string& path);
};

PiecewiseMap map_from_config_json(const Json& j);
Json map_to_config_json(const PiecewiseMap& map);
PiecewiseMap load_map(const std::string& name_or_path);

struct RunResult {
  int exit_code = 0;
  Json summary;
  std::vector<std::string> files;  // emitted paths
};

/// Full pipeline: certify, enumerate, complexity, coefficients, bunching,
/// bound optimization, physical-description check, optional box-transfer
/// numerics; emits the report bundle into config.out_dir.
RunResult run_analysis(const AnalysisConfig& config);

Json certification_to_json(const CertificationReport& rep);
Json bound_to_json(const BoundReport& rep);
Json physical_to_json(const PhysicalDescriptionResult& rep);

/// Human-readable digest; every numeric line carries its equation tag.
std::string render_digest(const Json& summary);

/// Every digest entry must carry a nonempty equation tag.
bool validate_digest_tags(const Json& summary);

// chart dump: JSON header (params and, when supplied, the certificate), a
// null byte, then raw little-endian doubles; round-trips exactly
void dump_chart(const FoliationChart& chart, const std::string& path,
                const FoliationCertificate* cert = nullptr);
FoliationChart load_chart(const std::string& path);

std::string cache_dir_from_env();

}  // namespace conehyp
