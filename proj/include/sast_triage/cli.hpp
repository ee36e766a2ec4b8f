#pragma once

// Command-line front end: ingest, assess, calibrate, ensemble, report.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sast_triage/assessment.hpp"
#include "sast_triage/calibration.hpp"
#include "sast_triage/gateway.hpp"

namespace sast_triage {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;  // bad flags or configuration
inline constexpr int kParse = 3;
inline constexpr int kTransport = 4;
inline constexpr int kCalibration = 5;
inline constexpr int kAssessmentFailures = 6;  // batch finished, some findings have no score
}  // namespace exit_code

struct EndpointConfig {
  ModelEndpoint endpoint;
  /// Script for "mock://" endpoints; empty = built-in pseudo-scores.
  std::optional<std::filesystem::path> mock_script;
};

/// Settings read from the JSON config file; every field also has a flag.
struct RunConfig {
  std::vector<EndpointConfig> endpoints;
  AssessmentConfig assessment;
  AssessMode mode = AssessMode::Single;
  std::size_t workers = 4;
  std::optional<std::filesystem::path> template_path;
  CacheMode cache_mode = CacheMode::Live;
  std::optional<std::filesystem::path> cache_dir;
  ThresholdGrid grid = ThresholdGrid::default_grid();
  double beta = 2.0;
  std::map<std::string, double> thresholds;

  /// Throws ConfigError.
  void validate() const;
};

/// Throws ConfigError on unknown keys or wrong types. Relative paths are
/// taken relative to base_dir.
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir);
/// Snapshot written into reports. Contains environment variable names, never values.
Json to_json(const RunConfig& config);

/// Entry point behind main(). Returns one of the exit_code values.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sast_triage
