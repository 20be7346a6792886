#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace csd {

struct ExperimentConfig {
  std::string channel;  // file path, or builtin:<name>
  std::string experiment;  // divergence | redundancy-sweep | simulate | tilt-lab | verify-all
  std::uint64_t seed = 1;
  std::vector<std::size_t> n_list;
  std::size_t samples = 10000;
  std::size_t num_seeds = 500;
  double epsilon = 0.0;  // 0 = auto
  double lambda_grid_resolution = 1e-3;
  double lambda = 0.7;
  std::size_t y = 0;
  double y_value = 1.0;           // Gaussian divergence slice
  double iota_offset_nats = 0.01; // ball radius = I_e + offset
  std::uint64_t max_proposals = 1'000'000;
  std::string tilt_verb = "cumulant";  // cumulant | dominance | typicality | ball
  std::string output_path;             // empty = stdout
  std::string output_format = "json";  // json | csv

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
};

struct RunResult {
  nlohmann::json record;      // schema_version / version / config echo / results
  bool bounds_ok = true;      // false -> exit code 4
};

RunResult run(const ExperimentConfig& config);

// Serializes the record (JSON, or CSV for experiments with a row schema) and
// writes it atomically (temp file + rename); empty path writes to stdout.
void write_record(const RunResult& result, const ExperimentConfig& config);

} // namespace csd
