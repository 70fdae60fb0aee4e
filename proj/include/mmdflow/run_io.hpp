#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmdflow/build.hpp"
#include "mmdflow/residual_flow.hpp"

namespace mmdflow {

/// Per-block CSV with the fixed header
///   m,epsilon,mmd_sq,delta,delta1,delta2,lip_bound
/// and shortest round-trip decimal formatting.
void write_run_csv(const std::filesystem::path& path, const BuildReport& report);

nlohmann::json run_summary_json(const BuildReport& report);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Flow serialization: the shared map's spec plus one {epsilon, psi} object
/// per block, both encoded as hexadecimal floats so the round trip is
/// bit-exact for IEEE-754 doubles.
nlohmann::json flow_to_json(const ResidualFlow& flow);
ResidualFlow flow_from_json(const nlohmann::json& doc);
void save_flow_json(const std::filesystem::path& path, const ResidualFlow& flow);
ResidualFlow load_flow_json(const std::filesystem::path& path);

struct SweepRow {
  double delta = 0.0;
  std::string schedule;
  double epsilon = 0.0;
  long n_predicted = 0;
  long n_used = 0;
  double initial_mmd_sq = 0.0;
  double final_mmd_sq = 0.0;
  double achieved_ratio = 0.0;
  bool ok = false;
  std::string error;
};

/// One row per (delta, schedule) pair; failed runs keep their row with
/// ok=false and the error message instead of aborting the sweep.
void write_sweep_csv(const std::filesystem::path& path,
                     const std::vector<SweepRow>& rows);

}  // namespace mmdflow
