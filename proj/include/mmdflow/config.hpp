#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"
#include "mmdflow/feature_map.hpp"
#include "mmdflow/particles.hpp"
#include "mmdflow/schedule.hpp"

namespace mmdflow {

/// Parameters of the seeded verification suite (see verify.hpp).
struct VerifyParams {
  long trials = 100;
  long n_particles = 2000;
  long pair_samples = 10000;
  double eps_max = 0.05;
  std::uint64_t seed = 0;
};

/// One experiment, parsed from a single JSON document. Unknown keys are
/// rejected so typos fail loudly.
struct ExperimentConfig {
  nlohmann::json map_spec;  // raw map object, embedded in serialized flows
  std::shared_ptr<const FeatureMap> map;
  DistributionSpec source;
  DistributionSpec target;
  long n_particles = 0;
  std::uint64_t seed = 0;
  ScheduleKind schedule = ScheduleKind::SecondOrder;
  double delta = 0.0;
  double safety_c = 1.0;
  double safety_c_max = 1024.0;
  double stop_tol = 1e-12;
  double contraction_slack = 1e-9;
  long certify_samples = 200;
  VerifyParams verify;
  std::string out_dir = "out";
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Map factory: {"kind": "affine" | "bounded_sine", ...}. An optional
/// "constants" object overrides the analytic declarations (it still has to
/// pass certification before any run).
std::shared_ptr<const FeatureMap> make_feature_map(const nlohmann::json& spec);

DistributionSpec parse_distribution(const nlohmann::json& spec);

}  // namespace mmdflow
