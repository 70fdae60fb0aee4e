#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mmdflow/analysis.hpp"
#include "mmdflow/config.hpp"

namespace mmdflow {

/// One randomized trial of the three per-block inequalities on a freshly
/// drawn bounded-sine map (d in 1..3, d_phi = 2d) and a pair of moderately
/// separated Gaussian clouds. Every tenth trial uses an affine map instead,
/// which exercises the equality cases.
struct TrialOutcome {
  std::uint64_t trial_seed = 0;
  nlohmann::json trial_params;
  BoundCheck first_order;
  BoundCheck lipschitz;
  BoundCheck remainder;
};

std::vector<TrialOutcome> run_bound_trials(const VerifyParams& params);

struct VerificationReport {
  CertificationReport certification;
  std::vector<TrialOutcome> trials;
  TaylorFit taylor_affine;
  TaylorFit taylor_sine;
  std::vector<BoundCheck> extra_checks;  // Taylor-slope and inversion checks
  bool all_satisfied = false;

  std::vector<std::string> violations() const;
  nlohmann::json to_json() const;
};

/// The full seeded property suite: constant certification for the config's
/// map, the randomized bound trials, remainder-order fits on an exact
/// quadratic case (slope must equal 2 to 1e-6) and a bounded-sine case
/// (slope within [1.9, 2.1]), and an inversion round trip over a small flow
/// built on the config's clouds.
VerificationReport run_verification(const ExperimentConfig& cfg);

}  // namespace mmdflow
