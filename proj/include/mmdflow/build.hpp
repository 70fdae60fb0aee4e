#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "mmdflow/mmd.hpp"
#include "mmdflow/residual_flow.hpp"
#include "mmdflow/schedule.hpp"

namespace mmdflow {

/// One row per block. Row m (m >= 1) describes the state after block m was
/// appended; row 0 is the initial state. mmd_sq is measured after the row's
/// block, delta = mmd before - mmd after, delta1 the first-order term and
/// delta2 = delta - delta1 the remainder.
struct BlockRecord {
  long m = 0;
  double epsilon = 0.0;
  double mmd_sq = 0.0;
  double delta = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double lip_bound = 0.0;
};

struct BuildReport {
  std::vector<BlockRecord> rows;  // rows[0] is the initial state
  double initial_mmd_sq = 0.0;
  double final_mmd_sq = 0.0;
  double achieved_ratio = 0.0;  // final / initial, 0 when initial is 0
  double target_delta = 0.0;
  long blocks_used = 0;
  long schedule_blocks = 0;
  bool target_met = false;
  EpsilonSchedule schedule;
};

/// Greedy stacking loop: for m = 1..N recompute the witness against the
/// current pushforward, stop early when the target ratio is reached or the
/// witness norm falls below stop_tol, otherwise append a block with the
/// schedule's epsilon and push the cloud through it.
///
/// For second-order schedules the certified per-block descent
///   mmd_after <= contraction * mmd_before * (1 + contraction_slack)
/// is asserted after every block; a violation throws NumericError naming the
/// block (it means the map's constants do not hold in the visited region).
/// A failed 1/2-Lipschitz certificate throws ConstructionError likewise
/// naming the block.
std::pair<ResidualFlow, BuildReport> build_flow(
    const ParticleCloud& q0, const ParticleCloud& p,
    std::shared_ptr<const FeatureMap> map, const EpsilonSchedule& schedule,
    double stop_tol = 1e-12, double contraction_slack = 1e-9);

struct FirstOrderBuildResult {
  ResidualFlow flow;
  BuildReport report;
  int attempts = 0;
  double final_safety_c = 0.0;
};

/// First-order build with the safety_c retry loop: on a missed target ratio
/// or a failed Lipschitz certificate the schedule is rebuilt with doubled
/// safety_c, up to safety_c_max. The last attempt's result is returned even
/// when the target was not met (check report.target_met).
FirstOrderBuildResult build_first_order(const ParticleCloud& q0,
                                        const ParticleCloud& p,
                                        std::shared_ptr<const FeatureMap> map,
                                        double delta, double safety_c,
                                        double safety_c_max,
                                        double stop_tol = 1e-12);

}  // namespace mmdflow
