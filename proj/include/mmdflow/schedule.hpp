#pragma once

#include <cstdint>

#include "json.hpp"
#include "mmdflow/feature_map.hpp"

namespace mmdflow {

enum class ScheduleKind { FirstOrder, SecondOrder };

const char* schedule_kind_name(ScheduleKind kind);

/// Per-block step size plus block budget for a greedy build.
///
/// First order: epsilon = r / N with r = log(2/delta) / (2b) and
/// N = ceil(safety_c * r^2 / delta). The asymptotic block count hides a
/// constant, exposed here as safety_c.
///
/// Second order: epsilon is a delta-independent constant
/// min(epsilon_delta, epsilon_lip) chosen so each block contracts the
/// squared MMD by at least the factor (1 - b * epsilon), and
/// N = ceil(log(1/delta) / log(1/(1 - b * epsilon))).
struct EpsilonSchedule {
  ScheduleKind kind = ScheduleKind::FirstOrder;
  double delta = 0.0;    // target final/initial squared-MMD ratio
  double epsilon = 0.0;  // per-block step
  long num_blocks = 0;   // N

  // first-order parameters
  double r = 0.0;
  double safety_c = 0.0;

  // second-order parameters
  double epsilon_delta = 0.0;
  double epsilon_lip = 0.0;
  double b = 0.0;
  double contraction = 0.0;  // 1 - b * epsilon

  nlohmann::json to_json() const;
};

/// Throws ConfigError when delta is outside (0, 1) or b/safety_c are not
/// positive; ScheduleError when the block budget would exceed the build cap.
EpsilonSchedule first_order_schedule(double delta, double b, double safety_c);

/// Builds the constant-step schedule from the map's certified constants and
/// the initial witness norm. Degenerate constants give vacuous partial
/// bounds: the curvature term is +inf when C = 0 and epsilon_lip is +inf
/// when L_Jac = 0. Throws ScheduleError if b * epsilon >= 1 (cannot happen
/// for valid constants, but guarded).
EpsilonSchedule second_order_schedule(const SmoothnessConstants& constants,
                                      double witness_norm, double delta,
                                      Eigen::Index d, Eigen::Index d_phi);

/// Hard cap on schedule block budgets; exceeding it raises ScheduleError.
inline constexpr long kMaxScheduleBlocks = 2'000'000;

}  // namespace mmdflow
