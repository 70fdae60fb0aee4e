#include "mmdflow/schedule.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mmdflow/errors.hpp"

namespace mmdflow {

const char* schedule_kind_name(ScheduleKind kind) {
  return kind == ScheduleKind::FirstOrder ? "first_order" : "second_order";
}

nlohmann::json EpsilonSchedule::to_json() const {
  nlohmann::json j{{"kind", schedule_kind_name(kind)},
                   {"delta", delta},
                   {"epsilon", epsilon},
                   {"num_blocks", num_blocks}};
  if (kind == ScheduleKind::FirstOrder) {
    j["r"] = r;
    j["safety_c"] = safety_c;
  } else {
    j["epsilon_delta"] = epsilon_delta;
    j["epsilon_lip"] = epsilon_lip;
    j["b"] = b;
    j["contraction"] = contraction;
  }
  return j;
}

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    std::ostringstream os;
    os << "target ratio delta must lie in (0, 1), got " << delta;
    throw ConfigError(os.str());
  }
}

long checked_block_count(double raw, const char* what) {
  if (!(raw > 0.0) || !std::isfinite(raw)) {
    throw ScheduleError(std::string(what) + ": block count is not a positive finite number");
  }
  if (raw > static_cast<double>(kMaxScheduleBlocks)) {
    std::ostringstream os;
    os << what << ": block budget " << raw << " exceeds the cap "
       << kMaxScheduleBlocks;
    throw ScheduleError(os.str());
  }
  return std::max<long>(1, static_cast<long>(std::ceil(raw)));
}

}  // namespace

EpsilonSchedule first_order_schedule(double delta, double b, double safety_c) {
  check_delta(delta);
  if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("constant b must be positive");
  if (!(safety_c > 0.0) || !std::isfinite(safety_c)) {
    throw ConfigError("safety_c must be positive");
  }

  EpsilonSchedule s;
  s.kind = ScheduleKind::FirstOrder;
  s.delta = delta;
  s.safety_c = safety_c;
  s.r = std::log(2.0 / delta) / (2.0 * b);
  s.num_blocks = checked_block_count(safety_c * s.r * s.r / delta, "first_order");
  s.epsilon = s.r / static_cast<double>(s.num_blocks);
  return s;
}

EpsilonSchedule second_order_schedule(const SmoothnessConstants& constants,
                                      double witness_norm, double delta,
                                      Eigen::Index d, Eigen::Index d_phi) {
  check_delta(delta);
  constants.validate();
  if (!(witness_norm > 0.0) || !std::isfinite(witness_norm)) {
    throw InputError("initial witness norm must be positive");
  }
  if (d < 1 || d_phi < 1) throw InputError("dimensions must be positive");

  const double inf = std::numeric_limits<double>::infinity();
  const double sqrt_dphi = std::sqrt(static_cast<double>(d_phi));
  const double b = constants.b;
  const double B = constants.B;
  const double C = constants.C;

  // Quadratic-term constraint; always finite since B > 0.
  const double eps_quad = b / (2.0 * (witness_norm * sqrt_dphi * B * C + B * B));
  // Cubic-term constraint; vacuous when the curvature or map Lipschitz
  // constant vanishes.
  const double cubic_coeff =
      2.0 * witness_norm * sqrt_dphi * std::pow(B, 1.5) * C * constants.L_feat;
  const double eps_cubic = cubic_coeff > 0.0 ? std::sqrt(b / cubic_coeff) : inf;

  EpsilonSchedule s;
  s.kind = ScheduleKind::SecondOrder;
  s.delta = delta;
  s.b = b;
  s.epsilon_delta = std::min(eps_quad, eps_cubic);
  s.epsilon_lip =
      constants.L_Jac > 0.0
          ? 1.0 / (2.0 * std::sqrt(static_cast<double>(d * d_phi)) *
                   constants.L_Jac * witness_norm)
          : inf;
  s.epsilon = std::min(s.epsilon_delta, s.epsilon_lip);

  if (!(b * s.epsilon < 1.0)) {
    std::ostringstream os;
    os << "second_order: b * epsilon = " << b * s.epsilon << " must be below 1";
    throw ScheduleError(os.str());
  }
  s.contraction = 1.0 - b * s.epsilon;
  s.num_blocks = checked_block_count(
      std::log(1.0 / delta) / std::log(1.0 / s.contraction), "second_order");
  return s;
}

}  // namespace mmdflow
