#include "mmdflow/build.hpp"

#include <cmath>
#include <sstream>

#include "mmdflow/errors.hpp"

namespace mmdflow {

namespace {

double mean_grad_witness_sq(const ParticleCloud& cloud, const FeatureMap& map,
                            const Eigen::VectorXd& witness) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < cloud.count(); ++k) {
    sum += map.grad_witness(cloud.point(k), witness).squaredNorm();
  }
  return sum / static_cast<double>(cloud.count());
}

}  // namespace

std::pair<ResidualFlow, BuildReport> build_flow(
    const ParticleCloud& q0, const ParticleCloud& p,
    std::shared_ptr<const FeatureMap> map, const EpsilonSchedule& schedule,
    double stop_tol, double contraction_slack) {
  if (!map) throw InputError("build_flow requires a feature map");
  if (q0.dim() != map->dim_in() || p.dim() != map->dim_in()) {
    throw InputError("cloud dimensions do not match the feature map");
  }
  if (stop_tol < 0.0) throw InputError("stop_tol must be nonnegative");

  ResidualFlow flow(map);
  BuildReport report;
  report.schedule = schedule;
  report.target_delta = schedule.delta;
  report.schedule_blocks = schedule.num_blocks;

  const Eigen::VectorXd target_mean = feature_mean(p, *map);
  Eigen::MatrixXd current = q0.points();
  Eigen::VectorXd current_mean = feature_mean(q0, *map);

  double mmd_sq = (current_mean - target_mean).squaredNorm();
  report.initial_mmd_sq = mmd_sq;
  report.rows.push_back({0, 0.0, mmd_sq, 0.0, 0.0, 0.0, 0.0});

  for (long m = 1; m <= schedule.num_blocks; ++m) {
    const Eigen::VectorXd witness = target_mean - current_mean;
    const double witness_norm = witness.norm();
    if (mmd_sq <= schedule.delta * report.initial_mmd_sq) break;
    if (witness_norm <= stop_tol) break;

    ParticleCloud cloud(current);
    const double delta1 =
        2.0 * schedule.epsilon * mean_grad_witness_sq(cloud, *map, witness);

    try {
      flow.append_block(schedule.epsilon, witness);
    } catch (const ConstructionError& e) {
      std::ostringstream os;
      os << "block " << m << ": " << e.what();
      throw ConstructionError(os.str());
    }
    const ResidualBlock& block = flow.blocks().back();

    for (Eigen::Index k = 0; k < current.rows(); ++k) {
      current.row(k) = block.forward(current.row(k).transpose()).transpose();
    }
    current_mean = feature_mean(ParticleCloud(current), *map);
    const double mmd_after = (current_mean - target_mean).squaredNorm();
    const double delta = mmd_sq - mmd_after;

    if (schedule.kind == ScheduleKind::SecondOrder &&
        mmd_after > schedule.contraction * mmd_sq * (1.0 + contraction_slack)) {
      std::ostringstream os;
      os << "block " << m << ": squared MMD " << mmd_after
         << " above the certified per-block envelope "
         << schedule.contraction * mmd_sq
         << " (declared constants do not hold along this trajectory)";
      throw NumericError(os.str());
    }

    report.rows.push_back({m, schedule.epsilon, mmd_after, delta, delta1,
                           delta - delta1, block.lipschitz_bound()});
    mmd_sq = mmd_after;
  }

  report.blocks_used = static_cast<long>(flow.size());
  report.final_mmd_sq = mmd_sq;
  report.achieved_ratio =
      report.initial_mmd_sq > 0.0 ? mmd_sq / report.initial_mmd_sq : 0.0;
  report.target_met = mmd_sq <= schedule.delta * report.initial_mmd_sq;
  return {std::move(flow), std::move(report)};
}

FirstOrderBuildResult build_first_order(const ParticleCloud& q0,
                                        const ParticleCloud& p,
                                        std::shared_ptr<const FeatureMap> map,
                                        double delta, double safety_c,
                                        double safety_c_max, double stop_tol) {
  if (!(safety_c > 0.0) || !(safety_c_max >= safety_c)) {
    throw ConfigError("require 0 < safety_c <= safety_c_max");
  }
  const double b = map->constants().b;

  double c = safety_c;
  int attempts = 0;
  while (true) {
    ++attempts;
    const bool last = 2.0 * c > safety_c_max;
    const EpsilonSchedule schedule = first_order_schedule(delta, b, c);
    try {
      auto [flow, report] = build_flow(q0, p, map, schedule, stop_tol);
      if (report.target_met || last) {
        return {std::move(flow), std::move(report), attempts, c};
      }
    } catch (const ConstructionError&) {
      // Step too large for the certificate; doubling safety_c shrinks it.
      if (last) throw;
    }
    c *= 2.0;
  }
}

}  // namespace mmdflow
