#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"
#include "mmdflow/mmd.hpp"
#include "mmdflow/residual_flow.hpp"

namespace mmdflow {

/// Exact per-block improvement of squared MMD split into its first-order
/// term in epsilon and the remainder. delta = delta1 + delta2 holds by
/// construction.
struct DeltaDecomposition {
  double delta = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double epsilon = 0.0;
  double mmd_sq_before = 0.0;
};

/// mmd_sq(q, p) - mmd_sq((Id + f)#q, p) for the block's f.
double improvement(const ParticleCloud& q, const ParticleCloud& p,
                   const ResidualBlock& block);

/// First-order term 2 * epsilon * mean_q |jacobian(z)^T w|^2 where w is the
/// block's witness. Requires the block's witness to equal
/// witness_vector(p, q) for these clouds; throws InputError otherwise.
double improvement_first_order(const ParticleCloud& q, const ParticleCloud& p,
                               const ResidualBlock& block);

DeltaDecomposition decompose_improvement(const ParticleCloud& q,
                                         const ParticleCloud& p,
                                         const ResidualBlock& block);

/// Result of checking one analytic inequality on concrete inputs.
/// slack is sign-adjusted so positive means satisfied:
/// lower bounds use lhs - rhs, upper bounds rhs - lhs.
/// tolerance = 1e-9 + 3 * (Monte Carlo standard error) where the quantities
/// involved are particle averages; satisfied iff slack >= -tolerance.
struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  bool satisfied = false;
  std::uint64_t seed = 0;
  nlohmann::json params;

  nlohmann::json to_json() const;
};

/// First-order lower bound: delta1 >= 2 * epsilon * b * mmd_sq(q, p).
BoundCheck check_first_order_bound(const ParticleCloud& q,
                                   const ParticleCloud& p,
                                   std::shared_ptr<const FeatureMap> map,
                                   double epsilon);

/// Empirical Lipschitz quotient of the block displacement over seeded point
/// pairs never exceeds the analytic bound epsilon*sqrt(d*d_phi)*L_Jac*|w|.
BoundCheck check_lipschitz_bound(const ResidualBlock& block, long pair_samples,
                                 std::uint64_t seed);

/// Remainder bound:
///   |delta2| <= eps^2 * mmd_sq * B * (B + |w| sqrt(d_phi) C (1 + eps L_feat sqrt(B))).
BoundCheck check_remainder_bound(const ParticleCloud& q, const ParticleCloud& p,
                                 std::shared_ptr<const FeatureMap> map,
                                 double epsilon);

struct TaylorFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points_used = 0;
  std::vector<std::pair<double, double>> table;  // (epsilon, delta2)

  nlohmann::json to_json() const;
};

/// Least-squares slope of log|delta2| against log(epsilon) over a decreasing
/// grid (>= 4 points spanning >= 2 decades; every block must pass its
/// Lipschitz certificate). Grid points where |delta2| sits at round-off
/// scale (below 1e3 * machine epsilon * mmd_sq) are excluded; fewer than 3
/// surviving points raises NumericError.
TaylorFit fit_remainder_order(const ParticleCloud& q, const ParticleCloud& p,
                              std::shared_ptr<const FeatureMap> map,
                              std::span<const double> eps_grid);

/// Delta-method standard error of mmd_squared(q, p) from the particle
/// spread; used to size Monte Carlo tolerances.
double mmd_squared_se(const ParticleCloud& q, const ParticleCloud& p,
                      const FeatureMap& map);

}  // namespace mmdflow
