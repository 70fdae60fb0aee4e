#pragma once

#include <Eigen/Dense>

#include "mmdflow/feature_map.hpp"
#include "mmdflow/particles.hpp"

namespace mmdflow {

/// (1/n) sum_k phi(z_k). Sequential left-to-right reduction so the result is
/// reproducible bit for bit.
Eigen::VectorXd feature_mean(const ParticleCloud& cloud, const FeatureMap& map);

/// Difference of feature means, target minus source:
///   witness_vector(p, q) = feature_mean(p) - feature_mean(q).
/// Its norm is MMD(q, p); it is the direction each block pushes along.
Eigen::VectorXd witness_vector(const ParticleCloud& target,
                               const ParticleCloud& source,
                               const FeatureMap& map);

/// Squared MMD in feature space: |feature_mean(q) - feature_mean(p)|^2.
/// This is the biased plug-in estimator and coincides with the kernel
/// double-sum form for K(x, z) = phi(x) . phi(z).
double mmd_squared(const ParticleCloud& q, const ParticleCloud& p,
                   const FeatureMap& map);

}  // namespace mmdflow
