#include "mmdflow/mmd.hpp"

#include "mmdflow/errors.hpp"

namespace mmdflow {

namespace {

void check_dims(const ParticleCloud& cloud, const FeatureMap& map) {
  if (cloud.dim() != map.dim_in()) {
    throw InputError("cloud dimension does not match the feature map");
  }
}

}  // namespace

Eigen::VectorXd feature_mean(const ParticleCloud& cloud, const FeatureMap& map) {
  check_dims(cloud, map);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(map.dim_out());
  for (Eigen::Index k = 0; k < cloud.count(); ++k) {
    sum += map.eval(cloud.point(k));
  }
  return sum / static_cast<double>(cloud.count());
}

Eigen::VectorXd witness_vector(const ParticleCloud& target,
                               const ParticleCloud& source,
                               const FeatureMap& map) {
  return feature_mean(target, map) - feature_mean(source, map);
}

double mmd_squared(const ParticleCloud& q, const ParticleCloud& p,
                   const FeatureMap& map) {
  return (feature_mean(q, map) - feature_mean(p, map)).squaredNorm();
}

}  // namespace mmdflow
