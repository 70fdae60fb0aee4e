#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

namespace mmdflow {

/// A finite set of points in R^d with uniform weights 1/n. Immutable once
/// built; the empirical distribution it represents is the object all MMD
/// computations act on.
class ParticleCloud {
 public:
  /// points: n x d, one particle per row. Throws InputError when empty or
  /// not finite.
  explicit ParticleCloud(Eigen::MatrixXd points);

  Eigen::Index count() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }
  const Eigen::MatrixXd& points() const { return points_; }
  Eigen::VectorXd point(Eigen::Index k) const { return points_.row(k); }

 private:
  Eigen::MatrixXd points_;
};

struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct GaussianMixtureSpec {
  std::vector<GaussianSpec> components;
  std::vector<double> weights;  // must sum to 1 within 1e-9
};

struct UniformBoxSpec {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct PointMassSpec {
  Eigen::VectorXd x;
};

/// Circle of given radius in R^2 with Gaussian radial noise.
struct RingSpec {
  double radius = 1.0;
  double noise = 0.0;
};

/// An explicit particle list (e.g. embedded in a config). Sampling returns
/// the rows as-is when n matches, otherwise uniform draws with replacement.
struct CloudSpec {
  Eigen::MatrixXd points;
};

using DistributionSpec = std::variant<GaussianSpec, GaussianMixtureSpec,
                                      UniformBoxSpec, PointMassSpec, RingSpec,
                                      CloudSpec>;

Eigen::Index distribution_dim(const DistributionSpec& spec);

/// Draws n particles. Deterministic given (spec, n, seed): the draw order is
/// fixed (per particle: component index if any, then coordinates in order).
/// Throws ConfigError on invalid parameters (non-PSD covariance, weights not
/// summing to 1, ...).
ParticleCloud sample_distribution(const DistributionSpec& spec, Eigen::Index n,
                                  std::uint64_t seed);

/// CSV round trip: one particle per row, d comma-separated columns, no
/// header. Doubles are written in shortest round-trip form.
void save_cloud_csv(const std::filesystem::path& path, const ParticleCloud& cloud);
ParticleCloud load_cloud_csv(const std::filesystem::path& path);

}  // namespace mmdflow
