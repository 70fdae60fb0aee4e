#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "mmdflow/feature_map.hpp"
#include "mmdflow/particles.hpp"

namespace mmdflow {

struct InvertStats {
  long iterations = 0;
  double residual = 0.0;
};

/// One layer z -> z + f(z) with f(z) = epsilon * jacobian(z)^T * witness.
/// The constructor enforces the 1/2-Lipschitz certificate
///   epsilon * sqrt(d * d_phi) * L_Jac * |witness| <= 1/2
/// (an analytic bound, so certification is conservative) and throws
/// ConstructionError when it fails. Blocks are immutable.
class ResidualBlock {
 public:
  ResidualBlock(std::shared_ptr<const FeatureMap> map, double epsilon,
                Eigen::VectorXd witness);

  double epsilon() const { return epsilon_; }
  const Eigen::VectorXd& witness() const { return witness_; }
  const FeatureMap& map() const { return *map_; }
  const std::shared_ptr<const FeatureMap>& map_ptr() const { return map_; }

  /// f(z) = epsilon * grad of (witness . phi) at z.
  Eigen::VectorXd displacement(const Eigen::VectorXd& z) const;

  /// z + f(z).
  Eigen::VectorXd forward(const Eigen::VectorXd& z) const;

  /// Analytic upper bound on Lip(f).
  double lipschitz_bound() const;

  /// Solves x + f(x) = y by fixed-point iteration x <- y - f(x) starting at
  /// x = y. The 1/2 contraction factor caps the iteration count at
  /// ceil(log2(initial_residual / tol)). Throws NumericError when max_iter
  /// is exhausted (which would indicate a violated certificate).
  Eigen::VectorXd invert(const Eigen::VectorXd& y, double tol = 1e-12,
                         long max_iter = 100, InvertStats* stats = nullptr) const;

 private:
  std::shared_ptr<const FeatureMap> map_;
  double epsilon_;
  Eigen::VectorXd witness_;
  double lipschitz_bound_;
};

/// An ordered composition of residual blocks over one shared feature map,
/// first-applied first. Every block carries the 1/2-Lipschitz certificate,
/// so the composition is invertible. Immutable once built (append during
/// construction only); safe for concurrent evaluation.
class ResidualFlow {
 public:
  explicit ResidualFlow(std::shared_ptr<const FeatureMap> map);

  void append_block(double epsilon, Eigen::VectorXd witness);

  const FeatureMap& map() const { return *map_; }
  const std::shared_ptr<const FeatureMap>& map_ptr() const { return map_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }

  Eigen::VectorXd forward(Eigen::VectorXd z) const;

  /// Applies every block to every particle; particle count and order are
  /// preserved.
  ParticleCloud push_forward(const ParticleCloud& cloud) const;

  /// Blockwise fixed-point inversion, last block first. `stats`, when given,
  /// receives the worst per-block iteration count and residual.
  Eigen::VectorXd inverse(Eigen::VectorXd y, double tol = 1e-12,
                          long max_iter = 100, InvertStats* stats = nullptr) const;

 private:
  std::shared_ptr<const FeatureMap> map_;
  std::vector<ResidualBlock> blocks_;
};

}  // namespace mmdflow
