#include "mmdflow/residual_flow.hpp"

#include <cmath>
#include <sstream>

#include "mmdflow/errors.hpp"

namespace mmdflow {

ResidualBlock::ResidualBlock(std::shared_ptr<const FeatureMap> map,
                             double epsilon, Eigen::VectorXd witness)
    : map_(std::move(map)), epsilon_(epsilon), witness_(std::move(witness)) {
  if (!map_) throw InputError("residual block requires a feature map");
  if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_)) {
    throw InputError("residual block step size must be positive and finite");
  }
  if (witness_.size() != map_->dim_out()) {
    throw InputError("witness length does not match the feature dimension");
  }
  if (!witness_.allFinite()) throw InputError("witness must be finite");

  const auto& c = map_->constants();
  const double dd = static_cast<double>(map_->dim_in()) *
                    static_cast<double>(map_->dim_out());
  lipschitz_bound_ = epsilon_ * std::sqrt(dd) * c.L_Jac * witness_.norm();
  // 1e-12 relative grace absorbs round-off in schedules that sit exactly at
  // the certificate boundary.
  if (lipschitz_bound_ > 0.5 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "residual block violates the 1/2-Lipschitz certificate: bound "
       << lipschitz_bound_ << " with epsilon " << epsilon_;
    throw ConstructionError(os.str());
  }
}

Eigen::VectorXd ResidualBlock::displacement(const Eigen::VectorXd& z) const {
  return epsilon_ * map_->grad_witness(z, witness_);
}

Eigen::VectorXd ResidualBlock::forward(const Eigen::VectorXd& z) const {
  return z + displacement(z);
}

double ResidualBlock::lipschitz_bound() const { return lipschitz_bound_; }

Eigen::VectorXd ResidualBlock::invert(const Eigen::VectorXd& y, double tol,
                                      long max_iter, InvertStats* stats) const {
  if (!(tol > 0.0)) throw InputError("inversion tolerance must be positive");
  Eigen::VectorXd x = y;
  for (long it = 0; it <= max_iter; ++it) {
    const Eigen::VectorXd fx = displacement(x);
    const double residual = (x + fx - y).norm();
    if (residual <= tol) {
      if (stats) {
        stats->iterations = it;
        stats->residual = residual;
      }
      return x;
    }
    x = y - fx;
  }
  const double residual = (x + displacement(x) - y).norm();
  std::ostringstream os;
  os << "fixed-point inversion did not reach tol " << tol << " in " << max_iter
     << " iterations (residual " << residual << ")";
  throw NumericError(os.str());
}

ResidualFlow::ResidualFlow(std::shared_ptr<const FeatureMap> map)
    : map_(std::move(map)) {
  if (!map_) throw InputError("residual flow requires a feature map");
}

void ResidualFlow::append_block(double epsilon, Eigen::VectorXd witness) {
  blocks_.emplace_back(map_, epsilon, std::move(witness));
}

Eigen::VectorXd ResidualFlow::forward(Eigen::VectorXd z) const {
  for (const auto& block : blocks_) z = block.forward(z);
  return z;
}

ParticleCloud ResidualFlow::push_forward(const ParticleCloud& cloud) const {
  if (cloud.dim() != map_->dim_in()) {
    throw InputError("cloud dimension does not match the flow's map");
  }
  Eigen::MatrixXd out = cloud.points();
  for (const auto& block : blocks_) {
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
      out.row(k) = block.forward(out.row(k).transpose()).transpose();
    }
  }
  return ParticleCloud(std::move(out));
}

Eigen::VectorXd ResidualFlow::inverse(Eigen::VectorXd y, double tol,
                                      long max_iter, InvertStats* stats) const {
  InvertStats worst;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    InvertStats s;
    y = it->invert(y, tol, max_iter, &s);
    worst.iterations = std::max(worst.iterations, s.iterations);
    worst.residual = std::max(worst.residual, s.residual);
  }
  if (stats) *stats = worst;
  return y;
}

}  // namespace mmdflow
