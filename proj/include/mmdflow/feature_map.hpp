#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace mmdflow {

/// Global analytic bounds a feature map certifies about itself:
///   b      lower bound on sigma_min(J(z))^2 over all z        (> 0)
///   B      upper bound on sigma_max(J(z))^2 over all z
///   C      upper bound on |eigenvalue| of every per-coordinate Hessian
///   L_feat Lipschitz constant of the map itself
///   L_Jac  Lipschitz constant of every single Jacobian entry
/// These are declared from closed forms, never estimated; certify_constants
/// cross-checks them against sampled evaluations.
struct SmoothnessConstants {
  double b = 0.0;
  double B = 0.0;
  double C = 0.0;
  double L_feat = 0.0;
  double L_Jac = 0.0;

  /// Throws ConfigError unless 0 < b <= B, C/L_feat/L_Jac >= 0, all finite.
  void validate() const;

  nlohmann::json to_json() const;
  static SmoothnessConstants from_json(const nlohmann::json& j);
};

/// A smooth map phi: R^d -> R^{d_phi} (d_phi finite) with analytic Jacobian,
/// per-coordinate Hessians and certified smoothness constants. Instances are
/// immutable after construction; every method is const and safe to call from
/// multiple threads.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;

  Eigen::Index dim_in() const { return dim_in_; }
  Eigen::Index dim_out() const { return dim_out_; }
  const SmoothnessConstants& constants() const { return constants_; }

  /// phi(z). Throws InputError on dimension mismatch or non-finite input.
  Eigen::VectorXd eval(const Eigen::VectorXd& z) const;

  /// d_phi x d matrix of partial derivatives, row i = grad of coordinate i.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const;

  /// d x d Hessian of output coordinate `coord` (0-based); always symmetric.
  /// Throws InputError when coord is outside [0, dim_out).
  Eigen::MatrixXd hessian(Eigen::Index coord, const Eigen::VectorXd& z) const;

  /// jacobian(z)^T * w, the gradient of z -> w . phi(z). This is the
  /// displacement direction residual blocks use; subclasses override the
  /// implementation when it is cheaper than forming the full Jacobian.
  Eigen::VectorXd grad_witness(const Eigen::VectorXd& z,
                               const Eigen::VectorXd& w) const;

  /// The map's construction parameters in experiment-config form.
  virtual nlohmann::json to_json() const = 0;

 protected:
  FeatureMap(Eigen::Index dim_in, Eigen::Index dim_out,
             SmoothnessConstants constants);

  virtual Eigen::VectorXd eval_impl(const Eigen::VectorXd& z) const = 0;
  virtual Eigen::MatrixXd jacobian_impl(const Eigen::VectorXd& z) const = 0;
  virtual Eigen::MatrixXd hessian_impl(Eigen::Index coord,
                                       const Eigen::VectorXd& z) const = 0;
  virtual Eigen::VectorXd grad_witness_impl(const Eigen::VectorXd& z,
                                            const Eigen::VectorXd& w) const;

 private:
  void check_point(const Eigen::VectorXd& z) const;

  Eigen::Index dim_in_;
  Eigen::Index dim_out_;
  SmoothnessConstants constants_;
};

/// phi(z) = A z + c. Constants: b = sigma_min(A)^2, B = sigma_max(A)^2,
/// C = 0, L_feat = sigma_max(A), L_Jac = 0. Requires sigma_min(A) > 0.
class AffineMap : public FeatureMap {
 public:
  AffineMap(Eigen::MatrixXd matrix, Eigen::VectorXd offset);

  static std::shared_ptr<const AffineMap> identity(Eigen::Index dim);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& offset() const { return offset_; }

  nlohmann::json to_json() const override;

 protected:
  Eigen::VectorXd eval_impl(const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd jacobian_impl(const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd hessian_impl(Eigen::Index coord,
                               const Eigen::VectorXd& z) const override;
  Eigen::VectorXd grad_witness_impl(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& w) const override;

 private:
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd offset_;
};

/// phi(z) = (z, alpha * sin(W z)) with sin applied per row of W (k x d).
/// The identity block keeps sigma_min(J) >= 1 everywhere, so:
///   b = 1, B = 1 + alpha^2 sigma_max(W)^2, C = alpha * max_i |w_i|^2,
///   L_feat = sqrt(B), L_Jac = alpha * max_{i,j} |W_ij| * |w_i|.
class BoundedSineMap : public FeatureMap {
 public:
  BoundedSineMap(double alpha, Eigen::MatrixXd weights);

  double alpha() const { return alpha_; }
  const Eigen::MatrixXd& weights() const { return weights_; }

  nlohmann::json to_json() const override;

 protected:
  Eigen::VectorXd eval_impl(const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd jacobian_impl(const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd hessian_impl(Eigen::Index coord,
                               const Eigen::VectorXd& z) const override;
  Eigen::VectorXd grad_witness_impl(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& w) const override;

 private:
  double alpha_;
  Eigen::MatrixXd weights_;
};

/// Outcome of sampling-based cross-checks of the declared constants.
/// Report-only: `pass` is false when any observation beats its declaration,
/// with one message per violated constant.
struct CertificationReport {
  double worst_sigma_min_sq = 0.0;   // smallest observed sigma_min(J)^2
  double worst_sigma_max_sq = 0.0;   // largest observed sigma_max(J)^2
  double worst_hessian_eig = 0.0;    // largest observed |eigenvalue|
  double worst_feat_quotient = 0.0;  // largest |phi(y)-phi(x)| / |y-x|
  double worst_jac_quotient = 0.0;   // largest per-entry Jacobian quotient
  long samples = 0;
  bool pass = false;
  std::vector<std::string> violations;

  nlohmann::json to_json() const;
};

/// Evaluates the map at `sample_budget` seeded points (and point pairs,
/// for the Lipschitz quotients) spread over several length scales and
/// compares the worst observations against the declared constants.
CertificationReport certify_constants(const FeatureMap& map, long sample_budget,
                                      std::uint64_t rng_seed);

}  // namespace mmdflow
