#include "mmdflow/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mmdflow/errors.hpp"

namespace mmdflow {

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------
// SmoothnessConstants

void SmoothnessConstants::validate() const {
  const double vals[] = {b, B, C, L_feat, L_Jac};
  for (double v : vals) {
    if (!std::isfinite(v)) throw ConfigError("smoothness constants must be finite");
  }
  if (b <= 0.0) throw ConfigError("constant b must be positive");
  if (b > B) throw ConfigError("constant b must not exceed B");
  if (C < 0.0 || L_feat < 0.0 || L_Jac < 0.0) {
    throw ConfigError("constants C, L_feat, L_Jac must be nonnegative");
  }
}

nlohmann::json SmoothnessConstants::to_json() const {
  return {{"b", b}, {"B", B}, {"C", C}, {"L_feat", L_feat}, {"L_Jac", L_Jac}};
}

SmoothnessConstants SmoothnessConstants::from_json(const nlohmann::json& j) {
  SmoothnessConstants c;
  c.b = j.at("b").get<double>();
  c.B = j.at("B").get<double>();
  c.C = j.at("C").get<double>();
  c.L_feat = j.at("L_feat").get<double>();
  c.L_Jac = j.at("L_Jac").get<double>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMap::FeatureMap(Eigen::Index dim_in, Eigen::Index dim_out,
                       SmoothnessConstants constants)
    : dim_in_(dim_in), dim_out_(dim_out), constants_(constants) {
  if (dim_in_ < 1 || dim_out_ < 1) {
    throw ConfigError("feature map dimensions must be positive");
  }
  constants_.validate();
}

void FeatureMap::check_point(const Eigen::VectorXd& z) const {
  if (z.size() != dim_in_) {
    std::ostringstream os;
    os << "point has dimension " << z.size() << ", map expects " << dim_in_;
    throw InputError(os.str());
  }
  if (!finite(z)) throw InputError("point has non-finite coordinates");
}

Eigen::VectorXd FeatureMap::eval(const Eigen::VectorXd& z) const {
  check_point(z);
  return eval_impl(z);
}

Eigen::MatrixXd FeatureMap::jacobian(const Eigen::VectorXd& z) const {
  check_point(z);
  return jacobian_impl(z);
}

Eigen::MatrixXd FeatureMap::hessian(Eigen::Index coord,
                                    const Eigen::VectorXd& z) const {
  check_point(z);
  if (coord < 0 || coord >= dim_out_) {
    std::ostringstream os;
    os << "hessian coordinate " << coord << " out of range [0, " << dim_out_ << ")";
    throw InputError(os.str());
  }
  return hessian_impl(coord, z);
}

Eigen::VectorXd FeatureMap::grad_witness(const Eigen::VectorXd& z,
                                         const Eigen::VectorXd& w) const {
  check_point(z);
  if (w.size() != dim_out_) {
    throw InputError("witness length does not match the feature dimension");
  }
  return grad_witness_impl(z, w);
}

Eigen::VectorXd FeatureMap::grad_witness_impl(const Eigen::VectorXd& z,
                                              const Eigen::VectorXd& w) const {
  return jacobian_impl(z).transpose() * w;
}

// ---------------------------------------------------------------------------
// AffineMap

namespace {

SmoothnessConstants affine_constants(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0)) {
    throw ConfigError("affine map matrix must have positive minimum singular value");
  }
  SmoothnessConstants c;
  c.b = smin * smin;
  c.B = smax * smax;
  c.C = 0.0;
  c.L_feat = smax;
  c.L_Jac = 0.0;
  return c;
}

}  // namespace

AffineMap::AffineMap(Eigen::MatrixXd matrix, Eigen::VectorXd offset)
    : FeatureMap(matrix.cols(), matrix.rows(), affine_constants(matrix)),
      matrix_(std::move(matrix)),
      offset_(std::move(offset)) {
  if (offset_.size() != matrix_.rows()) {
    throw ConfigError("affine map offset length must match the matrix row count");
  }
  if (!matrix_.allFinite() || !offset_.allFinite()) {
    throw ConfigError("affine map parameters must be finite");
  }
}

std::shared_ptr<const AffineMap> AffineMap::identity(Eigen::Index dim) {
  return std::make_shared<AffineMap>(Eigen::MatrixXd::Identity(dim, dim),
                                     Eigen::VectorXd::Zero(dim));
}

Eigen::VectorXd AffineMap::eval_impl(const Eigen::VectorXd& z) const {
  return matrix_ * z + offset_;
}

Eigen::MatrixXd AffineMap::jacobian_impl(const Eigen::VectorXd&) const {
  return matrix_;
}

Eigen::MatrixXd AffineMap::hessian_impl(Eigen::Index, const Eigen::VectorXd&) const {
  return Eigen::MatrixXd::Zero(dim_in(), dim_in());
}

Eigen::VectorXd AffineMap::grad_witness_impl(const Eigen::VectorXd&,
                                             const Eigen::VectorXd& w) const {
  return matrix_.transpose() * w;
}

nlohmann::json AffineMap::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < matrix_.cols(); ++j) row.push_back(matrix_(i, j));
    m.push_back(std::move(row));
  }
  nlohmann::json c = nlohmann::json::array();
  for (Eigen::Index i = 0; i < offset_.size(); ++i) c.push_back(offset_(i));
  return {{"kind", "affine"}, {"matrix", m}, {"offset", c}};
}

// ---------------------------------------------------------------------------
// BoundedSineMap

namespace {

SmoothnessConstants bounded_sine_constants(double alpha,
                                           const Eigen::MatrixXd& W) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(W);
  const double wmax = svd.singularValues()(0);
  double max_row_sq = 0.0;   // max_i |w_i|^2
  double max_entry_row = 0.0;  // max_{i,j} |W_ij| * |w_i|
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    const double row_norm = W.row(i).norm();
    max_row_sq = std::max(max_row_sq, row_norm * row_norm);
    max_entry_row =
        std::max(max_entry_row, W.row(i).cwiseAbs().maxCoeff() * row_norm);
  }
  SmoothnessConstants c;
  c.b = 1.0;  // the identity block keeps sigma_min(J)^2 = lambda_min(I + ...) >= 1
  c.B = 1.0 + alpha * alpha * wmax * wmax;
  c.C = alpha * max_row_sq;
  c.L_feat = std::sqrt(c.B);
  c.L_Jac = alpha * max_entry_row;
  return c;
}

}  // namespace

BoundedSineMap::BoundedSineMap(double alpha, Eigen::MatrixXd weights)
    : FeatureMap(weights.cols(), weights.cols() + weights.rows(),
                 bounded_sine_constants(alpha, weights)),
      alpha_(alpha),
      weights_(std::move(weights)) {
  if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) {
    throw ConfigError("bounded_sine alpha must be finite and nonnegative");
  }
  if (weights_.rows() < 1 || !weights_.allFinite()) {
    throw ConfigError("bounded_sine weights must be a nonempty finite matrix");
  }
}

Eigen::VectorXd BoundedSineMap::eval_impl(const Eigen::VectorXd& z) const {
  Eigen::VectorXd out(dim_out());
  out.head(dim_in()) = z;
  out.tail(weights_.rows()) = alpha_ * (weights_ * z).array().sin().matrix();
  return out;
}

Eigen::MatrixXd BoundedSineMap::jacobian_impl(const Eigen::VectorXd& z) const {
  const Eigen::Index d = dim_in();
  const Eigen::Index k = weights_.rows();
  Eigen::MatrixXd J(d + k, d);
  J.topRows(d) = Eigen::MatrixXd::Identity(d, d);
  const Eigen::ArrayXd cosines = (weights_ * z).array().cos();
  J.bottomRows(k) = alpha_ * (weights_.array().colwise() * cosines).matrix();
  return J;
}

Eigen::MatrixXd BoundedSineMap::hessian_impl(Eigen::Index coord,
                                             const Eigen::VectorXd& z) const {
  const Eigen::Index d = dim_in();
  if (coord < d) return Eigen::MatrixXd::Zero(d, d);
  const Eigen::Index i = coord - d;
  const Eigen::VectorXd w = weights_.row(i);
  const double s = std::sin(w.dot(z));
  // Materialize the outer product before scaling; scaling a factor instead
  // would break bit-exact symmetry.
  const Eigen::MatrixXd outer = w * w.transpose();
  return (-alpha_ * s) * outer;
}

Eigen::VectorXd BoundedSineMap::grad_witness_impl(const Eigen::VectorXd& z,
                                                  const Eigen::VectorXd& w) const {
  const Eigen::Index d = dim_in();
  const Eigen::Index k = weights_.rows();
  const Eigen::ArrayXd cosines = (weights_ * z).array().cos();
  return w.head(d) +
         alpha_ * (weights_.transpose() * (cosines * w.tail(k).array()).matrix());
}

nlohmann::json BoundedSineMap::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < weights_.cols(); ++j) row.push_back(weights_(i, j));
    m.push_back(std::move(row));
  }
  return {{"kind", "bounded_sine"}, {"alpha", alpha_}, {"weights", m}};
}

// ---------------------------------------------------------------------------
// Certification

nlohmann::json CertificationReport::to_json() const {
  return {{"worst_sigma_min_sq", worst_sigma_min_sq},
          {"worst_sigma_max_sq", worst_sigma_max_sq},
          {"worst_hessian_eig", worst_hessian_eig},
          {"worst_feat_quotient", worst_feat_quotient},
          {"worst_jac_quotient", worst_jac_quotient},
          {"samples", samples},
          {"pass", pass},
          {"violations", violations}};
}

CertificationReport certify_constants(const FeatureMap& map, long sample_budget,
                                      std::uint64_t rng_seed) {
  if (sample_budget < 1) throw InputError("sample budget must be at least 1");

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index d = map.dim_in();

  CertificationReport rep;
  rep.samples = sample_budget;
  rep.worst_sigma_min_sq = std::numeric_limits<double>::infinity();

  auto draw_point = [&](double scale) {
    Eigen::VectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j) z(j) = scale * normal(rng);
    return z;
  };

  for (long s = 0; s < sample_budget; ++s) {
    // Point scales log-uniform in [0.3, 8] so both local and far-field
    // behavior is probed.
    const double scale = std::exp(std::lerp(std::log(0.3), std::log(8.0), unit(rng)));
    const Eigen::VectorXd z = draw_point(scale);

    const Eigen::MatrixXd J = map.jacobian(z);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& sv = svd.singularValues();
    const double smin2 = sv(sv.size() - 1) * sv(sv.size() - 1);
    const double smax2 = sv(0) * sv(0);
    rep.worst_sigma_min_sq = std::min(rep.worst_sigma_min_sq, smin2);
    rep.worst_sigma_max_sq = std::max(rep.worst_sigma_max_sq, smax2);

    for (Eigen::Index i = 0; i < map.dim_out(); ++i) {
      const Eigen::MatrixXd H = map.hessian(i, z);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
      const double m = eig.eigenvalues().cwiseAbs().maxCoeff();
      rep.worst_hessian_eig = std::max(rep.worst_hessian_eig, m);
    }

    // Difference quotients for the Lipschitz declarations, at a mix of
    // step sizes.
    Eigen::VectorXd u(d);
    for (Eigen::Index j = 0; j < d; ++j) u(j) = normal(rng);
    const double un = u.norm();
    if (un > 0.0) {
      u /= un;
      const double rho = std::exp(std::lerp(std::log(1e-4), std::log(2.0), unit(rng)));
      const Eigen::VectorXd y = z + rho * u;
      const double dist = (y - z).norm();
      if (dist > 0.0) {
        const double fq = (map.eval(y) - map.eval(z)).norm() / dist;
        rep.worst_feat_quotient = std::max(rep.worst_feat_quotient, fq);
        const double jq =
            ((map.jacobian(y) - J).cwiseAbs().maxCoeff()) / dist;
        rep.worst_jac_quotient = std::max(rep.worst_jac_quotient, jq);
      }
    }
  }

  const SmoothnessConstants& c = map.constants();
  auto tol = [](double declared) { return 1e-9 * std::max(1.0, std::abs(declared)); };
  auto violate = [&rep](const std::string& msg) { rep.violations.push_back(msg); };

  if (rep.worst_sigma_min_sq < c.b - tol(c.b)) {
    violate("observed sigma_min^2 " + std::to_string(rep.worst_sigma_min_sq) +
            " below declared b " + std::to_string(c.b));
  }
  if (rep.worst_sigma_max_sq > c.B + tol(c.B)) {
    violate("observed sigma_max^2 " + std::to_string(rep.worst_sigma_max_sq) +
            " above declared B " + std::to_string(c.B));
  }
  if (rep.worst_hessian_eig > c.C + tol(c.C)) {
    violate("observed Hessian eigenvalue " + std::to_string(rep.worst_hessian_eig) +
            " above declared C " + std::to_string(c.C));
  }
  if (rep.worst_feat_quotient > c.L_feat + tol(c.L_feat)) {
    violate("observed map quotient " + std::to_string(rep.worst_feat_quotient) +
            " above declared L_feat " + std::to_string(c.L_feat));
  }
  if (rep.worst_jac_quotient > c.L_Jac + tol(c.L_Jac)) {
    violate("observed Jacobian entry quotient " +
            std::to_string(rep.worst_jac_quotient) + " above declared L_Jac " +
            std::to_string(c.L_Jac));
  }
  rep.pass = rep.violations.empty();
  return rep;
}

}  // namespace mmdflow
