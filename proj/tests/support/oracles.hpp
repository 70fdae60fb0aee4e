// Independent oracles the tests check library results against. Everything
// here recomputes from first principles (kernel double sums, central finite
// differences, closed forms) and must not reuse the code paths under test.
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mmdflow/feature_map.hpp"
#include "mmdflow/particles.hpp"

namespace oracles {

inline constexpr double kFdStep = 1e-5;  // central differences at double precision

/// Squared MMD via the kernel double sum with K(x, z) = phi(x) . phi(z):
///   (1/n^2) sum K(z_i, z_j) + (1/m^2) sum K(x_i, x_j) - (2/nm) sum K(z_i, x_j).
inline double mmd_squared_kernel_sum(const mmdflow::ParticleCloud& q,
                                     const mmdflow::ParticleCloud& p,
                                     const mmdflow::FeatureMap& map) {
  const Eigen::Index n = q.count();
  const Eigen::Index m = p.count();
  Eigen::MatrixXd fq(n, map.dim_out());
  for (Eigen::Index i = 0; i < n; ++i) fq.row(i) = map.eval(q.point(i)).transpose();
  Eigen::MatrixXd fp(m, map.dim_out());
  for (Eigen::Index i = 0; i < m; ++i) fp.row(i) = map.eval(p.point(i)).transpose();

  double qq = 0.0, pp = 0.0, qp = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) qq += fq.row(i).dot(fq.row(j));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) pp += fp.row(i).dot(fp.row(j));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) qp += fq.row(i).dot(fp.row(j));

  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return qq / (dn * dn) + pp / (dm * dm) - 2.0 * qp / (dn * dm);
}

/// Central-difference Jacobian of the map at z.
inline Eigen::MatrixXd fd_jacobian(const mmdflow::FeatureMap& map,
                                   const Eigen::VectorXd& z, double h = kFdStep) {
  Eigen::MatrixXd J(map.dim_out(), map.dim_in());
  for (Eigen::Index j = 0; j < map.dim_in(); ++j) {
    Eigen::VectorXd zp = z, zm = z;
    zp(j) += h;
    zm(j) -= h;
    J.col(j) = (map.eval(zp) - map.eval(zm)) / (2.0 * h);
  }
  return J;
}

/// Central-difference Hessian of output coordinate `coord`, via differences
/// of the analytic Jacobian row.
inline Eigen::MatrixXd fd_hessian(const mmdflow::FeatureMap& map,
                                  Eigen::Index coord, const Eigen::VectorXd& z,
                                  double h = kFdStep) {
  Eigen::MatrixXd H(map.dim_in(), map.dim_in());
  for (Eigen::Index j = 0; j < map.dim_in(); ++j) {
    Eigen::VectorXd zp = z, zm = z;
    zp(j) += h;
    zm(j) -= h;
    H.col(j) =
        (map.jacobian(zp).row(coord) - map.jacobian(zm).row(coord)).transpose() /
        (2.0 * h);
  }
  return H;
}

/// Central-difference gradient of g(z) = w . phi(z).
inline Eigen::VectorXd fd_grad_witness(const mmdflow::FeatureMap& map,
                                       const Eigen::VectorXd& z,
                                       const Eigen::VectorXd& w,
                                       double h = kFdStep) {
  Eigen::VectorXd grad(map.dim_in());
  for (Eigen::Index j = 0; j < map.dim_in(); ++j) {
    Eigen::VectorXd zp = z, zm = z;
    zp(j) += h;
    zm(j) -= h;
    grad(j) = (w.dot(map.eval(zp)) - w.dot(map.eval(zm))) / (2.0 * h);
  }
  return grad;
}

/// Hand-derived improvement for an affine map phi(z) = A z + c: the witness
/// shrinks to w - eps * M w with M = A A^T, so
///   delta = 2 eps w.Mw - eps^2 |Mw|^2.
inline double affine_improvement_closed_form(const Eigen::MatrixXd& A,
                                             const Eigen::VectorXd& w,
                                             double eps) {
  const Eigen::MatrixXd M = A * A.transpose();
  return 2.0 * eps * w.dot(M * w) - eps * eps * (M * w).squaredNorm();
}

}  // namespace oracles
