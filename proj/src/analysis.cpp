#include "mmdflow/analysis.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mmdflow/errors.hpp"

namespace mmdflow {

namespace {

constexpr double kBaseTolerance = 1e-9;

void check_pair(const ParticleCloud& q, const ParticleCloud& p,
                const FeatureMap& map) {
  if (q.dim() != map.dim_in() || p.dim() != map.dim_in()) {
    throw InputError("cloud dimensions do not match the feature map");
  }
}

ParticleCloud push_cloud(const ParticleCloud& cloud, const ResidualBlock& block) {
  Eigen::MatrixXd out = cloud.points();
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    out.row(k) = block.forward(out.row(k).transpose()).transpose();
  }
  return ParticleCloud(std::move(out));
}

void require_matching_witness(const ParticleCloud& q, const ParticleCloud& p,
                              const ResidualBlock& block) {
  const Eigen::VectorXd w = witness_vector(p, q, block.map());
  const double diff = (w - block.witness()).norm();
  if (diff > 1e-9 * std::max(1.0, w.norm())) {
    throw InputError("block witness does not match witness_vector(p, q)");
  }
}

/// Per-particle values of |jacobian(z)^T w|^2 over the cloud.
Eigen::VectorXd grad_witness_sq(const ParticleCloud& cloud, const FeatureMap& map,
                                const Eigen::VectorXd& w) {
  Eigen::VectorXd values(cloud.count());
  for (Eigen::Index k = 0; k < cloud.count(); ++k) {
    values(k) = map.grad_witness(cloud.point(k), w).squaredNorm();
  }
  return values;
}

double standard_error_of_mean(const Eigen::VectorXd& values) {
  const Eigen::Index n = values.size();
  if (n < 2) return 0.0;
  const double mean = values.mean();
  const double var =
      (values.array() - mean).square().sum() / static_cast<double>(n - 1);
  return std::sqrt(var / static_cast<double>(n));
}

/// Delta-method standard error of the exact improvement: influence of each
/// q particle through both its pre- and post-push features, plus the
/// influence of each p particle.
double improvement_se(const ParticleCloud& q, const ParticleCloud& p,
                      const ResidualBlock& block) {
  const FeatureMap& map = block.map();
  const Eigen::Index nq = q.count();
  const Eigen::Index np = p.count();

  Eigen::MatrixXd before(nq, map.dim_out());
  Eigen::MatrixXd after(nq, map.dim_out());
  for (Eigen::Index k = 0; k < nq; ++k) {
    const Eigen::VectorXd z = q.point(k);
    before.row(k) = map.eval(z).transpose();
    after.row(k) = map.eval(block.forward(z)).transpose();
  }
  const Eigen::VectorXd target_mean = feature_mean(p, map);
  const Eigen::VectorXd u = before.colwise().mean().transpose() - target_mean;
  const Eigen::VectorXd v = after.colwise().mean().transpose() - target_mean;

  Eigen::VectorXd infl_q(nq);
  for (Eigen::Index k = 0; k < nq; ++k) {
    infl_q(k) = 2.0 * u.dot(before.row(k)) - 2.0 * v.dot(after.row(k));
  }
  Eigen::VectorXd infl_p(np);
  const Eigen::VectorXd vu = 2.0 * (v - u);
  for (Eigen::Index k = 0; k < np; ++k) {
    infl_p(k) = vu.dot(map.eval(p.point(k)));
  }
  const double se_q = standard_error_of_mean(infl_q);
  const double se_p = standard_error_of_mean(infl_p);
  return std::sqrt(se_q * se_q + se_p * se_p);
}

}  // namespace

double mmd_squared_se(const ParticleCloud& q, const ParticleCloud& p,
                      const FeatureMap& map) {
  check_pair(q, p, map);
  const Eigen::VectorXd w = witness_vector(p, q, map);
  Eigen::VectorXd proj_q(q.count());
  for (Eigen::Index k = 0; k < q.count(); ++k) {
    proj_q(k) = 2.0 * w.dot(map.eval(q.point(k)));
  }
  Eigen::VectorXd proj_p(p.count());
  for (Eigen::Index k = 0; k < p.count(); ++k) {
    proj_p(k) = 2.0 * w.dot(map.eval(p.point(k)));
  }
  const double se_q = standard_error_of_mean(proj_q);
  const double se_p = standard_error_of_mean(proj_p);
  return std::sqrt(se_q * se_q + se_p * se_p);
}

double improvement(const ParticleCloud& q, const ParticleCloud& p,
                   const ResidualBlock& block) {
  check_pair(q, p, block.map());
  const double before = mmd_squared(q, p, block.map());
  const double after = mmd_squared(push_cloud(q, block), p, block.map());
  return before - after;
}

double improvement_first_order(const ParticleCloud& q, const ParticleCloud& p,
                               const ResidualBlock& block) {
  check_pair(q, p, block.map());
  require_matching_witness(q, p, block);
  return 2.0 * block.epsilon() *
         grad_witness_sq(q, block.map(), block.witness()).mean();
}

DeltaDecomposition decompose_improvement(const ParticleCloud& q,
                                         const ParticleCloud& p,
                                         const ResidualBlock& block) {
  check_pair(q, p, block.map());
  require_matching_witness(q, p, block);
  DeltaDecomposition d;
  d.epsilon = block.epsilon();
  d.mmd_sq_before = mmd_squared(q, p, block.map());
  d.delta = improvement(q, p, block);
  d.delta1 = 2.0 * block.epsilon() *
             grad_witness_sq(q, block.map(), block.witness()).mean();
  d.delta2 = d.delta - d.delta1;
  return d;
}

nlohmann::json BoundCheck::to_json() const {
  return {{"name", name},       {"lhs", lhs},
          {"rhs", rhs},         {"slack", slack},
          {"tolerance", tolerance}, {"satisfied", satisfied},
          {"seed", seed},       {"params", params}};
}

BoundCheck check_first_order_bound(const ParticleCloud& q,
                                   const ParticleCloud& p,
                                   std::shared_ptr<const FeatureMap> map,
                                   double epsilon) {
  check_pair(q, p, *map);
  const Eigen::VectorXd w = witness_vector(p, q, *map);
  const double mmd_sq = w.squaredNorm();
  if (!(mmd_sq > 0.0)) throw InputError("witness norm must be positive");

  const Eigen::VectorXd h = grad_witness_sq(q, *map, w);
  const double b = map->constants().b;

  BoundCheck check;
  check.name = "first_order_lower_bound";
  check.lhs = 2.0 * epsilon * h.mean();
  check.rhs = 2.0 * epsilon * b * mmd_sq;
  check.slack = check.lhs - check.rhs;
  const double se = 2.0 * epsilon * standard_error_of_mean(h) +
                    2.0 * epsilon * b * mmd_squared_se(q, p, *map);
  check.tolerance = kBaseTolerance + 3.0 * se;
  check.satisfied = check.slack >= -check.tolerance;
  check.params = {{"epsilon", epsilon}, {"mmd_sq", mmd_sq}, {"b", b},
                  {"n_q", q.count()},   {"n_p", p.count()}};
  return check;
}

BoundCheck check_lipschitz_bound(const ResidualBlock& block, long pair_samples,
                                 std::uint64_t seed) {
  if (pair_samples < 1) throw InputError("pair_samples must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index d = block.map().dim_in();

  double worst = 0.0;
  for (long s = 0; s < pair_samples; ++s) {
    const double scale = std::exp(std::lerp(std::log(0.25), std::log(4.0), unit(rng)));
    Eigen::VectorXd x(d);
    for (Eigen::Index j = 0; j < d; ++j) x(j) = scale * normal(rng);
    Eigen::VectorXd u(d);
    for (Eigen::Index j = 0; j < d; ++j) u(j) = normal(rng);
    const double un = u.norm();
    if (un == 0.0) continue;
    const double rho = std::exp(std::lerp(std::log(1e-4), std::log(2.0), unit(rng)));
    const Eigen::VectorXd y = x + (rho / un) * u;
    const double dist = (y - x).norm();
    if (dist == 0.0) continue;
    worst = std::max(
        worst, (block.displacement(y) - block.displacement(x)).norm() / dist);
  }

  BoundCheck check;
  check.name = "lipschitz_upper_bound";
  check.seed = seed;
  check.lhs = worst;
  check.rhs = block.lipschitz_bound();
  check.slack = check.rhs - check.lhs;
  // The sampled maximum always sits below the true Lipschitz constant, so
  // only round-off needs slack here.
  check.tolerance = kBaseTolerance * std::max(1.0, check.rhs);
  check.satisfied = check.slack >= -check.tolerance;
  check.params = {{"epsilon", block.epsilon()},
                  {"pair_samples", pair_samples},
                  {"witness_norm", block.witness().norm()}};
  return check;
}

BoundCheck check_remainder_bound(const ParticleCloud& q, const ParticleCloud& p,
                                 std::shared_ptr<const FeatureMap> map,
                                 double epsilon) {
  check_pair(q, p, *map);
  const Eigen::VectorXd w = witness_vector(p, q, *map);
  const double mmd_sq = w.squaredNorm();
  const double wn = w.norm();
  const ResidualBlock block(map, epsilon, w);
  const DeltaDecomposition dec = decompose_improvement(q, p, block);

  const auto& c = map->constants();
  const double sqrt_dphi = std::sqrt(static_cast<double>(map->dim_out()));

  BoundCheck check;
  check.name = "remainder_upper_bound";
  check.lhs = std::abs(dec.delta2);
  check.rhs = epsilon * epsilon * mmd_sq * c.B *
              (c.B + wn * sqrt_dphi * c.C *
                         (1.0 + epsilon * c.L_feat * std::sqrt(c.B)));
  check.slack = check.rhs - check.lhs;
  const Eigen::VectorXd h = grad_witness_sq(q, *map, w);
  double se = improvement_se(q, p, block) +
              2.0 * epsilon * standard_error_of_mean(h);
  if (mmd_sq > 0.0) {
    se += 2.0 * check.rhs * mmd_squared_se(q, p, *map) / mmd_sq;
  }
  check.tolerance = kBaseTolerance + 3.0 * se;
  check.satisfied = check.slack >= -check.tolerance;
  check.params = {{"epsilon", epsilon}, {"mmd_sq", mmd_sq},
                  {"n_q", q.count()},   {"n_p", p.count()}};
  return check;
}

nlohmann::json TaylorFit::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [eps, d2] : table) {
    pts.push_back({{"epsilon", eps}, {"delta2", d2}});
  }
  return {{"slope", slope},
          {"intercept", intercept},
          {"points_used", points_used},
          {"points", pts}};
}

TaylorFit fit_remainder_order(const ParticleCloud& q, const ParticleCloud& p,
                              std::shared_ptr<const FeatureMap> map,
                              std::span<const double> eps_grid) {
  check_pair(q, p, *map);
  if (eps_grid.size() < 4) {
    throw InputError("remainder-order fit needs at least 4 grid points");
  }
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0)) throw InputError("grid points must be positive");
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) {
      throw InputError("grid points must be strictly decreasing");
    }
  }
  if (eps_grid.front() / eps_grid.back() < 100.0 * (1.0 - 1e-9)) {
    throw InputError("grid must span at least two decades");
  }

  const Eigen::VectorXd w = witness_vector(p, q, *map);
  const double mmd_sq = w.squaredNorm();
  const double mean_h = grad_witness_sq(q, *map, w).mean();
  const double floor = 1e3 * std::numeric_limits<double>::epsilon() * mmd_sq;

  TaylorFit fit;
  std::vector<double> xs, ys;
  for (double eps : eps_grid) {
    const ResidualBlock block(map, eps, w);
    const double delta = improvement(q, p, block);
    const double delta2 = delta - 2.0 * eps * mean_h;
    fit.table.emplace_back(eps, delta2);
    if (std::abs(delta2) <= floor) continue;  // round-off scale, useless for the fit
    xs.push_back(std::log(eps));
    ys.push_back(std::log(std::abs(delta2)));
  }
  if (xs.size() < 3) {
    throw NumericError("fewer than 3 grid points survive the round-off filter");
  }

  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.points_used = static_cast<int>(xs.size());
  return fit;
}

}  // namespace mmdflow
