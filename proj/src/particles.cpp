#include "mmdflow/particles.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "mmdflow/errors.hpp"
#include "mmdflow/numeric.hpp"

namespace mmdflow {

ParticleCloud::ParticleCloud(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.rows() < 1 || points_.cols() < 1) {
    throw InputError("particle cloud must contain at least one particle");
  }
  if (!points_.allFinite()) {
    throw InputError("particle cloud has non-finite coordinates");
  }
}

Eigen::Index distribution_dim(const DistributionSpec& spec) {
  struct Visitor {
    Eigen::Index operator()(const GaussianSpec& g) const { return g.mean.size(); }
    Eigen::Index operator()(const GaussianMixtureSpec& g) const {
      return g.components.empty() ? 0 : g.components.front().mean.size();
    }
    Eigen::Index operator()(const UniformBoxSpec& b) const { return b.lo.size(); }
    Eigen::Index operator()(const PointMassSpec& p) const { return p.x.size(); }
    Eigen::Index operator()(const RingSpec&) const { return 2; }
    Eigen::Index operator()(const CloudSpec& c) const { return c.points.cols(); }
  };
  return std::visit(Visitor{}, spec);
}

namespace {

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) {
    throw ConfigError("covariance matrix must be square");
  }
  if (!cov.allFinite()) throw ConfigError("covariance matrix must be finite");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw ConfigError("covariance matrix must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("covariance matrix is not positive definite");
  }
  return llt.matrixL();
}

void validate_mixture(const GaussianMixtureSpec& mix) {
  if (mix.components.empty()) {
    throw ConfigError("gaussian mixture needs at least one component");
  }
  if (mix.weights.size() != mix.components.size()) {
    throw ConfigError("gaussian mixture weights/components size mismatch");
  }
  double sum = 0.0;
  for (double w : mix.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("mixture weights must be nonnegative and finite");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("mixture weights must sum to 1 within 1e-9");
  }
  const Eigen::Index d = mix.components.front().mean.size();
  for (const auto& c : mix.components) {
    if (c.mean.size() != d) {
      throw ConfigError("mixture components must share one dimension");
    }
  }
}

}  // namespace

ParticleCloud sample_distribution(const DistributionSpec& spec, Eigen::Index n,
                                  std::uint64_t seed) {
  if (n < 1) throw InputError("particle count must be at least 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Visitor {
    Eigen::Index n;
    std::mt19937_64& rng;
    std::normal_distribution<double>& normal;
    std::uniform_real_distribution<double>& unit;

    Eigen::MatrixXd operator()(const GaussianSpec& g) {
      const Eigen::Index d = g.mean.size();
      if (d < 1) throw ConfigError("gaussian mean must be nonempty");
      if (g.covariance.rows() != d) {
        throw ConfigError("gaussian covariance does not match the mean dimension");
      }
      const Eigen::MatrixXd L = cholesky_factor(g.covariance);
      Eigen::MatrixXd out(n, d);
      Eigen::VectorXd z(d);
      for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
        out.row(k) = (g.mean + L * z).transpose();
      }
      return out;
    }

    Eigen::MatrixXd operator()(const GaussianMixtureSpec& mix) {
      validate_mixture(mix);
      const Eigen::Index d = mix.components.front().mean.size();
      std::vector<Eigen::MatrixXd> factors;
      factors.reserve(mix.components.size());
      for (const auto& c : mix.components) {
        if (c.covariance.rows() != d) {
          throw ConfigError("mixture covariance does not match the mean dimension");
        }
        factors.push_back(cholesky_factor(c.covariance));
      }
      Eigen::MatrixXd out(n, d);
      Eigen::VectorXd z(d);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double u = unit(rng);
        std::size_t pick = mix.components.size() - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < mix.weights.size(); ++i) {
          acc += mix.weights[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
        for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
        out.row(k) = (mix.components[pick].mean + factors[pick] * z).transpose();
      }
      return out;
    }

    Eigen::MatrixXd operator()(const UniformBoxSpec& box) {
      const Eigen::Index d = box.lo.size();
      if (d < 1 || box.hi.size() != d) {
        throw ConfigError("uniform_box lo/hi must be nonempty and equal length");
      }
      for (Eigen::Index j = 0; j < d; ++j) {
        if (!(box.lo(j) <= box.hi(j))) {
          throw ConfigError("uniform_box requires lo <= hi per coordinate");
        }
      }
      Eigen::MatrixXd out(n, d);
      for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index j = 0; j < d; ++j) {
          out(k, j) = box.lo(j) + (box.hi(j) - box.lo(j)) * unit(rng);
        }
      }
      return out;
    }

    Eigen::MatrixXd operator()(const PointMassSpec& pm) {
      if (pm.x.size() < 1) throw ConfigError("point_mass location must be nonempty");
      if (!pm.x.allFinite()) throw ConfigError("point_mass location must be finite");
      Eigen::MatrixXd out(n, pm.x.size());
      out.rowwise() = pm.x.transpose();
      return out;
    }

    Eigen::MatrixXd operator()(const RingSpec& ring) {
      if (!(ring.radius > 0.0)) throw ConfigError("ring radius must be positive");
      if (ring.noise < 0.0) throw ConfigError("ring noise must be nonnegative");
      Eigen::MatrixXd out(n, 2);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        const double r = ring.radius + ring.noise * normal(rng);
        out(k, 0) = r * std::cos(theta);
        out(k, 1) = r * std::sin(theta);
      }
      return out;
    }

    Eigen::MatrixXd operator()(const CloudSpec& cloud) {
      const Eigen::Index rows = cloud.points.rows();
      if (rows < 1 || cloud.points.cols() < 1 || !cloud.points.allFinite()) {
        throw ConfigError("cloud points must be a nonempty finite matrix");
      }
      if (n == rows) return cloud.points;
      Eigen::MatrixXd out(n, cloud.points.cols());
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto pick = static_cast<Eigen::Index>(
            std::min<double>(unit(rng) * static_cast<double>(rows),
                             static_cast<double>(rows - 1)));
        out.row(k) = cloud.points.row(pick);
      }
      return out;
    }
  };

  return ParticleCloud(std::visit(Visitor{n, rng, normal, unit}, spec));
}

void save_cloud_csv(const std::filesystem::path& path, const ParticleCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  const auto& pts = cloud.points();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(pts(i, j));
    }
    out << '\n';
  }
}

ParticleCloud load_cloud_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("ragged rows in '" + path.string() + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("no particles in '" + path.string() + "'");
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      pts(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return ParticleCloud(std::move(pts));
}

}  // namespace mmdflow
