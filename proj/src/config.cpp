#include "mmdflow/config.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "mmdflow/errors.hpp"
#include "mmdflow/numeric.hpp"

namespace mmdflow {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
  throw ConfigError(ctx + ": " + msg);
}

void require_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) fail(ctx, "expected a JSON object");
}

/// Rejects unknown keys so config typos fail loudly.
void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  require_object(j, ctx);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.contains(key)) fail(ctx, "unknown key '" + key + "'");
  }
}

const json& require_key(const json& j, const std::string& ctx, const char* key) {
  if (!j.contains(key)) fail(ctx, "missing key '" + std::string(key) + "'");
  return j.at(key);
}

double get_number(const json& j, const std::string& ctx, const char* key) {
  const json& v = require_key(j, ctx, key);
  if (!v.is_number()) fail(ctx, "'" + std::string(key) + "' must be a number");
  return v.get<double>();
}

double get_number_or(const json& j, const std::string& ctx, const char* key,
                     double fallback) {
  if (!j.contains(key)) return fallback;
  return get_number(j, ctx, key);
}

long get_integer(const json& j, const std::string& ctx, const char* key) {
  const json& v = require_key(j, ctx, key);
  if (!v.is_number_integer()) fail(ctx, "'" + std::string(key) + "' must be an integer");
  return v.get<long>();
}

long get_integer_or(const json& j, const std::string& ctx, const char* key,
                    long fallback) {
  if (!j.contains(key)) return fallback;
  return get_integer(j, ctx, key);
}

std::string get_string(const json& j, const std::string& ctx, const char* key) {
  const json& v = require_key(j, ctx, key);
  if (!v.is_string()) fail(ctx, "'" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

Eigen::VectorXd get_vector(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty()) fail(ctx, "expected a nonempty array of numbers");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(ctx, "expected numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

Eigen::MatrixXd get_matrix(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty()) fail(ctx, "expected a nonempty array of rows");
  const std::size_t rows = v.size();
  if (!v[0].is_array() || v[0].empty()) fail(ctx, "rows must be nonempty arrays");
  const std::size_t cols = v[0].size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].size() != cols) fail(ctx, "ragged matrix rows");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!v[i][j].is_number()) fail(ctx, "expected numbers");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          v[i][j].get<double>();
    }
  }
  return out;
}

GaussianSpec parse_gaussian(const json& j, const std::string& ctx) {
  GaussianSpec g;
  g.mean = get_vector(require_key(j, ctx, "mean"), ctx + ".mean");
  g.covariance = get_matrix(require_key(j, ctx, "covariance"), ctx + ".covariance");
  return g;
}

/// Maps constructed with constants overridden by the config. The override is
/// a plain declaration; certification decides whether it stands.
class OverriddenMap : public FeatureMap {
 public:
  OverriddenMap(std::shared_ptr<const FeatureMap> inner, SmoothnessConstants c)
      : FeatureMap(inner->dim_in(), inner->dim_out(), c), inner_(std::move(inner)) {}

  nlohmann::json to_json() const override {
    nlohmann::json j = inner_->to_json();
    j["constants"] = constants().to_json();
    return j;
  }

 protected:
  Eigen::VectorXd eval_impl(const Eigen::VectorXd& z) const override {
    return inner_->eval(z);
  }
  Eigen::MatrixXd jacobian_impl(const Eigen::VectorXd& z) const override {
    return inner_->jacobian(z);
  }
  Eigen::MatrixXd hessian_impl(Eigen::Index coord,
                               const Eigen::VectorXd& z) const override {
    return inner_->hessian(coord, z);
  }
  Eigen::VectorXd grad_witness_impl(const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& w) const override {
    return inner_->grad_witness(z, w);
  }

 private:
  std::shared_ptr<const FeatureMap> inner_;
};

}  // namespace

std::shared_ptr<const FeatureMap> make_feature_map(const json& spec) {
  const std::string ctx = "map";
  require_object(spec, ctx);
  const std::string kind = get_string(spec, ctx, "kind");

  std::shared_ptr<const FeatureMap> map;
  if (kind == "affine") {
    check_keys(spec, ctx, {"kind", "dim", "matrix", "offset", "gen_seed", "constants"});
    Eigen::MatrixXd A;
    if (spec.contains("matrix")) {
      A = get_matrix(spec.at("matrix"), ctx + ".matrix");
    } else if (spec.contains("gen_seed")) {
      // Well-conditioned random square matrix: identity plus a small
      // perturbation, so sigma_min stays comfortably positive.
      const long dim = get_integer(spec, ctx, "dim");
      if (dim < 1) fail(ctx, "'dim' must be positive");
      const auto seed = static_cast<std::uint64_t>(get_integer(spec, ctx, "gen_seed"));
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> unit(-0.15, 0.15);
      A = Eigen::MatrixXd::Identity(dim, dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) A(i, j) += unit(rng);
      }
    } else {
      const long dim = get_integer(spec, ctx, "dim");
      if (dim < 1) fail(ctx, "'dim' must be positive");
      A = Eigen::MatrixXd::Identity(dim, dim);
    }
    Eigen::VectorXd c = Eigen::VectorXd::Zero(A.rows());
    if (spec.contains("offset")) c = get_vector(spec.at("offset"), ctx + ".offset");
    map = std::make_shared<AffineMap>(std::move(A), std::move(c));
  } else if (kind == "bounded_sine") {
    check_keys(spec, ctx,
               {"kind", "alpha", "weights", "dim", "num_features", "gen_seed",
                "constants"});
    const double alpha = get_number(spec, ctx, "alpha");
    Eigen::MatrixXd W;
    if (spec.contains("weights")) {
      W = get_matrix(spec.at("weights"), ctx + ".weights");
    } else {
      const long dim = get_integer(spec, ctx, "dim");
      const long k = get_integer(spec, ctx, "num_features");
      const auto seed = static_cast<std::uint64_t>(get_integer(spec, ctx, "gen_seed"));
      if (dim < 1 || k < 1) fail(ctx, "'dim' and 'num_features' must be positive");
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> unit(-0.9, 0.9);
      W.resize(k, dim);
      for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = unit(rng);
      }
    }
    map = std::make_shared<BoundedSineMap>(alpha, std::move(W));
  } else {
    fail(ctx, "unknown map kind '" + kind + "'");
  }

  if (spec.contains("constants")) {
    const json& cj = spec.at("constants");
    check_keys(cj, ctx + ".constants", {"b", "B", "C", "L_feat", "L_Jac"});
    SmoothnessConstants c;
    try {
      c = SmoothnessConstants::from_json(cj);
    } catch (const json::exception& e) {
      fail(ctx + ".constants", e.what());
    }
    map = std::make_shared<OverriddenMap>(std::move(map), c);
  }
  return map;
}

DistributionSpec parse_distribution(const json& spec) {
  const std::string ctx = "distribution";
  require_object(spec, ctx);
  const std::string kind = get_string(spec, ctx, "kind");

  if (kind == "gaussian") {
    check_keys(spec, ctx, {"kind", "mean", "covariance"});
    return parse_gaussian(spec, ctx);
  }
  if (kind == "gaussian_mixture") {
    check_keys(spec, ctx, {"kind", "components"});
    const json& comps = require_key(spec, ctx, "components");
    if (!comps.is_array() || comps.empty()) fail(ctx, "'components' must be a nonempty array");
    GaussianMixtureSpec mix;
    for (const auto& cj : comps) {
      check_keys(cj, ctx + ".component", {"mean", "covariance", "weight"});
      mix.components.push_back(parse_gaussian(cj, ctx + ".component"));
      mix.weights.push_back(get_number(cj, ctx + ".component", "weight"));
    }
    return mix;
  }
  if (kind == "uniform_box") {
    check_keys(spec, ctx, {"kind", "lo", "hi"});
    UniformBoxSpec box;
    box.lo = get_vector(require_key(spec, ctx, "lo"), ctx + ".lo");
    box.hi = get_vector(require_key(spec, ctx, "hi"), ctx + ".hi");
    return box;
  }
  if (kind == "point_mass") {
    check_keys(spec, ctx, {"kind", "x"});
    PointMassSpec pm;
    pm.x = get_vector(require_key(spec, ctx, "x"), ctx + ".x");
    return pm;
  }
  if (kind == "ring") {
    check_keys(spec, ctx, {"kind", "radius", "noise"});
    RingSpec ring;
    ring.radius = get_number(spec, ctx, "radius");
    ring.noise = get_number_or(spec, ctx, "noise", 0.0);
    return ring;
  }
  if (kind == "cloud") {
    check_keys(spec, ctx, {"kind", "points"});
    CloudSpec cloud;
    cloud.points = get_matrix(require_key(spec, ctx, "points"), ctx + ".points");
    return cloud;
  }
  fail(ctx, "unknown distribution kind '" + kind + "'");
}

ExperimentConfig parse_config(const json& doc) {
  const std::string ctx = "config";
  check_keys(doc, ctx,
             {"map", "source", "target", "n_particles", "seed", "schedule",
              "delta", "safety_c", "safety_c_max", "stop_tol",
              "contraction_slack", "certify_samples", "verify", "out_dir"});

  ExperimentConfig cfg;
  cfg.map_spec = require_key(doc, ctx, "map");
  cfg.map = make_feature_map(cfg.map_spec);
  cfg.source = parse_distribution(require_key(doc, ctx, "source"));
  cfg.target = parse_distribution(require_key(doc, ctx, "target"));

  if (distribution_dim(cfg.source) != cfg.map->dim_in() ||
      distribution_dim(cfg.target) != cfg.map->dim_in()) {
    fail(ctx, "source/target dimension does not match the map");
  }

  cfg.n_particles = get_integer(doc, ctx, "n_particles");
  if (cfg.n_particles < 1) fail(ctx, "'n_particles' must be positive");
  cfg.seed = static_cast<std::uint64_t>(get_integer(doc, ctx, "seed"));

  const std::string sched = get_string(doc, ctx, "schedule");
  if (sched == "first_order") {
    cfg.schedule = ScheduleKind::FirstOrder;
  } else if (sched == "second_order") {
    cfg.schedule = ScheduleKind::SecondOrder;
  } else {
    fail(ctx, "'schedule' must be 'first_order' or 'second_order'");
  }

  cfg.delta = get_number(doc, ctx, "delta");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    fail(ctx, "'delta' must lie in (0, 1)");
  }
  cfg.safety_c = get_number_or(doc, ctx, "safety_c", 1.0);
  cfg.safety_c_max = get_number_or(doc, ctx, "safety_c_max", 1024.0);
  if (!(cfg.safety_c > 0.0) || !(cfg.safety_c_max >= cfg.safety_c)) {
    fail(ctx, "require 0 < safety_c <= safety_c_max");
  }
  cfg.stop_tol = get_number_or(doc, ctx, "stop_tol", 1e-12);
  if (cfg.stop_tol < 0.0) fail(ctx, "'stop_tol' must be nonnegative");
  cfg.contraction_slack = get_number_or(doc, ctx, "contraction_slack", 1e-9);
  if (cfg.contraction_slack < 0.0) fail(ctx, "'contraction_slack' must be nonnegative");
  cfg.certify_samples = get_integer_or(doc, ctx, "certify_samples", 200);
  if (cfg.certify_samples < 1) fail(ctx, "'certify_samples' must be positive");

  if (doc.contains("verify")) {
    const json& v = doc.at("verify");
    check_keys(v, ctx + ".verify", {"trials", "n_particles", "pair_samples", "eps_max"});
    cfg.verify.trials = get_integer_or(v, ctx + ".verify", "trials", 100);
    cfg.verify.n_particles = get_integer_or(v, ctx + ".verify", "n_particles", 2000);
    cfg.verify.pair_samples = get_integer_or(v, ctx + ".verify", "pair_samples", 10000);
    cfg.verify.eps_max = get_number_or(v, ctx + ".verify", "eps_max", 0.05);
    if (cfg.verify.trials < 1 || cfg.verify.n_particles < 2 ||
        cfg.verify.pair_samples < 1 || !(cfg.verify.eps_max > 0.0)) {
      fail(ctx + ".verify", "invalid verification parameters");
    }
  }

  if (doc.contains("out_dir")) cfg.out_dir = get_string(doc, ctx, "out_dir");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

}  // namespace mmdflow
