#include <array>
#include <cmath>

#include "doctest.h"
#include "mmdflow/analysis.hpp"
#include "mmdflow/errors.hpp"
#include "mmdflow/verify.hpp"
#include "support/oracles.hpp"

using namespace mmdflow;

namespace {

ParticleCloud point_cloud(double x, Eigen::Index n = 8) {
  return ParticleCloud(Eigen::MatrixXd::Constant(n, 1, x));
}

struct Toy {
  std::shared_ptr<const AffineMap> map = AffineMap::identity(1);
  ParticleCloud q = point_cloud(0.0);
  ParticleCloud p = point_cloud(1.0);

  ResidualBlock block(double eps) const {
    return ResidualBlock(map, eps, witness_vector(p, q, *map));
  }
};

ParticleCloud gaussian_cloud(Eigen::Index d, Eigen::Index n, std::uint64_t seed,
                             double shift = 0.0) {
  GaussianSpec g{Eigen::VectorXd::Constant(d, shift),
                 Eigen::MatrixXd::Identity(d, d)};
  return sample_distribution(g, n, seed);
}

}  // namespace

TEST_CASE("improvement on the point-mass toy") {
  Toy toy;

  SUBCASE("zero witness changes nothing") {
    ResidualBlock block(toy.map, 0.1, Eigen::VectorXd::Zero(1));
    CHECK(improvement(toy.q, toy.p, block) == 0.0);
  }
  SUBCASE("hand-computed value 1 - 0.81") {
    CHECK(improvement(toy.q, toy.p, toy.block(0.1)) ==
          doctest::Approx(0.19).epsilon(1e-14));
  }
  SUBCASE("consistency with two independent mmd evaluations") {
    const ResidualBlock block = toy.block(0.1);
    Eigen::MatrixXd moved(toy.q.count(), 1);
    for (Eigen::Index k = 0; k < toy.q.count(); ++k) {
      moved.row(k) = block.forward(toy.q.point(k)).transpose();
    }
    const double direct = mmd_squared(toy.q, toy.p, *toy.map) -
                          mmd_squared(ParticleCloud(moved), toy.p, *toy.map);
    CHECK(std::abs(improvement(toy.q, toy.p, block) - direct) < 1e-12);
  }
}

TEST_CASE("first-order improvement term") {
  Toy toy;

  SUBCASE("identity toy value 2 * eps") {
    CHECK(improvement_first_order(toy.q, toy.p, toy.block(0.1)) ==
          doctest::Approx(0.2).epsilon(1e-14));
  }
  SUBCASE("mismatched witness is rejected") {
    Eigen::VectorXd wrong(1);
    wrong << 0.5;
    ResidualBlock block(toy.map, 0.1, wrong);
    CHECK_THROWS_AS(improvement_first_order(toy.q, toy.p, block), InputError);
  }
  SUBCASE("always nonnegative") {
    Eigen::MatrixXd W(2, 2);
    W << 0.8, -0.5, 0.3, 0.7;
    auto map = std::make_shared<BoundedSineMap>(0.5, W);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const ParticleCloud q = gaussian_cloud(2, 100, 800 + s);
      const ParticleCloud p = gaussian_cloud(2, 100, 900 + s, 0.5);
      const ResidualBlock block(map, 0.02, witness_vector(p, q, *map));
      CHECK(improvement_first_order(q, p, block) >= 0.0);
    }
  }
}

TEST_CASE("decomposition is exact by construction") {
  Toy toy;
  const DeltaDecomposition dec = decompose_improvement(toy.q, toy.p, toy.block(0.1));
  CHECK(dec.delta == doctest::Approx(0.19).epsilon(1e-14));
  CHECK(dec.delta1 == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(dec.delta2 == doctest::Approx(-0.01).epsilon(1e-12));
  CHECK(dec.delta == dec.delta1 + dec.delta2);  // identity, not approximation
  CHECK(dec.mmd_sq_before == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("affine improvement matches the closed form") {
  Eigen::MatrixXd A(1, 1);
  A << 1.7;
  auto map = std::make_shared<AffineMap>(A, Eigen::VectorXd::Zero(1));
  const ParticleCloud q = point_cloud(0.2);
  const ParticleCloud p = point_cloud(1.4);
  const Eigen::VectorXd w = witness_vector(p, q, *map);
  for (double eps : {0.01, 0.05, 0.1}) {
    const ResidualBlock block(map, eps, w);
    CHECK(improvement(q, p, block) ==
          doctest::Approx(oracles::affine_improvement_closed_form(A, w, eps))
              .epsilon(1e-12));
  }
}

TEST_CASE("first-order lower bound check") {
  SUBCASE("identity map hits equality") {
    Toy toy;
    const BoundCheck check = check_first_order_bound(toy.q, toy.p, toy.map, 0.1);
    CHECK(check.satisfied);
    CHECK(std::abs(check.lhs - check.rhs) < 1e-14);
  }
  SUBCASE("scaling epsilon scales both sides") {
    Toy toy;
    const BoundCheck c1 = check_first_order_bound(toy.q, toy.p, toy.map, 0.05);
    const BoundCheck c2 = check_first_order_bound(toy.q, toy.p, toy.map, 0.1);
    CHECK(c2.lhs == doctest::Approx(2.0 * c1.lhs).epsilon(1e-12));
    CHECK(c2.rhs == doctest::Approx(2.0 * c1.rhs).epsilon(1e-12));
  }
  SUBCASE("zero witness is rejected") {
    Toy toy;
    CHECK_THROWS_AS(check_first_order_bound(toy.q, toy.q, toy.map, 0.1), InputError);
  }
}

TEST_CASE("lipschitz bound check") {
  SUBCASE("affine blocks have zero quotient and zero bound") {
    Eigen::MatrixXd A(2, 2);
    A << 1.1, 0.4, -0.2, 0.9;
    auto map = std::make_shared<AffineMap>(A, Eigen::VectorXd::Zero(2));
    Eigen::VectorXd w(2);
    w << 0.3, -0.8;
    const ResidualBlock block(map, 0.05, w);
    const BoundCheck check = check_lipschitz_bound(block, 500, 3);
    CHECK(check.satisfied);
    CHECK(check.lhs == 0.0);
    CHECK(check.rhs == 0.0);
  }
  SUBCASE("doubling epsilon doubles both sides") {
    Eigen::MatrixXd W(2, 2);
    W << 0.8, -0.5, 0.3, 0.7;
    auto map = std::make_shared<BoundedSineMap>(0.5, W);
    Eigen::VectorXd w(4);
    w << 0.4, -0.3, 0.2, 0.5;
    const BoundCheck c1 = check_lipschitz_bound(ResidualBlock(map, 0.02, w), 2000, 5);
    const BoundCheck c2 = check_lipschitz_bound(ResidualBlock(map, 0.04, w), 2000, 5);
    CHECK(c2.lhs == doctest::Approx(2.0 * c1.lhs).epsilon(1e-12));
    CHECK(c2.rhs == doctest::Approx(2.0 * c1.rhs).epsilon(1e-12));
  }
}

TEST_CASE("remainder bound check") {
  SUBCASE("identity toy hits equality at 0.01") {
    Toy toy;
    const BoundCheck check = check_remainder_bound(toy.q, toy.p, toy.map, 0.1);
    CHECK(check.satisfied);
    CHECK(check.lhs == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(check.rhs == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("identical clouds give a 0 = 0 bound") {
    Toy toy;
    const BoundCheck check = check_remainder_bound(toy.q, toy.q, toy.map, 0.1);
    CHECK(check.satisfied);
    CHECK(check.lhs == 0.0);
    CHECK(check.rhs == 0.0);
  }
}

TEST_CASE("randomized trials satisfy all three bounds") {
  VerifyParams params;
  params.trials = 25;  // the acceptance suite runs the full 100
  params.n_particles = 500;
  params.pair_samples = 2000;
  params.seed = 314159;
  const auto outcomes = run_bound_trials(params);
  REQUIRE(outcomes.size() == 25);
  for (const auto& out : outcomes) {
    CHECK(out.first_order.satisfied);
    CHECK(out.lipschitz.satisfied);
    CHECK(out.remainder.satisfied);
  }
}

TEST_CASE("remainder order fit") {
  constexpr std::array<double, 4> grid{1e-1, 1e-2, 1e-3, 1e-4};

  SUBCASE("exact quadratic remainder on the toy") {
    Toy toy;
    const TaylorFit fit = fit_remainder_order(toy.q, toy.p, toy.map, grid);
    CHECK(std::abs(fit.slope - 2.0) < 1e-6);
    CHECK(fit.points_used == 4);
    // delta2(eps) = -eps^2 up to the ~1e-16 absolute round-off left in delta
    for (const auto& [eps, d2] : fit.table) {
      CHECK(std::abs(d2 + eps * eps) < 1e-15);
    }
  }
  SUBCASE("bounded-sine clouds stay near slope 2") {
    Eigen::MatrixXd W(2, 2);
    W << 0.8, -0.5, 0.3, 0.7;
    auto map = std::make_shared<BoundedSineMap>(0.5, W);
    const ParticleCloud q = gaussian_cloud(2, 1000, 61);
    const ParticleCloud p = gaussian_cloud(2, 1000, 62, 0.6);
    const TaylorFit fit = fit_remainder_order(q, p, map, grid);
    CHECK(fit.slope > 1.9);
    CHECK(fit.slope < 2.1);
  }
  SUBCASE("grid scaling leaves the exact-quadratic slope unchanged") {
    Toy toy;
    constexpr std::array<double, 4> scaled{5e-2, 5e-3, 5e-4, 5e-5};
    const TaylorFit a = fit_remainder_order(toy.q, toy.p, toy.map, grid);
    const TaylorFit b = fit_remainder_order(toy.q, toy.p, toy.map, scaled);
    CHECK(std::abs(a.slope - b.slope) < 1e-6);
  }
  SUBCASE("degenerate grids are rejected") {
    Toy toy;
    constexpr std::array<double, 3> short_grid{1e-1, 1e-2, 1e-3};
    CHECK_THROWS_AS(fit_remainder_order(toy.q, toy.p, toy.map, short_grid),
                    InputError);
    constexpr std::array<double, 4> narrow{1e-1, 8e-2, 6e-2, 4e-2};
    CHECK_THROWS_AS(fit_remainder_order(toy.q, toy.p, toy.map, narrow), InputError);
  }
  SUBCASE("round-off level remainders are filtered out") {
    // Identical clouds: witness is 0, every delta2 is 0, nothing survives.
    Toy toy;
    CHECK_THROWS_AS(fit_remainder_order(toy.q, toy.q, toy.map, grid), NumericError);
  }
}

TEST_CASE("combined lower bound: improvement at the scheduled step") {
  // With eps at the second-order step, delta >= b * eps * mmd_sq must hold
  // on certified affine maps.
  Eigen::MatrixXd A(2, 2);
  A << 1.2, 0.2, 0.0, 0.9;
  auto map = std::make_shared<AffineMap>(A, Eigen::VectorXd::Zero(2));
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ParticleCloud q = gaussian_cloud(2, 400, 1000 + s);
    const ParticleCloud p = gaussian_cloud(2, 400, 2000 + s, 0.6);
    const Eigen::VectorXd w = witness_vector(p, q, *map);
    const double mmd_sq = w.squaredNorm();
    const auto schedule =
        second_order_schedule(map->constants(), w.norm(), 0.5, 2, 2);
    const ResidualBlock block(map, schedule.epsilon, w);
    CHECK(improvement(q, p, block) >=
          map->constants().b * schedule.epsilon * mmd_sq * (1.0 - 1e-9));
  }
}
