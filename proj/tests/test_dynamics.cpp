#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "peergrade/bounds.hpp"
#include "peergrade/dynamics.hpp"

using namespace peergrade;

namespace {

// Submissions 100 (q=4) and 101 (q=6), students 0, 1, 2 all review both.
Scenario small_fixed_scenario() {
  std::vector<ReviewPair> pairs;
  for (int u = 0; u < 3; ++u) {
    pairs.push_back({100, u});
    pairs.push_back({101, u});
  }
  Scenario sc = Scenario::custom(pairs, 10.0,
                                 QualityDistribution::uniform_dist(0.0, 10.0));
  sc.fixed_qualities = std::map<int, double>{{100, 4.0}, {101, 6.0}};
  return sc;
}

int constant_index(const StrategyGrid& grid, double value) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto& s = grid.strategies[k];
    if (s.quality_map.is_constant() && s.voluntary_noise_std == 0.0 &&
        std::abs(s.quality_map(0.0) - value) < 1e-12)
      return static_cast<int>(k);
  }
  return -1;
}

}  // namespace

TEST_CASE("scenario plumbing") {
  const Scenario sc = small_fixed_scenario();
  CHECK(sc.students() == std::vector<int>{0, 1, 2});
  CHECK(sc.submissions == std::vector<int>{100, 101});
  const auto q = sc.qualities_for(1, 0);
  CHECK(q.at(100) == 4.0);
  CHECK(q.at(101) == 6.0);

  const Scenario cls = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(0.0, 10.0), 3);
  CHECK(cls.students().size() == 10);
  CHECK(cls.pairs.size() == 50);
  // quality draws are keyed by (seed, replicate) only
  CHECK(cls.qualities_for(5, 2) == cls.qualities_for(5, 2));
  CHECK(cls.qualities_for(5, 2) != cls.qualities_for(5, 3));
}

TEST_CASE("strategy grids") {
  const StrategyGrid c = StrategyGrid::constants(10.0);
  CHECK(c.size() == 102);  // 0, 0.1, ..., 10 plus truthful
  REQUIRE(c.truthful_index >= 0);
  CHECK_FALSE(c.strategies[c.truthful_index].quality_map.is_constant());
  CHECK(constant_index(c, 8.0) >= 0);
  CHECK(c.labels.size() == c.size());

  const StrategyGrid a = StrategyGrid::affine({0.5, 1.0}, {0.0, 1.0}, 10.0);
  CHECK(a.size() == 4);  // slope 1 / intercept 0 is already on the product
  REQUIRE(a.truthful_index >= 0);

  const StrategyGrid n =
      StrategyGrid::truthful_plus_noise({0.0, 1.0}, {0.0, 0.5}, 10.0);
  REQUIRE(n.truthful_index >= 0);
  CHECK(n.strategies[n.truthful_index].voluntary_noise_std == 0.0);
  CHECK(n.strategies[n.truthful_index].voluntary_noise_mean == 0.0);
}

TEST_CASE("expected loss is exact for deterministic profiles") {
  const Scenario sc = small_fixed_scenario();
  const StrategyProfile all_max{Strategy::constant(10.0), {}};
  // Everyone grades 10: peer term vanishes, instructor term is (10-q)^2, so
  // the flat loss is p * (36 + 16)/2 = 26 p.
  const SimReport r = expected_loss(all_max, 0, LossSpec::flat(0.5, 1.0), sc,
                                    {256, 1, 1});
  CHECK(r.estimate == doctest::Approx(13.0).epsilon(1e-12));
  CHECK(r.std_error == 0.0);
  CHECK(r.replicates == 256);
}

TEST_CASE("expected variance-penalized loss of truthful play") {
  // Truthful graders: agreement term 0, variance term -gamma sigma_q^2 in
  // expectation (the unbiased sample variance of the reviewed qualities).
  const Scenario cls = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(0.0, 10.0), 3);
  const StrategyProfile truthful{Strategy::truthful(10.0), {}};
  const SimReport r = expected_loss(
      truthful, 0, LossSpec::var(0.5, VarVariant::local), cls, {20000, 1, 2});
  const double expect = -0.5 * (100.0 / 12.0);
  CHECK(std::abs(r.estimate - expect) <= 3.0 * r.std_error);
  CHECK(r.std_error > 0.0);
}

TEST_CASE("expected loss does not depend on the thread count") {
  const Scenario cls = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(0.0, 10.0), 3);
  const StrategyProfile prof{Strategy::truthful_noisy(0.3, 0.7, 10.0), {}};
  const LossSpec spec = LossSpec::flat(0.5, 1.0);
  const SimReport a = expected_loss(prof, 0, spec, cls, {8192, 9, 1});
  const SimReport b = expected_loss(prof, 0, spec, cls, {8192, 9, 4});
  CHECK(a.estimate == b.estimate);  // bitwise: block-merged moments
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("best response of a truthful student against truthful opponents") {
  const Scenario sc = small_fixed_scenario();
  const StrategyProfile truthful{Strategy::truthful(10.0), {}};
  const BestResponse br =
      best_response(StrategyGrid::constants(10.0), truthful, 0,
                    LossSpec::flat(0.6, 1.0), sc, 0.0, {512, 1, 1});
  CHECK(br.best_index ==
        StrategyGrid::constants(10.0).truthful_index);  // ties go truthful
  CHECK(br.objective == 0.0);
  CHECK(br.gain == 0.0);
  CHECK(br.gain_se == 0.0);
}

TEST_CASE("best constant reply tracks the closed-form minimizer") {
  // Opponents all play constant D = 8; fixed quality q = 4 on both
  // submissions; flat loss with p. The best constant is (1-p) D + p q.
  Scenario sc = small_fixed_scenario();
  sc.fixed_qualities = std::map<int, double>{{100, 4.0}, {101, 4.0}};
  const StrategyProfile opp{Strategy::constant(8.0), {}};
  const StrategyGrid grid = StrategyGrid::constants(10.0);
  for (double p : {0.0, 0.3, 0.7}) {
    const BestResponse br = best_response(grid, opp, 0, LossSpec::flat(p, 1.0),
                                          sc, 0.0, {64, 1, 1});
    const double target = (1.0 - p) * 8.0 + p * 4.0;
    const double played = br.strategy.quality_map(0.0);
    REQUIRE(br.strategy.quality_map.is_constant());
    CHECK(std::abs(played - target) <= 0.1 + 1e-12);  // within one grid step
  }
  // At p = 0 matching the crowd exactly zeroes the loss.
  const BestResponse br0 = best_response(grid, opp, 0, LossSpec::flat(0.0, 1.0),
                                         sc, 0.0, {64, 1, 1});
  CHECK(br0.objective <= 1e-20);  // grid value 8 carries float-step residue
  CHECK(br0.best_index == constant_index(grid, 8.0));
}

TEST_CASE("candidate objectives agree with the loss module") {
  const Scenario sc = small_fixed_scenario();
  const StrategyProfile opp{Strategy::affine(0.8, 1.0, 10.0), {}};
  const LossSpec spec = LossSpec::flat(0.4, 1.0);
  const StrategyGrid grid = StrategyGrid::constants(10.0);
  const double cost = 0.3;
  const SimOptions opt{512, 7, 1};
  const BestResponse br = best_response(grid, opp, 0, spec, sc, cost, opt);

  const int k3 = constant_index(grid, 3.0);
  REQUIRE(k3 >= 0);
  StrategyProfile with_const = opp;
  with_const.overrides[0] = grid.strategies[k3];
  CHECK(br.objectives[k3] ==
        doctest::Approx(expected_loss(with_const, 0, spec, sc, opt).estimate)
            .epsilon(1e-12));  // constants pay no measurement cost

  StrategyProfile with_truthful = opp;
  with_truthful.overrides[0] = Strategy::truthful(10.0);
  CHECK(br.objectives[grid.truthful_index] ==
        doctest::Approx(
            expected_loss(with_truthful, 0, spec, sc, opt).estimate + cost)
            .epsilon(1e-12));
}

TEST_CASE("equilibrium check") {
  const Scenario sc = small_fixed_scenario();
  const StrategyGrid grid = StrategyGrid::constants(10.0);

  SUBCASE("truthful profile has no profitable deviation") {
    const StrategyProfile truthful{Strategy::truthful(10.0), {}};
    const EquilibriumVerdict v = check_equilibrium(
        truthful, grid, LossSpec::flat(0.5, 1.0), sc, 0.0, {256, 1, 1});
    CHECK(v.kind == EquilibriumVerdict::Kind::no_profitable_deviation_on_grid);
  }
  SUBCASE("constant-zero profile is refuted under full supervision") {
    const StrategyProfile zeros{Strategy::constant(0.0), {}};
    const EquilibriumVerdict v = check_equilibrium(
        zeros, grid, LossSpec::flat(1.0, 1.0), sc, 0.0, {256, 1, 1});
    CHECK(v.kind == EquilibriumVerdict::Kind::deviation_found);
    // incumbent loss (16+36)/2 = 26; the truthful reply scores 0
    CHECK(v.gain == doctest::Approx(26.0).epsilon(1e-12));
    CHECK(v.gain_se == 0.0);
  }
}

TEST_CASE("best-response iteration from a constant start") {
  const StrategyProfile start{Strategy::constant(8.0), {}};
  const auto traj = iterate_best_response(start, 0.5, 4.0, 4);
  REQUIRE(traj.size() == 4);
  CHECK(traj[0].grade == doctest::Approx(8.0));
  CHECK(traj[1].grade == doctest::Approx(6.0));
  CHECK(traj[2].grade == doctest::Approx(5.0));
  CHECK(traj[3].grade == doctest::Approx(4.5));

  // The error sequence is the same recurrence the bounds module emits.
  const auto errors = convergence_errors(0.5, 8.0 - 4.0, 4);
  for (int t = 0; t < 4; ++t) CHECK(traj[t].error == errors[t]);

  CHECK_THROWS_AS(
      iterate_best_response({Strategy::truthful(10.0), {}}, 0.5, 4.0, 4),
      ConfigError);
  CHECK_THROWS_AS(
      iterate_best_response({Strategy::constant_noisy(8.0, 1.0), {}}, 0.5, 4.0,
                            4),
      ConfigError);
}

TEST_CASE("paired agreement-loss difference, same strategy twice") {
  const Scenario cls = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(4.0, 6.0), 3);
  const Strategy s = Strategy::truthful_noisy(0.5, 0.5, 10.0);
  const CheckReport r = verify_lemma_long1(s, s, 0, cls, {2000, 1, 1});
  CHECK(r.outcome == CheckReport::Outcome::pass);
  CHECK(r.observed == 0.0);
  CHECK(r.std_error == 0.0);
  CHECK(r.expected == 0.0);
}

TEST_CASE("paired agreement-loss difference matches bias and variance") {
  const Scenario cls = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(4.0, 6.0), 3);
  const Strategy s1 = Strategy::truthful_noisy(0.5, 0.5, 10.0);
  const Strategy s2 = Strategy::truthful(10.0);
  const CheckReport r = verify_lemma_long1(s1, s2, 0, cls, {50000, 1, 2});
  // (sigma1^2 + b1^2) - 0 = 0.25 + 0.25
  CHECK(r.expected == doctest::Approx(0.5));
  CHECK(r.outcome == CheckReport::Outcome::pass);
  CHECK(std::abs(r.observed - r.expected) <= 3.0 * r.std_error);
}

TEST_CASE("global variance difference, bias drops out when n equals K") {
  // One student holds every edge: the global variance is shift invariant, so
  // a pure-bias strategy changes nothing, replicate by replicate.
  std::vector<ReviewPair> pairs;
  for (int i = 100; i < 105; ++i) pairs.push_back({i, 0});
  Scenario sc = Scenario::custom(pairs, 10.0,
                                 QualityDistribution::uniform_dist(4.0, 6.0));
  const Strategy biased = Strategy::truthful_noisy(1.0, 0.0, 10.0);
  const CheckReport r =
      verify_lemma_long2(biased, Strategy::truthful(10.0), 0, sc, {2000, 1, 1});
  CHECK(r.expected == 0.0);
  CHECK(std::abs(r.observed) <= 1e-12);  // rounding only
  CHECK(r.std_error <= 1e-12);
  CHECK(r.outcome == CheckReport::Outcome::pass);
}

TEST_CASE("global variance difference with noise") {
  const Scenario cls = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(4.0, 6.0), 3);
  const Strategy s1 = Strategy::truthful_noisy(0.0, 1.0, 10.0);
  const CheckReport r =
      verify_lemma_long2(s1, Strategy::truthful(10.0), 0, cls, {50000, 1, 2});
  CHECK(r.expected == doctest::Approx(5.0 / 50.0));  // (n/K) sigma1^2
  CHECK(r.outcome == CheckReport::Outcome::pass);
}

TEST_CASE("truthful play beats the constant-noisy defector") {
  // eta^2 = 1, gamma = 0.5, n = 5, sigma_q^2 = 1, C = 0:
  // truthful analytic -0.5, defector analytic 5/4 - 1/2 = 0.75.
  // (sigma_q^2 is kept small so clipping the quality draw to [0, M] leaves
  // its nominal variance intact.)
  const ComparisonReport r = compare_truthful_vs_deta(
      1.0, 0.5, 5, 1.0, VarVariant::local, 0.0, 6, {50000, 1, 2});
  CHECK(r.gamma_admissible);
  CHECK(r.truthful_analytic == doctest::Approx(-0.5));
  CHECK(r.deta_analytic == doctest::Approx(0.75));
  CHECK(r.outcome == CheckReport::Outcome::pass);
  CHECK(std::abs(r.truthful_estimate - r.truthful_analytic) <=
        3.0 * r.truthful_se);
  CHECK(std::abs(r.deta_estimate - r.deta_analytic) <= 3.0 * r.deta_se);
}

TEST_CASE("comparison is inconclusive when no gamma is admissible") {
  // C >= sigma_q^2 empties the gamma interval.
  const ComparisonReport r = compare_truthful_vs_deta(
      1.0, 0.5, 5, 1.0, VarVariant::local, 1.0, 6, {2000, 1, 1});
  CHECK_FALSE(r.gamma_admissible);
  CHECK(r.outcome == CheckReport::Outcome::inconclusive);
}
