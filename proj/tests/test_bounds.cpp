#include <doctest.h>

#include <cmath>
#include <limits>

#include "peergrade/bounds.hpp"

using namespace peergrade;

TEST_CASE("cost model") {
  const CostModel cm;  // default 0.75 utility per hour
  CHECK(cm.cost_for_hours(1.0) == 0.75);
  CHECK(cm.cost_for_minutes(60.0) == doctest::Approx(0.75));
  CHECK(cm.cost_for_minutes(20.0) == doctest::Approx(0.25));
  const CostModel heavy{1.5};
  CHECK(heavy.cost_for_minutes(30.0) == doctest::Approx(0.75));
}

TEST_CASE("minimum instructor probability") {
  // Five minutes of review time at the default weight: C = 0.0625, and with
  // alpha = 1/4, sigma = 1 the bound lands exactly at one half.
  const CostModel cm;
  const double c = cm.cost_for_minutes(5.0);
  CHECK(c == doctest::Approx(0.0625));
  CHECK(min_p_for_truthfulness(c, 0.25, 1.0) == doctest::Approx(0.5));

  CHECK(min_p_for_truthfulness(0.0, 0.25, 1.0) == 0.0);
  // alpha scaling: quadrupling alpha halves the bound
  CHECK(min_p_for_truthfulness(c, 1.0, 1.0) == doctest::Approx(0.25));
  // values above 1 are allowed and signal infeasibility
  CHECK(min_p_for_truthfulness(1.0, 0.25, 1.0) > 1.0);

  CHECK_THROWS_AS(min_p_for_truthfulness(1.0, 0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(min_p_for_truthfulness(-1.0, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(min_p_for_truthfulness(1.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("deviation bound") {
  CHECK(deviation_bound_p(1.0, 1.0, 2.0) == doctest::Approx(0.5));
  CHECK(deviation_bound_p(1.0, 4.0, 1.0) == doctest::Approx(0.5));
  CHECK(deviation_bound_p(0.0, 1.0, 2.0) == 0.0);
  CHECK(deviation_bound_p(0.0, 1.0, 0.0) == 0.0);
  CHECK(deviation_bound_p(1.0, 1.0, 0.0) ==
        std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(deviation_bound_p(1.0, 1.0, -1.0), ConfigError);
}

TEST_CASE("convergence error sequence") {
  const auto e = convergence_errors(0.5, 4.0, 4);
  REQUIRE(e.size() == 4);
  CHECK(e[0] == 16.0);
  CHECK(e[1] == doctest::Approx(4.0));
  CHECK(e[2] == doctest::Approx(1.0));
  CHECK(e[3] == doctest::Approx(0.25));

  // closed form e_t = (1-p)^{2(t-1)} gap^2
  const double p = 0.3, gap = 2.5;
  const auto f = convergence_errors(p, gap, 10);
  for (int t = 0; t < 10; ++t)
    CHECK(f[t] ==
          doctest::Approx(std::pow(1.0 - p, 2 * t) * gap * gap).epsilon(1e-9));

  const auto g = convergence_errors(1.0, 3.0, 3);
  CHECK(g[0] == 9.0);
  CHECK(g[1] == 0.0);
  CHECK_THROWS_AS(convergence_errors(-0.1, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(convergence_errors(0.5, 1.0, 0), ConfigError);
}

TEST_CASE("tree honesty condition is strict") {
  CHECK(tree_honesty_condition(2.1, 2, 2.0, 1.0));
  CHECK_FALSE(tree_honesty_condition(2.0, 2, 2.0, 1.0));  // equality fails
  CHECK(tree_honesty_condition(0.0, 3, 1.0, 2.0));  // defecting costs more
  CHECK_THROWS_AS(tree_honesty_condition(1.0, 0, 1.0, 0.0), ConfigError);
}

TEST_CASE("tree cost bound") {
  // sigma_q^2 = 4, Eq = 5, M = 10, K = 2: (4 + 25)/2.
  CHECK(tree_cost_bound(4.0, 5.0, 10.0, 2) == doctest::Approx(14.5));
  // Degenerate classroom point: sigma_q^2 = 0, Eq = M, K = 4 gives 0;
  // with sigma_q^2 = 1 it gives 0.25.
  CHECK(tree_cost_bound(0.0, 10.0, 10.0, 4) == 0.0);
  CHECK(tree_cost_bound(1.0, 10.0, 10.0, 4) == doctest::Approx(0.25));
  CHECK_THROWS_AS(tree_cost_bound(1.0, 11.0, 10.0, 4), ConfigError);
  CHECK_THROWS_AS(tree_cost_bound(1.0, 5.0, 10.0, 0), ConfigError);
}

TEST_CASE("admissible gamma interval") {
  SUBCASE("small eta: whole interval once the noise gain covers the cost") {
    const GammaRange r = gamma_range(0.0, 1.0, 0.0, 5);
    CHECK_FALSE(r.empty);
    CHECK(r.lo == 0.0);
    CHECK(r.hi == 1.0);
  }
  SUBCASE("eta below sigma_q with a real cost raises the lower end") {
    // C = 0.5, sigma_q^2 = 1, eta^2 = 0, n = 5: lo = 0.5.
    const GammaRange r = gamma_range(0.5, 1.0, 0.0, 5);
    CHECK_FALSE(r.empty);
    CHECK(r.lo == doctest::Approx(0.5));
    CHECK(r.hi == 1.0);
  }
  SUBCASE("eta equal to sigma_q") {
    const GammaRange r = gamma_range(0.5, 1.0, 1.0, 5);
    CHECK_FALSE(r.empty);
    CHECK(r.lo == 0.0);
    CHECK(r.hi == 1.0);
  }
  SUBCASE("eta above sigma_q caps the top end") {
    // C = 0.5, sigma_q^2 = 1, eta^2 = 2, n = 5: noise gain 2.5,
    // hi = (0.5 - 2.5)/(1 - 2) = 2 -> capped at 1.
    const GammaRange a = gamma_range(0.5, 1.0, 2.0, 5);
    CHECK_FALSE(a.empty);
    CHECK(a.hi == 1.0);
    // C = 0.9, sigma_q^2 = 1, eta^2 = 3, n = 2: gain 6,
    // hi = (0.9 - 6)/(1 - 3) = 2.55 -> capped; lo = 0.
    const GammaRange b = gamma_range(0.9, 1.0, 3.0, 2);
    CHECK_FALSE(b.empty);
    CHECK(b.lo == 0.0);
  }
  SUBCASE("cost at or above sigma_q^2 empties the interval") {
    CHECK(gamma_range(1.0, 1.0, 0.5, 5).empty);
    CHECK(gamma_range(2.0, 1.0, 0.5, 5).empty);
  }
  SUBCASE("n = 1 is degenerate") {
    CHECK_THROWS_AS(gamma_range(0.1, 1.0, 0.5, 1), DegenerateInputError);
  }
  SUBCASE("negative parameters rejected") {
    CHECK_THROWS_AS(gamma_range(-0.1, 1.0, 0.5, 5), ConfigError);
    CHECK_THROWS_AS(gamma_range(0.1, -1.0, 0.5, 5), ConfigError);
  }
}

TEST_CASE("min-p curve follows the pointwise bound and grows with time") {
  const CostModel cm;
  const auto curve = min_p_curve(0.25, 1.0, cm, {5.0, 10.0, 20.0, 60.0});
  REQUIRE(curve.size() == 4);
  CHECK(curve[0].first == 5.0);
  CHECK(curve[0].second == doctest::Approx(0.5));
  for (std::size_t k = 0; k < curve.size(); ++k)
    CHECK(curve[k].second ==
          min_p_for_truthfulness(cm.cost_for_minutes(curve[k].first), 0.25,
                                 1.0));
  for (std::size_t k = 1; k < curve.size(); ++k)
    CHECK(curve[k].second > curve[k - 1].second);  // more time, higher bound
}

TEST_CASE("variance bound curve") {
  const auto curve = variance_bound_curve(1.0, 10.0, 4, {6.0, 8.0, 9.0, 10.0});
  REQUIRE(curve.size() == 4);
  CHECK(curve[0].second == 0.0);                   // floored: 4 - 16 < 0
  CHECK(curve[1].second == doctest::Approx(0.0));  // 4 - 4
  CHECK(curve[2].second == doctest::Approx(3.0));  // 4 - 1
  CHECK(curve[3].second == doctest::Approx(4.0));  // peak at Eq = M is K*C
  for (std::size_t k = 1; k < curve.size(); ++k)
    CHECK(curve[k].second >= curve[k - 1].second);
}
