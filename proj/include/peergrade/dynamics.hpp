#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "peergrade/assignment.hpp"
#include "peergrade/losses.hpp"
#include "peergrade/model.hpp"

namespace peergrade {

// Monte Carlo controls. Replicates are processed in fixed-size blocks whose
// partial moments are merged in block order, so estimates do not depend on
// the thread count.
struct SimOptions {
  long replicates = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct SimReport {
  double estimate = 0.0;
  double std_error = 0.0;
  long replicates = 0;
  std::uint64_t seed = 0;
  std::string scenario;
};

// A review-graph environment to simulate: structure, grade scale, and the
// submission-quality distribution (or a fixed quality set).
struct Scenario {
  std::string descriptor;
  double max_grade = 10.0;
  std::vector<ReviewPair> pairs;
  std::vector<int> submissions;  // sorted unique submission ids
  QualityDistribution qdist;
  std::optional<std::map<int, double>> fixed_qualities;
  std::optional<ReviewTree> tree;

  // Regular class: everyone submits one submission and reviews m others.
  static Scenario classroom(int num_students, int reviews_per_student,
                            double max_grade, QualityDistribution qdist,
                            std::uint64_t seed);
  // Arbitrary review pairs (submission ids may be disjoint from student ids).
  static Scenario custom(std::vector<ReviewPair> pairs, double max_grade,
                         QualityDistribution qdist);
  // Hierarchy: each student node reviews its `reviewed` submissions.
  static Scenario from_tree(ReviewTree tree, double max_grade,
                            QualityDistribution qdist);

  std::map<int, double> qualities_for(std::uint64_t seed,
                                      std::uint64_t replicate) const;
  std::vector<int> students() const;
};

// Candidate strategies for the deviation search. The truthful strategy is
// always a member.
struct StrategyGrid {
  std::vector<Strategy> strategies;
  std::vector<std::string> labels;
  int truthful_index = -1;

  std::size_t size() const { return strategies.size(); }

  // Constant grades 0, step, 2*step, ..., M plus the truthful strategy.
  static StrategyGrid constants(double max_grade, double step = -1.0);
  // slope x + intercept over the cartesian product of the two grids; the
  // truthful strategy (slope 1, intercept 0) is appended if absent.
  static StrategyGrid affine(const std::vector<double>& slopes,
                             const std::vector<double>& intercepts,
                             double max_grade);
  // Truthful reporting plus noise with the given bias / std grids; (0, 0)
  // is the truthful member.
  static StrategyGrid truthful_plus_noise(
      const std::vector<double>& biases, const std::vector<double>& stds,
      double max_grade, NoiseShape shape = NoiseShape::gaussian_clipped);
};

// Mean and standard error of student u's loss under the profile; each
// replicate draws qualities (unless fixed), realizes the graph, and scores u.
SimReport expected_loss(const StrategyProfile& profile, int u,
                        const LossSpec& spec, const Scenario& scenario,
                        const SimOptions& opt);

// Grid search for u's best reply against fixed opponents. The objective is
// expected loss plus the measurement cost (charged only to strategies whose
// quality map is non-constant). All candidates are scored on common random
// draws, so differences against the incumbent strategy are paired.
struct BestResponse {
  int best_index = -1;
  Strategy strategy;
  std::string label;
  double objective = 0.0;
  double objective_se = 0.0;
  double incumbent_objective = 0.0;
  double gain = 0.0;     // incumbent objective - best objective
  double gain_se = 0.0;  // SE of the paired difference
  std::vector<double> objectives;  // per grid candidate
};
BestResponse best_response(const StrategyGrid& grid,
                           const StrategyProfile& opponents, int u,
                           const LossSpec& spec, const Scenario& scenario,
                           double cost, const SimOptions& opt);

struct EquilibriumVerdict {
  enum class Kind { no_profitable_deviation_on_grid, deviation_found };
  Kind kind = Kind::no_profitable_deviation_on_grid;
  int student = -1;
  std::string strategy_label;
  double gain = 0.0;
  double gain_se = 0.0;
  double cost = 0.0;
  std::string profile_descriptor;
};

// Runs best_response for every listed student (all students when the list is
// empty); reports a deviation only when its paired gain exceeds 3 standard
// errors.
EquilibriumVerdict check_equilibrium(const StrategyProfile& profile,
                                     const StrategyGrid& grid,
                                     const LossSpec& spec,
                                     const Scenario& scenario, double cost,
                                     const SimOptions& opt,
                                     const std::vector<int>& students = {});

// Simultaneous best-response dynamics from a symmetric constant-grade start
// under the expected-form supervised loss. The round-t grade follows the
// closed-form minimizer g_t = (1-p) g_{t-1} + p q.
struct TrajectoryPoint {
  int round = 0;
  double grade = 0.0;
  double error = 0.0;  // (grade - quality)^2
};
std::vector<TrajectoryPoint> iterate_best_response(
    const StrategyProfile& initial, double p, double quality, int rounds);

// Outcome of a Monte Carlo theorem check: `pass` only when the estimate both
// agrees with the analytic value within 3 SE and is precise enough for the
// agreement to mean something.
struct CheckReport {
  enum class Outcome { pass, fail, inconclusive };
  Outcome outcome = Outcome::inconclusive;
  double observed = 0.0;
  double expected = 0.0;
  double std_error = 0.0;
  std::string detail;
};

// Paired difference of E[l2-exclusive] across two strategies for u against
// unbiased opponents; the environment-dependent part cancels, leaving
// (sigma1^2 + b1^2) - (sigma2^2 + b2^2). Bias and variance are read off the
// strategy's noise parameters, so both strategies must keep their grades
// inside (0, M) (no clipping) for the analytic value to be exact.
CheckReport verify_lemma_long1(const Strategy& s1, const Strategy& s2, int u,
                               const Scenario& scenario, const SimOptions& opt,
                               double precision = 0.05);

// Same pairing for the global sample variance of all grades. The analytic
// difference is (n/K)(sigma1^2 - sigma2^2) + n(K-n)/(K(K-1)) (b1^2 - b2^2)
// with n = |del-u| and K the total edge count.
CheckReport verify_lemma_long2(const Strategy& s1, const Strategy& s2, int u,
                               const Scenario& scenario, const SimOptions& opt,
                               double precision = 0.05);

// Symmetric-profile comparison for the variance-penalized scheme: truthful
// (analytic loss -gamma sigma_q^2 + C) against the constant-plus-noise
// strategy D_eta (analytic loss n eta^2/(n-1) - gamma eta^2). The analytic
// values assume the local variance variant. When the admissible gamma range
// is empty the comparison reports that instead of asserting.
struct ComparisonReport {
  CheckReport::Outcome outcome = CheckReport::Outcome::inconclusive;
  bool gamma_admissible = false;
  double truthful_estimate = 0.0, truthful_se = 0.0, truthful_analytic = 0.0;
  double deta_estimate = 0.0, deta_se = 0.0, deta_analytic = 0.0;
  std::string detail;
};
ComparisonReport compare_truthful_vs_deta(
    double eta2, double gamma, int n, double sigma_q2, VarVariant variant,
    double cost, int num_students, const SimOptions& opt,
    double max_grade = 10.0, NoiseShape noise_shape = NoiseShape::uniform_clipped);

}  // namespace peergrade
