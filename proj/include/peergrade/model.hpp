#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "peergrade/errors.hpp"
#include "peergrade/rng.hpp"

namespace peergrade {

inline double clamp_grade(double g, double max_grade) {
  if (g < 0.0) return 0.0;
  if (g > max_grade) return max_grade;
  return g;
}

// Piecewise-linear map [0,M] -> [0,M] stored as ordered breakpoints.
// Outside the breakpoint range the map is constant at the boundary value.
class PiecewiseLinear {
 public:
  PiecewiseLinear();
  explicit PiecewiseLinear(std::vector<std::array<double, 2>> breakpoints);

  double operator()(double x) const;
  bool is_constant() const;
  const std::vector<std::array<double, 2>>& breakpoints() const {
    return pts_;
  }

  static PiecewiseLinear identity(double max_grade);
  static PiecewiseLinear constant(double value);
  // slope*x + intercept over [0, max_grade], with breakpoints inserted where
  // the line crosses 0 or max_grade so values stay in range.
  static PiecewiseLinear affine(double slope, double intercept,
                                double max_grade);

 private:
  std::vector<std::array<double, 2>> pts_;
};

enum class NoiseShape { none, gaussian_clipped, uniform_clipped };

// Admissible grading strategy: the realized grade for a submission of true
// quality q is clip(f(q + eps) + xi, 0, M), where eps is the measurement
// error and xi the voluntary noise with mean e and std v.
struct Strategy {
  PiecewiseLinear quality_map;
  double measurement_noise_std = 0.0;  // std of eps
  double voluntary_noise_mean = 0.0;   // e
  double voluntary_noise_std = 0.0;    // v
  NoiseShape noise_shape = NoiseShape::none;

  // A constant quality map can be played without examining the submission.
  bool requires_measurement() const { return !quality_map.is_constant(); }
  bool is_deterministic() const;

  static Strategy truthful(double max_grade);
  static Strategy constant(double grade);
  static Strategy affine(double slope, double intercept, double max_grade);
  static Strategy truthful_noisy(double bias, double stddev, double max_grade,
                                 NoiseShape shape = NoiseShape::gaussian_clipped);
  static Strategy constant_noisy(double grade, double stddev,
                                 NoiseShape shape = NoiseShape::gaussian_clipped);
};

struct StrategyProfile {
  Strategy default_strategy;
  std::map<int, Strategy> overrides;

  const Strategy& resolve(int student) const {
    auto it = overrides.find(student);
    return it == overrides.end() ? default_strategy : it->second;
  }
};

struct QualityDistribution {
  enum class Kind { uniform, gaussian_clipped, discrete };
  Kind kind = Kind::uniform;
  double lo = 0.0, hi = 0.0;      // uniform; also clip bounds for gaussian
  double mean = 0.0, stddev = 0.0;  // gaussian_clipped
  std::vector<std::pair<double, double>> atoms;  // discrete (value, prob)

  double sample(RngStream& rng) const;
  // Nominal moments (for the gaussian kind these are the pre-clip
  // parameters; callers are expected to keep the clip mass negligible).
  double expectation() const;
  double variance() const;

  static QualityDistribution uniform_dist(double lo, double hi);
  static QualityDistribution gaussian(double mean, double stddev, double lo,
                                      double hi);
  static QualityDistribution discrete(
      std::vector<std::pair<double, double>> atoms);
};

struct ReviewPair {
  int submission;
  int student;
};

// Labeled bipartite review graph. Structure is shared between copies;
// regrade() produces a graph with identical structure and new grades, which
// the simulation engine uses for paired strategy comparisons.
class GradeGraph {
 public:
  struct Edge {
    int submission;
    int student;
  };

  GradeGraph(double max_grade, std::map<int, double> qualities,
             std::vector<ReviewPair> pairs, std::vector<double> grades);

  double max_grade() const { return core_->max_grade; }
  const std::vector<Edge>& edges() const { return core_->edges; }
  const std::vector<double>& grades() const { return grades_; }
  const std::vector<int>& students() const { return core_->students; }
  const std::vector<int>& submission_ids() const { return core_->submissions; }
  const std::map<int, double>& qualities() const { return core_->qualities; }

  const std::vector<int>& submissions_of(int student) const;  // del-u
  const std::vector<int>& reviewers_of(int submission) const;  // del-i
  double grade(int submission, int student) const;
  double quality(int submission) const;
  bool has_student(int student) const;

  GradeGraph regrade(std::vector<double> grades) const;

 private:
  struct Core {
    double max_grade;
    std::map<int, double> qualities;
    std::vector<Edge> edges;  // sorted by (student, submission)
    std::vector<int> students;
    std::vector<int> submissions;
    std::map<int, std::vector<int>> by_student;     // u -> submissions
    std::map<int, std::vector<int>> by_submission;  // i -> students
    std::map<std::pair<int, int>, int> edge_index;  // (i,u) -> edge idx
  };
  GradeGraph(std::shared_ptr<const Core> core, std::vector<double> grades)
      : core_(std::move(core)), grades_(std::move(grades)) {}

  std::shared_ptr<const Core> core_;
  std::vector<double> grades_;  // parallel to core_->edges
};

// One realized grade: clip(f(q + eps) + xi, 0, M). Deterministic given the
// stream state.
double sample_grade(const Strategy& strategy, double quality, double max_grade,
                    RngStream& rng);

// Materializes the review graph for a strategy profile. Each student's
// grades are drawn from a stream keyed by (seed, student, replicate), so a
// student's draws do not depend on other students' strategies.
GradeGraph realize_graph(const std::vector<ReviewPair>& assignment,
                         const std::map<int, double>& qualities,
                         const StrategyProfile& profile, double max_grade,
                         std::uint64_t seed, std::uint64_t replicate = 0);

// Mean and variance of the realized (post-clip) grade at a fixed quality.
// Exact for noise-free strategies; adaptive piecewise quadrature otherwise.
struct BiasVariance {
  double mean = 0.0;
  double variance = 0.0;
};
BiasVariance grade_moments(const Strategy& strategy, double quality,
                           double max_grade);

struct SigmaTruthfulness {
  bool truthful = false;
  double worst_sq_error = 0.0;  // max over the grid of bias^2 + variance
  double worst_quality = 0.0;
};
SigmaTruthfulness is_sigma_truthful(const Strategy& strategy, double sigma,
                                    const std::vector<double>& quality_grid,
                                    double max_grade);

}  // namespace peergrade
