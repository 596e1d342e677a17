#include "peergrade/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace peergrade {

double min_p_for_truthfulness(double cost, double alpha, double sigma) {
  if (alpha <= 0.0) throw ConfigError("alpha must be > 0");
  if (cost < 0.0) throw ConfigError("cost must be >= 0");
  if (sigma <= 0.0)
    throw ConfigError("sigma-truthfulness target must be > 0");
  return std::sqrt(cost / (alpha * sigma * sigma));
}

double deviation_bound_p(double cost, double alpha, double gap) {
  if (alpha <= 0.0) throw ConfigError("alpha must be > 0");
  if (cost < 0.0) throw ConfigError("cost must be >= 0");
  if (gap < 0.0) throw ConfigError("gap must be >= 0");
  if (gap == 0.0) {
    // D_i == q_i: reviewers have nothing to gain from deviating.
    return cost == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::sqrt(cost / (alpha * gap * gap));
}

std::vector<double> convergence_errors(double p, double initial_gap,
                                       int steps) {
  if (p < 0.0 || p > 1.0) throw ConfigError("p must be in [0, 1]");
  if (steps < 1) throw ConfigError("need at least one step");
  std::vector<double> errors(steps);
  double gap = initial_gap;  // |D - q| shrinks by (1-p) each round
  for (int t = 0; t < steps; ++t) {
    errors[t] = gap * gap;
    gap *= (1.0 - p);
  }
  return errors;
}

bool tree_honesty_condition(double punishment, int branching,
                            double honesty_cost, double defect_cost) {
  if (branching < 1) throw ConfigError("branching must be >= 1");
  return punishment > branching * (honesty_cost - defect_cost);
}

double tree_cost_bound(double sigma_q2, double quality_mean, double max_grade,
                       int branching) {
  if (branching < 1) throw ConfigError("branching must be >= 1");
  if (quality_mean > max_grade)
    throw ConfigError("quality mean exceeds the grade range");
  const double gap = max_grade - quality_mean;
  return (sigma_q2 + gap * gap) / branching;
}

GammaRange gamma_range(double cost, double sigma_q2, double eta2,
                       int reviews_per_student) {
  const int n = reviews_per_student;
  if (n < 2)
    throw DegenerateInputError(
        "gamma range needs n >= 2 (n/(n-1) undefined at n = 1)");
  if (cost < 0.0 || eta2 < 0.0 || sigma_q2 < 0.0)
    throw ConfigError("cost, eta^2 and sigma_q^2 must be >= 0");

  GammaRange r;
  if (cost >= sigma_q2) return r;  // no admissible gamma

  const double noise_gain = (static_cast<double>(n) / (n - 1)) * eta2;
  if (eta2 < sigma_q2) {
    r.lo = std::max(0.0, (cost - noise_gain) / (sigma_q2 - eta2));
    r.hi = 1.0;
  } else if (eta2 == sigma_q2) {
    r.lo = 0.0;
    r.hi = 1.0;
  } else {
    r.lo = 0.0;
    r.hi = std::min(1.0, (cost - noise_gain) / (sigma_q2 - eta2));
  }
  r.empty = !(r.lo < r.hi);
  return r;
}

std::vector<std::pair<double, double>> min_p_curve(
    double alpha, double sigma, const CostModel& cost_model,
    const std::vector<double>& minutes_grid) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(minutes_grid.size());
  for (double minutes : minutes_grid) {
    curve.emplace_back(
        minutes,
        min_p_for_truthfulness(cost_model.cost_for_minutes(minutes), alpha,
                               sigma));
  }
  return curve;
}

std::vector<std::pair<double, double>> variance_bound_curve(
    double cost, double max_grade, int branching,
    const std::vector<double>& quality_mean_grid) {
  if (branching < 1) throw ConfigError("branching must be >= 1");
  std::vector<std::pair<double, double>> curve;
  curve.reserve(quality_mean_grid.size());
  for (double eq : quality_mean_grid) {
    const double gap = max_grade - eq;
    curve.emplace_back(eq, std::max(0.0, branching * cost - gap * gap));
  }
  return curve;
}

}  // namespace peergrade
