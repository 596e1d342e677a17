#pragma once

#include <utility>
#include <vector>

#include "peergrade/errors.hpp"

namespace peergrade {

// Linear review-cost model: cost in utility units for x hours of reviewing.
struct CostModel {
  double weight = 0.75;  // utility per hour
  double cost_for_hours(double hours) const { return weight * hours; }
  double cost_for_minutes(double minutes) const {
    return weight * minutes / 60.0;
  }
};

// Lower bound on the instructor-review probability that forces all Nash
// equilibria into the sigma-truthful set: sqrt(C / (alpha sigma^2)).
// Values above 1 mean no feasible p exists.
double min_p_for_truthfulness(double cost, double alpha, double sigma);

// Deviation-incentive bound for a fixed-grade profile at distance `gap` from
// the true quality: sqrt(C / (alpha gap^2)). Returns +infinity when gap == 0
// (no deviation incentive is possible at any p).
double deviation_bound_p(double cost, double alpha, double gap);

// Best-response error sequence e_t = (1-p)^{2(t-1)} (D-q)^2 for t = 1..steps.
std::vector<double> convergence_errors(double p, double initial_gap,
                                       int steps);

// Hierarchy honesty condition P > K (H - D), strict as stated.
bool tree_honesty_condition(double punishment, int branching,
                            double honesty_cost, double defect_cost);

// Maximum review cost that keeps truthful play preferable on a review tree:
// (sigma_q^2 + (M - Eq)^2) / K.
double tree_cost_bound(double sigma_q2, double quality_mean, double max_grade,
                       int branching);

// Admissible gamma interval for the variance-penalized loss under review
// cost C; empty when C >= sigma_q^2.
struct GammaRange {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = true;
};
GammaRange gamma_range(double cost, double sigma_q2, double eta2,
                       int reviews_per_student);

// Curve emitters ------------------------------------------------------------

// (minutes, p lower bound) over a minutes grid.
std::vector<std::pair<double, double>> min_p_curve(
    double alpha, double sigma, const CostModel& cost_model,
    const std::vector<double>& minutes_grid);

// (Eq, sigma_q^2 lower bound) with sigma_q^2 = K*C - (M - Eq)^2, floored at 0.
std::vector<std::pair<double, double>> variance_bound_curve(
    double cost, double max_grade, int branching,
    const std::vector<double>& quality_mean_grid);

}  // namespace peergrade
