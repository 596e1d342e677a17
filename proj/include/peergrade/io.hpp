#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "peergrade/assignment.hpp"
#include "peergrade/dynamics.hpp"
#include "peergrade/losses.hpp"
#include "peergrade/model.hpp"

namespace peergrade {

// CSV ------------------------------------------------------------------------

// `submission_id,student_id,grade` plus a `submission_id,quality` sidecar.
void write_grade_graph_csv(const GradeGraph& graph, const std::string& path,
                           const std::string& qualities_path);
GradeGraph read_grade_graph_csv(const std::string& path,
                                const std::string& qualities_path,
                                double max_grade);

// `submission_id,student_id`
void write_assignment_csv(const std::vector<ReviewPair>& pairs,
                          const std::string& path);
std::vector<ReviewPair> read_assignment_csv(const std::string& path);

// `student_id,total_loss,term1,term2` (term columns empty when absent)
void write_loss_report_csv(const LossReport& report, const std::string& path);

// `x,value`
void write_curve_csv(const std::vector<std::pair<double, double>>& curve,
                     const std::string& path);

// `round,grade,error`
void write_trajectory_csv(const std::vector<TrajectoryPoint>& trajectory,
                          const std::string& path);

// `assignment_id,student_id,submission_id,grade`. Malformed rows are
// collected as "line N: reason" instead of aborting the parse.
std::vector<GradeRecord> read_grade_records_csv(
    const std::string& path, std::vector<std::string>& malformed);

// JSON -----------------------------------------------------------------------

nlohmann::json grade_graph_to_json(const GradeGraph& graph);
GradeGraph grade_graph_from_json(const nlohmann::json& j);

nlohmann::json tree_to_json(const ReviewTree& tree);
ReviewTree tree_from_json(const nlohmann::json& j);

nlohmann::json loss_report_to_json(const LossReport& report);
nlohmann::json sim_report_to_json(const SimReport& report);
nlohmann::json verdict_to_json(const EquilibriumVerdict& verdict);
nlohmann::json check_report_to_json(const CheckReport& report);
nlohmann::json comparison_to_json(const ComparisonReport& report);

// Manifest mapping assignment_id -> max grade:
// {"assignments": {"hw1": 10, ...}}
std::map<std::string, double> read_manifest_json(const std::string& path);

// Scenario configuration -----------------------------------------------------

// Parsed form of the simulate/check config document (schema in
// docs/scenario.schema.json). Parse errors name the offending field.
struct ScenarioConfig {
  std::string scheme;  // "l2" | "flat" | "tree" | "var"
  int num_students = 0;
  int reviews_per_student = 0;
  double max_grade = 10.0;
  int branching = 2;  // tree scheme
  QualityDistribution qdist;
  StrategyProfile profile;
  LossSpec loss;
  double cost = 0.0;
  SimOptions sim;
  int student = -1;  // whose loss to estimate; -1 = first student
  std::string assert_kind;  // "", "truthful_beats_deta", "equilibrium"
  double assert_eta2 = 0.0;
  std::string report_path;  // empty = stdout only
};

Strategy strategy_from_json(const nlohmann::json& j, double max_grade,
                            const std::string& where);
QualityDistribution quality_dist_from_json(const nlohmann::json& j,
                                           const std::string& where);
ScenarioConfig parse_scenario_config(const nlohmann::json& j);
ScenarioConfig load_scenario_config(const std::string& path);

// Helpers --------------------------------------------------------------------

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace peergrade
