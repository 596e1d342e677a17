#include "peergrade/io.hpp"

#include "peergrade/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace peergrade {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto a = field.find_first_not_of(" \t\r");
    const auto b = field.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

void expect_header(std::ifstream& in, const std::string& path,
                   const std::string& header) {
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError(path + ": empty file, expected header " + header);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw ConfigError(path + ": expected header '" + header + "', got '" +
                      line + "'");
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not an integer: '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

void write_grade_graph_csv(const GradeGraph& graph, const std::string& path,
                           const std::string& qualities_path) {
  {
    auto out = open_output(path);
    out << "submission_id,student_id,grade\n";
    out.precision(17);
    const auto& edges = graph.edges();
    const auto& grades = graph.grades();
    for (std::size_t e = 0; e < edges.size(); ++e)
      out << edges[e].submission << ',' << edges[e].student << ','
          << grades[e] << '\n';
  }
  auto out = open_output(qualities_path);
  out << "submission_id,quality\n";
  out.precision(17);
  for (const auto& [i, q] : graph.qualities()) out << i << ',' << q << '\n';
}

GradeGraph read_grade_graph_csv(const std::string& path,
                                const std::string& qualities_path,
                                double max_grade) {
  std::vector<ReviewPair> pairs;
  std::vector<double> grades;
  {
    auto in = open_input(path);
    expect_header(in, path, "submission_id,student_id,grade");
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      const std::string where = path + " line " + std::to_string(lineno);
      if (f.size() != 3) throw ConfigError(where + ": expected 3 fields");
      pairs.push_back({parse_int(f[0], where), parse_int(f[1], where)});
      grades.push_back(parse_double(f[2], where));
    }
  }
  std::map<int, double> qualities;
  {
    auto in = open_input(qualities_path);
    expect_header(in, qualities_path, "submission_id,quality");
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      const std::string where =
          qualities_path + " line " + std::to_string(lineno);
      if (f.size() != 2) throw ConfigError(where + ": expected 2 fields");
      qualities[parse_int(f[0], where)] = parse_double(f[1], where);
    }
  }
  return GradeGraph(max_grade, std::move(qualities), std::move(pairs),
                    std::move(grades));
}

void write_assignment_csv(const std::vector<ReviewPair>& pairs,
                          const std::string& path) {
  auto out = open_output(path);
  out << "submission_id,student_id\n";
  for (const ReviewPair& e : pairs)
    out << e.submission << ',' << e.student << '\n';
}

std::vector<ReviewPair> read_assignment_csv(const std::string& path) {
  auto in = open_input(path);
  expect_header(in, path, "submission_id,student_id");
  std::vector<ReviewPair> pairs;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = path + " line " + std::to_string(lineno);
    if (f.size() != 2) throw ConfigError(where + ": expected 2 fields");
    pairs.push_back({parse_int(f[0], where), parse_int(f[1], where)});
  }
  return pairs;
}

void write_loss_report_csv(const LossReport& report, const std::string& path) {
  auto out = open_output(path);
  out << "student_id,total_loss,term1,term2\n";
  out.precision(17);
  for (const auto& e : report.entries) {
    out << e.student << ',' << e.total << ',';
    if (e.components)
      out << e.components->first << ',' << e.components->second;
    else
      out << ',';
    out << '\n';
  }
}

void write_curve_csv(const std::vector<std::pair<double, double>>& curve,
                     const std::string& path) {
  auto out = open_output(path);
  out << "x,value\n";
  out.precision(17);
  for (const auto& [x, v] : curve) out << x << ',' << v << '\n';
}

void write_trajectory_csv(const std::vector<TrajectoryPoint>& trajectory,
                          const std::string& path) {
  auto out = open_output(path);
  out << "round,grade,error\n";
  out.precision(17);
  for (const TrajectoryPoint& p : trajectory)
    out << p.round << ',' << p.grade << ',' << p.error << '\n';
}

std::vector<GradeRecord> read_grade_records_csv(
    const std::string& path, std::vector<std::string>& malformed) {
  auto in = open_input(path);
  expect_header(in, path, "assignment_id,student_id,submission_id,grade");
  std::vector<GradeRecord> records;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    try {
      if (f.size() != 4) throw ConfigError("expected 4 fields");
      if (f[0].empty()) throw ConfigError("empty assignment id");
      GradeRecord r;
      r.assignment_id = f[0];
      r.student = parse_int(f[1], "student_id");
      r.submission = parse_int(f[2], "submission_id");
      r.grade = parse_double(f[3], "grade");
      records.push_back(std::move(r));
    } catch (const ConfigError& err) {
      malformed.push_back("line " + std::to_string(lineno) + ": " +
                          err.what());
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// JSON

json grade_graph_to_json(const GradeGraph& graph) {
  json edges = json::array();
  const auto& es = graph.edges();
  const auto& gs = graph.grades();
  for (std::size_t e = 0; e < es.size(); ++e)
    edges.push_back({{"submission_id", es[e].submission},
                     {"student_id", es[e].student},
                     {"grade", gs[e]}});
  json qualities = json::object();
  for (const auto& [i, q] : graph.qualities())
    qualities[std::to_string(i)] = q;
  return {{"max_grade", graph.max_grade()},
          {"edges", std::move(edges)},
          {"qualities", std::move(qualities)}};
}

GradeGraph grade_graph_from_json(const json& j) {
  if (!j.contains("max_grade") || !j.contains("edges") ||
      !j.contains("qualities"))
    throw ConfigError("grade graph JSON needs max_grade, edges, qualities");
  std::vector<ReviewPair> pairs;
  std::vector<double> grades;
  for (const auto& e : j.at("edges")) {
    pairs.push_back({e.at("submission_id").get<int>(),
                     e.at("student_id").get<int>()});
    grades.push_back(e.at("grade").get<double>());
  }
  std::map<int, double> qualities;
  for (const auto& [k, v] : j.at("qualities").items())
    qualities[parse_int(k, "qualities key")] = v.get<double>();
  return GradeGraph(j.at("max_grade").get<double>(), std::move(qualities),
                    std::move(pairs), std::move(grades));
}

json tree_to_json(const ReviewTree& tree) {
  json nodes = json::array();
  json edges = json::array();
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    const auto& n = tree.nodes[k];
    const char* kind = n.kind == ReviewTree::Kind::instructor ? "instructor"
                       : n.kind == ReviewTree::Kind::student  ? "student"
                                                              : "submission";
    nodes.push_back({{"kind", kind},
                     {"id", n.id},
                     {"level", n.level},
                     {"reviewed", n.reviewed}});
    if (n.parent >= 0)
      edges.push_back({{"parent", n.parent},
                       {"child", static_cast<int>(k)},
                       {"shared_submission", n.shared_with_parent}});
  }
  return {{"branching", tree.branching},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}};
}

ReviewTree tree_from_json(const json& j) {
  ReviewTree tree;
  tree.branching = j.at("branching").get<int>();
  for (const auto& jn : j.at("nodes")) {
    ReviewTree::Node n;
    const std::string kind = jn.at("kind").get<std::string>();
    if (kind == "instructor")
      n.kind = ReviewTree::Kind::instructor;
    else if (kind == "student")
      n.kind = ReviewTree::Kind::student;
    else if (kind == "submission")
      n.kind = ReviewTree::Kind::submission;
    else
      throw ConfigError("unknown tree node kind '" + kind + "'");
    n.id = jn.at("id").get<int>();
    n.level = jn.at("level").get<int>();
    n.reviewed = jn.at("reviewed").get<std::vector<int>>();
    tree.nodes.push_back(std::move(n));
  }
  for (const auto& je : j.at("edges")) {
    const int parent = je.at("parent").get<int>();
    const int child = je.at("child").get<int>();
    if (parent < 0 || parent >= static_cast<int>(tree.nodes.size()) ||
        child < 0 || child >= static_cast<int>(tree.nodes.size()))
      throw ConfigError("tree edge references an unknown node");
    tree.nodes[child].parent = parent;
    tree.nodes[child].shared_with_parent =
        je.at("shared_submission").get<int>();
    tree.nodes[parent].children.push_back(child);
  }
  if (tree.nodes.empty() ||
      tree.nodes[0].kind != ReviewTree::Kind::instructor)
    throw ConfigError("tree JSON must have the instructor at node 0");
  return tree;
}

json loss_report_to_json(const LossReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries) {
    json je = {{"student_id", e.student}, {"total_loss", e.total}};
    if (e.components) {
      je["term1"] = e.components->first;
      je["term2"] = e.components->second;
    }
    entries.push_back(std::move(je));
  }
  return {{"entries", std::move(entries)}};
}

json sim_report_to_json(const SimReport& report) {
  return {{"estimate", report.estimate},
          {"std_error", report.std_error},
          {"replicates", report.replicates},
          {"seed", report.seed},
          {"scenario", report.scenario}};
}

json verdict_to_json(const EquilibriumVerdict& verdict) {
  json j = {{"profile", verdict.profile_descriptor},
            {"cost", verdict.cost}};
  if (verdict.kind == EquilibriumVerdict::Kind::deviation_found) {
    j["verdict"] = "deviation_found";
    j["student"] = verdict.student;
    j["strategy"] = verdict.strategy_label;
    j["gain"] = verdict.gain;
    j["gain_ci_halfwidth"] = 3.0 * verdict.gain_se;
  } else {
    j["verdict"] = "no_profitable_deviation_on_grid";
  }
  return j;
}

namespace {
const char* outcome_name(CheckReport::Outcome o) {
  switch (o) {
    case CheckReport::Outcome::pass:
      return "pass";
    case CheckReport::Outcome::fail:
      return "fail";
    case CheckReport::Outcome::inconclusive:
      return "inconclusive";
  }
  return "?";
}
}  // namespace

json check_report_to_json(const CheckReport& report) {
  return {{"outcome", outcome_name(report.outcome)},
          {"observed", report.observed},
          {"expected", report.expected},
          {"std_error", report.std_error},
          {"detail", report.detail}};
}

json comparison_to_json(const ComparisonReport& report) {
  return {{"outcome", outcome_name(report.outcome)},
          {"gamma_admissible", report.gamma_admissible},
          {"truthful",
           {{"estimate", report.truthful_estimate},
            {"std_error", report.truthful_se},
            {"analytic", report.truthful_analytic}}},
          {"d_eta",
           {{"estimate", report.deta_estimate},
            {"std_error", report.deta_se},
            {"analytic", report.deta_analytic}}},
          {"detail", report.detail}};
}

std::map<std::string, double> read_manifest_json(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.contains("assignments") || !j.at("assignments").is_object())
    throw ConfigError(path + ": manifest needs an 'assignments' object");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.at("assignments").items()) {
    if (!v.is_number())
      throw ConfigError(path + ": assignments." + k + " must be a number");
    out[k] = v.get<double>();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario configuration

Strategy strategy_from_json(const json& j, double max_grade,
                            const std::string& where) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError(where + ": strategy needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  auto num = [&](const char* key) {
    if (!j.contains(key))
      throw ConfigError(where + "." + key + ": missing");
    if (!j.at(key).is_number())
      throw ConfigError(where + "." + key + ": must be a number");
    return j.at(key).get<double>();
  };
  auto shape = [&]() {
    if (!j.contains("shape")) return NoiseShape::gaussian_clipped;
    const std::string s = j.at("shape").get<std::string>();
    if (s == "gaussian") return NoiseShape::gaussian_clipped;
    if (s == "uniform") return NoiseShape::uniform_clipped;
    throw ConfigError(where + ".shape: unknown shape '" + s + "'");
  };
  if (kind == "truthful") return Strategy::truthful(max_grade);
  if (kind == "constant") return Strategy::constant(num("grade"));
  if (kind == "affine")
    return Strategy::affine(num("slope"), num("intercept"), max_grade);
  if (kind == "truthful_noisy")
    return Strategy::truthful_noisy(num("bias"), num("std"), max_grade,
                                    shape());
  if (kind == "constant_noisy")
    return Strategy::constant_noisy(num("grade"), num("std"), shape());
  throw ConfigError(where + ".kind: unknown strategy kind '" + kind + "'");
}

QualityDistribution quality_dist_from_json(const json& j,
                                           const std::string& where) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError(where + ": quality distribution needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  auto num = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_number())
      throw ConfigError(where + "." + key + ": missing or not a number");
    return j.at(key).get<double>();
  };
  if (kind == "uniform")
    return QualityDistribution::uniform_dist(num("lo"), num("hi"));
  if (kind == "gaussian")
    return QualityDistribution::gaussian(num("mean"), num("stddev"),
                                         num("lo"), num("hi"));
  if (kind == "discrete") {
    if (!j.contains("atoms") || !j.at("atoms").is_array())
      throw ConfigError(where + ".atoms: missing or not an array");
    std::vector<std::pair<double, double>> atoms;
    for (const auto& a : j.at("atoms")) {
      if (!a.is_array() || a.size() != 2)
        throw ConfigError(where + ".atoms: each atom is [value, prob]");
      atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
    }
    return QualityDistribution::discrete(std::move(atoms));
  }
  throw ConfigError(where + ".kind: unknown distribution kind '" + kind + "'");
}

ScenarioConfig parse_scenario_config(const json& j) {
  ScenarioConfig cfg;
  auto require = [&](const char* key) -> const json& {
    if (!j.contains(key))
      throw ConfigError(std::string(key) + ": missing required field");
    return j.at(key);
  };

  cfg.scheme = require("scheme").get<std::string>();
  if (cfg.scheme != "l2" && cfg.scheme != "flat" && cfg.scheme != "tree" &&
      cfg.scheme != "var")
    throw ConfigError("scheme: unknown scheme '" + cfg.scheme + "'");

  const json& cls = require("class");
  if (!cls.contains("N") || !cls.contains("m") || !cls.contains("M"))
    throw ConfigError("class: needs N, m, M");
  cfg.num_students = cls.at("N").get<int>();
  cfg.reviews_per_student = cls.at("m").get<int>();
  cfg.max_grade = cls.at("M").get<double>();
  if (cfg.num_students < 2) throw ConfigError("class.N: must be >= 2");
  if (cfg.max_grade <= 0.0) throw ConfigError("class.M: must be > 0");

  cfg.qdist = quality_dist_from_json(require("quality_dist"), "quality_dist");

  const json& strat = require("strategies");
  if (!strat.contains("default"))
    throw ConfigError("strategies.default: missing");
  cfg.profile.default_strategy = strategy_from_json(
      strat.at("default"), cfg.max_grade, "strategies.default");
  if (strat.contains("overrides")) {
    for (const auto& [k, v] : strat.at("overrides").items())
      cfg.profile.overrides[parse_int(k, "strategies.overrides key")] =
          strategy_from_json(v, cfg.max_grade, "strategies.overrides." + k);
  }

  const json& loss = require("loss");
  if (cfg.scheme == "l2") {
    cfg.loss = LossSpec::l2();
  } else if (cfg.scheme == "flat") {
    if (!loss.contains("p") || !loss.contains("alpha"))
      throw ConfigError("loss: flat scheme needs p and alpha");
    cfg.loss = LossSpec::flat(loss.at("p").get<double>(),
                              loss.at("alpha").get<double>());
  } else if (cfg.scheme == "var") {
    if (!loss.contains("gamma"))
      throw ConfigError("loss.gamma: missing for var scheme");
    VarVariant variant = VarVariant::local;
    if (loss.contains("variant")) {
      const std::string v = loss.at("variant").get<std::string>();
      if (v == "local")
        variant = VarVariant::local;
      else if (v == "global")
        variant = VarVariant::global;
      else
        throw ConfigError("loss.variant: unknown variant '" + v + "'");
    }
    cfg.loss = LossSpec::var(loss.at("gamma").get<double>(), variant);
  } else {  // tree
    cfg.loss = LossSpec::tree();
    if (loss.contains("tree_branching"))
      cfg.branching = loss.at("tree_branching").get<int>();
    if (cfg.branching < 1)
      throw ConfigError("loss.tree_branching: must be >= 1");
  }

  if (j.contains("cost")) {
    const json& c = j.at("cost");
    if (c.contains("C")) {
      cfg.cost = c.at("C").get<double>();
    } else if (c.contains("minutes")) {
      CostModel model;
      if (c.contains("weight")) model.weight = c.at("weight").get<double>();
      cfg.cost = model.cost_for_minutes(c.at("minutes").get<double>());
    } else {
      throw ConfigError("cost: needs either C or minutes");
    }
    if (cfg.cost < 0.0) throw ConfigError("cost: must be >= 0");
  }

  if (j.contains("sim")) {
    const json& s = j.at("sim");
    if (s.contains("replicates"))
      cfg.sim.replicates = s.at("replicates").get<long>();
    if (s.contains("seed")) cfg.sim.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("threads")) cfg.sim.threads = s.at("threads").get<int>();
    if (cfg.sim.replicates < 1)
      throw ConfigError("sim.replicates: must be >= 1");
    if (cfg.sim.threads < 1) throw ConfigError("sim.threads: must be >= 1");
  }

  if (j.contains("student")) cfg.student = j.at("student").get<int>();

  if (j.contains("assert")) {
    const json& a = j.at("assert");
    cfg.assert_kind = a.at("kind").get<std::string>();
    if (cfg.assert_kind == "truthful_beats_deta") {
      if (cfg.scheme != "var")
        throw ConfigError("assert.kind: truthful_beats_deta needs scheme var");
      if (!a.contains("eta2"))
        throw ConfigError("assert.eta2: missing");
      cfg.assert_eta2 = a.at("eta2").get<double>();
    } else if (cfg.assert_kind != "equilibrium") {
      throw ConfigError("assert.kind: unknown assertion '" + cfg.assert_kind +
                        "'");
    }
  }

  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    if (o.contains("report"))
      cfg.report_path = o.at("report").get<std::string>();
  }
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return parse_scenario_config(j);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Helpers

std::string read_text_file(const std::string& path) {
  auto in = open_input(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_output(path);
  out << content;
}

}  // namespace peergrade
