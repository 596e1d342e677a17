// peergrade: incentive analysis and simulation for peer-grading schemes.
//
// One binary, several subcommands:
//   bounds    closed-form bound calculators (min-p, workload, gamma, ...)
//   assign    random bipartite review assignment
//   tree      hierarchical review tree construction
//   simulate  Monte Carlo loss estimation from a JSON scenario config
//   check     theorem / lemma checkers (equilibrium, lemma1, lemma2, deta)
//   curves    CSV curve emitters
//   ingest    grade-record statistics (max-grader fractions)
//
// Exit codes: 0 success/pass, 2 usage or config error, 3 inconclusive
// assertion, 4 refuted assertion.

#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "peergrade/bounds.hpp"
#include "peergrade/dynamics.hpp"
#include "peergrade/io.hpp"
#include "peergrade/losses.hpp"

using namespace peergrade;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInconclusive = 3;
constexpr int kExitRefuted = 4;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<double> linspace(double lo, double hi, int points) {
  if (points < 2) throw ConfigError("need at least 2 curve points");
  std::vector<double> xs(points);
  for (int i = 0; i < points; ++i)
    xs[i] = lo + (hi - lo) * i / (points - 1);
  return xs;
}

int outcome_exit(CheckReport::Outcome o) {
  switch (o) {
    case CheckReport::Outcome::pass:
      return kExitOk;
    case CheckReport::Outcome::inconclusive:
      return kExitInconclusive;
    case CheckReport::Outcome::fail:
      return kExitRefuted;
  }
  return kExitUsage;
}

void emit(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!path.empty()) write_text_file(path, text);
}

// ---------------------------------------------------------------------------
// bounds

struct BoundsCli {
  double cost = -1.0, minutes = -1.0, weight = 0.75;
  double alpha = 0.0, sigma = 0.0, gap = 0.0, p = 0.0;
  double punishment = 0.0, honesty_cost = 0.0, defect_cost = 0.0;
  double sigmaq2 = 0.0, eq = 0.0, max_grade = 10.0, target_p = 0.0;
  double eta2 = 0.0;
  double curve_lo = 1.0, curve_hi = 60.0;
  int curve_points = 60, steps = 10;
  int students = 0, reviews = 0, instructor_k = 0, branching = 0, n = 0;
  std::string curve_path, out_path;
  int exit_code = kExitOk;

  void wire(CLI::App& app) {
    app.require_subcommand(1);

    auto* minp = app.add_subcommand(
        "min-p",
        "Instructor-review probability lower bound sqrt(C/(alpha sigma^2)) "
        "that pushes every equilibrium into the sigma-truthful set");
    minp->add_option("--cost", cost, "review cost C in utility units");
    minp->add_option("--minutes", minutes,
                     "review time; C = weight*minutes/60");
    minp->add_option("--weight", weight, "utility per review hour")
        ->capture_default_str();
    minp->add_option("--alpha", alpha, "loss scale alpha")->required();
    minp->add_option("--sigma", sigma, "truthfulness target sigma")
        ->required();
    minp->add_option("--curve", curve_path,
                     "write CSV of the p lower bound over review minutes");
    minp->add_option("--curve-lo", curve_lo)->capture_default_str();
    minp->add_option("--curve-hi", curve_hi)->capture_default_str();
    minp->add_option("--curve-points", curve_points)->capture_default_str();
    minp->callback([this] {
      const CostModel model{weight};
      double c = cost;
      if (c < 0.0) {
        if (minutes < 0.0) throw ConfigError("min-p needs --cost or --minutes");
        c = model.cost_for_minutes(minutes);
      }
      const double bound = min_p_for_truthfulness(c, alpha, sigma);
      std::cout << "p_lower = " << fmt(bound)
                << "   [sqrt(C/(alpha*sigma^2)), C=" << fmt(c) << "]\n";
      if (bound > 1.0) std::cout << "infeasible: bound exceeds 1\n";
      if (!curve_path.empty()) {
        write_curve_csv(min_p_curve(alpha, sigma, model,
                                    linspace(curve_lo, curve_hi, curve_points)),
                        curve_path);
        std::cout << "curve written to " << curve_path << "\n";
      }
    });

    auto* workload = app.add_subcommand(
        "workload",
        "Smallest instructor set size k with coverage probability >= target");
    workload->add_option("--students", students, "class size N")->required();
    workload->add_option("--reviews", reviews, "reviews per student m")
        ->required();
    workload->add_option("--target-p", target_p, "required coverage")
        ->required();
    workload->callback([this] {
      const int k = min_instructor_workload(students, reviews, target_p);
      std::cout << "k = " << k << "   [p(k) = "
                << fmt(coverage_probability(students, reviews, k)) << "]\n";
    });

    auto* coverage = app.add_subcommand(
        "coverage",
        "Probability 1 - C(N-m,k)/C(N,k) that a student shares a reviewed "
        "submission with a size-k instructor sample");
    coverage->add_option("--students", students, "class size N")->required();
    coverage->add_option("--reviews", reviews, "reviews per student m")
        ->required();
    coverage->add_option("--instructor-k", instructor_k, "sample size")
        ->required();
    coverage->callback([this] {
      std::cout << "p = "
                << fmt(coverage_probability(students, reviews, instructor_k))
                << "\n";
    });

    auto* deviation = app.add_subcommand(
        "deviation",
        "Probability bound sqrt(C/(alpha gap^2)) above which deviating from "
        "a constant-grade profile at distance gap pays");
    deviation->add_option("--cost", cost, "review cost C")->required();
    deviation->add_option("--alpha", alpha, "loss scale alpha")->required();
    deviation->add_option("--gap", gap, "|D - q|")->required();
    deviation->callback([this] {
      std::cout << "p_lower = " << fmt(deviation_bound_p(cost, alpha, gap))
                << "\n";
    });

    auto* convergence = app.add_subcommand(
        "convergence",
        "Geometric best-response error sequence e_t = (1-p)^(2(t-1)) gap^2");
    convergence->add_option("--p", p, "instructor-review probability")
        ->required();
    convergence->add_option("--gap", gap, "initial |D - q|")->required();
    convergence->add_option("--steps", steps, "rounds")->capture_default_str();
    convergence->add_option("--out", out_path, "CSV output path");
    convergence->callback([this] {
      const auto errors = convergence_errors(p, gap, steps);
      for (std::size_t t = 0; t < errors.size(); ++t)
        std::cout << "e_" << (t + 1) << " = " << fmt(errors[t]) << "\n";
      if (!out_path.empty()) {
        std::vector<std::pair<double, double>> curve;
        for (std::size_t t = 0; t < errors.size(); ++t)
          curve.emplace_back(static_cast<double>(t + 1), errors[t]);
        write_curve_csv(curve, out_path);
      }
    });

    auto* honesty = app.add_subcommand(
        "tree-honesty", "Hierarchy honesty condition P > K (H - D)");
    honesty->add_option("--punishment", punishment, "punishment P")
        ->required();
    honesty->add_option("--branching", branching, "branching factor K")
        ->required();
    honesty->add_option("--honesty-cost", honesty_cost, "honest cost H")
        ->required();
    honesty->add_option("--defect-cost", defect_cost, "defect cost D")
        ->required();
    honesty->callback([this] {
      const bool ok = tree_honesty_condition(punishment, branching,
                                             honesty_cost, defect_cost);
      std::cout << (ok ? "holds" : "violated") << "   [K(H-D) = "
                << fmt(branching * (honesty_cost - defect_cost)) << "]\n";
      if (!ok) exit_code = kExitRefuted;
    });

    auto* tree_cost = app.add_subcommand(
        "tree-cost",
        "Maximum review cost (sigma_q^2 + (M-Eq)^2)/K keeping truthful play "
        "preferable on a review tree");
    tree_cost->add_option("--sigmaq2", sigmaq2, "quality variance")
        ->required();
    tree_cost->add_option("--eq", eq, "quality mean")->required();
    tree_cost->add_option("--max-grade", max_grade, "grade scale M")
        ->capture_default_str();
    tree_cost->add_option("--branching", branching, "branching factor K")
        ->required();
    tree_cost->callback([this] {
      std::cout << "C_max = "
                << fmt(tree_cost_bound(sigmaq2, eq, max_grade, branching))
                << "\n";
    });

    auto* gamma = app.add_subcommand(
        "gamma",
        "Admissible interval for the variance-penalty weight gamma; empty "
        "when C >= sigma_q^2");
    gamma->add_option("--cost", cost, "review cost C")->required();
    gamma->add_option("--sigmaq2", sigmaq2, "quality variance")->required();
    gamma->add_option("--eta2", eta2, "collusion noise variance eta^2")
        ->required();
    gamma->add_option("--n", n, "reviews per student")->required();
    gamma->callback([this] {
      const GammaRange r = gamma_range(cost, sigmaq2, eta2, n);
      if (r.empty)
        std::cout << "empty: no gamma makes truthful reviewing pay\n";
      else
        std::cout << "(" << fmt(r.lo) << ", " << fmt(r.hi) << ")\n";
    });
  }
};

// ---------------------------------------------------------------------------
// check

struct CheckCli {
  SimOptions opt;
  int students = 10, reviews = 5;
  double max_grade = 10.0;
  double eta2 = 1.0, gamma = 0.5, sigmaq2 = 1.0, cost = 0.0;
  std::string variant_name = "local";
  double bias1 = 0.0, std1 = 0.0, bias2 = 0.0, std2 = 0.0;
  int exit_code = kExitOk;

  void add_sim_flags(CLI::App* cmd) {
    cmd->add_option("--replicates", opt.replicates)->capture_default_str();
    cmd->add_option("--seed", opt.seed)->capture_default_str();
    cmd->add_option("--threads", opt.threads)->capture_default_str();
    cmd->add_option("--students", students)->capture_default_str();
    cmd->add_option("--reviews", reviews)->capture_default_str();
    cmd->add_option("--max-grade", max_grade)->capture_default_str();
  }

  void run_lemma(bool global) {
    const Scenario scenario = Scenario::classroom(
        students, reviews, max_grade,
        QualityDistribution::uniform_dist(max_grade * 0.2, max_grade * 0.8),
        opt.seed);
    const Strategy s1 = Strategy::truthful_noisy(bias1, std1, max_grade);
    const Strategy s2 = Strategy::truthful_noisy(bias2, std2, max_grade);
    const int u = scenario.students().front();
    const CheckReport report =
        global ? verify_lemma_long2(s1, s2, u, scenario, opt)
               : verify_lemma_long1(s1, s2, u, scenario, opt);
    emit(check_report_to_json(report), "");
    exit_code = outcome_exit(report.outcome);
  }

  void wire(CLI::App& app) {
    app.require_subcommand(1);

    auto* deta = app.add_subcommand(
        "deta",
        "Variance-penalized scheme: truthful reviewing beats the "
        "constant-plus-noise collusion D_eta");
    deta->add_option("--eta2", eta2)->capture_default_str();
    deta->add_option("--gamma", gamma)->capture_default_str();
    deta->add_option("--sigmaq2", sigmaq2)->capture_default_str();
    deta->add_option("--cost", cost)->capture_default_str();
    deta->add_option("--variant", variant_name, "local|global")
        ->capture_default_str();
    add_sim_flags(deta);
    deta->callback([this] {
      const VarVariant variant =
          variant_name == "global" ? VarVariant::global : VarVariant::local;
      const ComparisonReport cmp = compare_truthful_vs_deta(
          eta2, gamma, reviews, sigmaq2, variant, cost, students, opt,
          max_grade);
      emit(comparison_to_json(cmp), "");
      exit_code = outcome_exit(cmp.outcome);
    });

    auto* lemma1 = app.add_subcommand(
        "lemma1",
        "Paired E[l2-exclusive] difference equals the bias^2+variance "
        "difference of the two strategies");
    lemma1->add_option("--bias1", bias1)->capture_default_str();
    lemma1->add_option("--std1", std1)->capture_default_str();
    lemma1->add_option("--bias2", bias2)->capture_default_str();
    lemma1->add_option("--std2", std2)->capture_default_str();
    add_sim_flags(lemma1);
    lemma1->callback([this] { run_lemma(false); });

    auto* lemma2 = app.add_subcommand(
        "lemma2",
        "Paired global-variance difference matches the n/K coefficient "
        "formula");
    lemma2->add_option("--bias1", bias1)->capture_default_str();
    lemma2->add_option("--std1", std1)->capture_default_str();
    lemma2->add_option("--bias2", bias2)->capture_default_str();
    lemma2->add_option("--std2", std2)->capture_default_str();
    add_sim_flags(lemma2);
    lemma2->callback([this] { run_lemma(true); });
  }
};

// ---------------------------------------------------------------------------
// simulate

Scenario scenario_from_config(const ScenarioConfig& cfg) {
  if (cfg.scheme == "tree") {
    std::vector<int> submissions(cfg.num_students);
    std::iota(submissions.begin(), submissions.end(), 0);
    std::vector<int> students(cfg.num_students);
    std::iota(students.begin(), students.end(), cfg.num_students);
    const ReviewTree tree =
        build_review_tree(submissions, students, cfg.branching, cfg.sim.seed);
    return Scenario::from_tree(tree, cfg.max_grade, cfg.qdist);
  }
  return Scenario::classroom(cfg.num_students, cfg.reviews_per_student,
                             cfg.max_grade, cfg.qdist, cfg.sim.seed);
}

int run_simulate(const std::string& config_path, std::uint64_t seed_override,
                 bool has_seed, int threads_override) {
  ScenarioConfig cfg = load_scenario_config(config_path);
  if (has_seed) cfg.sim.seed = seed_override;
  if (threads_override > 0) cfg.sim.threads = threads_override;
  const Scenario scenario = scenario_from_config(cfg);

  const int u = cfg.student >= 0 ? cfg.student : scenario.students().front();
  const SimReport report =
      expected_loss(cfg.profile, u, cfg.loss, scenario, cfg.sim);
  json out = sim_report_to_json(report);
  out["student"] = u;

  int exit_code = kExitOk;
  if (cfg.assert_kind == "truthful_beats_deta") {
    const ComparisonReport cmp = compare_truthful_vs_deta(
        cfg.assert_eta2, cfg.loss.gamma, cfg.reviews_per_student,
        cfg.qdist.variance(), cfg.loss.variant, cfg.cost, cfg.num_students,
        cfg.sim, cfg.max_grade);
    out["assertion"] = comparison_to_json(cmp);
    exit_code = outcome_exit(cmp.outcome);
  } else if (cfg.assert_kind == "equilibrium") {
    const StrategyGrid grid = StrategyGrid::constants(cfg.max_grade);
    const EquilibriumVerdict verdict = check_equilibrium(
        cfg.profile, grid, cfg.loss, scenario, cfg.cost, cfg.sim);
    out["assertion"] = verdict_to_json(verdict);
    if (verdict.kind == EquilibriumVerdict::Kind::deviation_found)
      exit_code = kExitRefuted;
  }
  emit(out, cfg.report_path);
  return exit_code;
}

// ---------------------------------------------------------------------------
// ingest

int run_ingest(const std::string& records_path,
               const std::string& manifest_path, const std::string& out_path) {
  std::vector<std::string> malformed;
  const std::vector<GradeRecord> records =
      read_grade_records_csv(records_path, malformed);
  const std::size_t total = records.size() + malformed.size();
  if (total == 0) {
    std::cerr << "error: " << records_path << " has no data rows\n";
    return kExitUsage;
  }
  for (const std::string& m : malformed)
    std::cerr << "warning: " << records_path << " " << m << "\n";
  if (malformed.size() * 10 > total) {
    std::cerr << "error: more than 10% of rows are malformed\n";
    return kExitUsage;
  }
  const auto manifest = read_manifest_json(manifest_path);
  std::vector<std::string> warnings;
  const auto stats = max_grader_stats(records, manifest, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";

  std::ostringstream csv;
  csv << "assignment_id,max_grade_fraction,max_grader_fraction\n";
  csv.precision(17);
  for (const auto& [aid, st] : stats)
    csv << aid << ',' << st.max_grade_fraction << ','
        << st.max_grader_fraction << '\n';
  std::cout << csv.str();
  if (!out_path.empty()) write_text_file(out_path, csv.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "peergrade: incentive bounds and Monte Carlo analysis for peer-grading "
      "schemes (flat supervised, hierarchical, variance-penalized)"};
  app.require_subcommand(1);

  BoundsCli bounds_cli;
  auto* bounds_cmd =
      app.add_subcommand("bounds", "closed-form bound calculators");
  bounds_cli.wire(*bounds_cmd);

  auto* assign_cmd = app.add_subcommand(
      "assign", "random review assignment (m per student, m per submission)");
  int a_students = 0, a_reviews = 0;
  std::uint64_t a_seed = 1;
  std::string a_out;
  assign_cmd->add_option("--students", a_students, "class size N")->required();
  assign_cmd->add_option("--reviews", a_reviews, "reviews per student m")
      ->required();
  assign_cmd->add_option("--seed", a_seed)->capture_default_str();
  assign_cmd->add_option("--out", a_out, "assignment CSV path")->required();
  assign_cmd->callback([&] {
    const BipartiteAssignment a =
        build_assignment(a_students, a_reviews, a_reviews, a_seed);
    write_assignment_csv(a.pairs, a_out);
    std::cout << "wrote " << a.pairs.size() << " review pairs to " << a_out
              << "\n";
  });

  auto* tree_cmd = app.add_subcommand(
      "tree", "instructor-rooted review hierarchy over the submissions");
  int t_submissions = 0, t_branching = 2;
  std::uint64_t t_seed = 1;
  std::string t_out;
  tree_cmd->add_option("--submissions", t_submissions, "leaf count")
      ->required();
  tree_cmd->add_option("--branching", t_branching, "branching factor K")
      ->capture_default_str();
  tree_cmd->add_option("--seed", t_seed)->capture_default_str();
  tree_cmd->add_option("--out", t_out, "tree JSON path")->required();
  tree_cmd->callback([&] {
    std::vector<int> submissions(t_submissions);
    std::iota(submissions.begin(), submissions.end(), 0);
    // plenty of students to close every level; ids start above submissions
    std::vector<int> students(t_submissions);
    std::iota(students.begin(), students.end(), t_submissions);
    const ReviewTree tree =
        build_review_tree(submissions, students, t_branching, t_seed);
    write_text_file(t_out, tree_to_json(tree).dump(2) + "\n");
    std::cout << "wrote " << tree.nodes.size() << " nodes (depth "
              << tree.depth() << ") to " << t_out << "\n";
  });

  auto* sim_cmd =
      app.add_subcommand("simulate", "Monte Carlo scenario from JSON config");
  std::string sim_config;
  std::uint64_t sim_seed = 0;
  int sim_threads = 0;
  sim_cmd->add_option("--config", sim_config, "scenario config JSON")
      ->required();
  auto* sim_seed_opt =
      sim_cmd->add_option("--seed", sim_seed, "override config seed");
  sim_cmd->add_option("--threads", sim_threads, "override config threads");

  CheckCli check_cli;
  auto* check_cmd = app.add_subcommand(
      "check",
      "theorem and lemma checkers (exit 0 pass / 3 inconclusive / 4 refuted)");
  check_cli.wire(*check_cmd);

  auto* curves_cmd = app.add_subcommand("curves", "CSV curve emitters");
  curves_cmd->require_subcommand(1);
  auto* c_minp =
      curves_cmd->add_subcommand("min-p", "p lower bound over review minutes");
  double c_alpha = 0.25, c_sigma = 1.0, c_weight = 0.75;
  double c_lo = 1.0, c_hi = 60.0;
  int c_points = 60;
  std::string c_out;
  c_minp->add_option("--alpha", c_alpha)->capture_default_str();
  c_minp->add_option("--sigma", c_sigma)->capture_default_str();
  c_minp->add_option("--weight", c_weight)->capture_default_str();
  c_minp->add_option("--lo", c_lo, "minutes lower end")->capture_default_str();
  c_minp->add_option("--hi", c_hi, "minutes upper end")->capture_default_str();
  c_minp->add_option("--points", c_points)->capture_default_str();
  c_minp->add_option("--out", c_out)->required();
  c_minp->callback([&] {
    write_curve_csv(min_p_curve(c_alpha, c_sigma, CostModel{c_weight},
                                linspace(c_lo, c_hi, c_points)),
                    c_out);
    std::cout << "wrote " << c_out << "\n";
  });
  auto* c_var = curves_cmd->add_subcommand(
      "variance-bound",
      "required quality variance K*C - (M-Eq)^2 over the quality mean");
  double v_cost = 0.0, v_max = 10.0;
  int v_branching = 5, v_points = 60;
  double v_lo = 0.0, v_hi = 10.0;
  std::string v_out;
  c_var->add_option("--cost", v_cost)->required();
  c_var->add_option("--max-grade", v_max)->capture_default_str();
  c_var->add_option("--branching", v_branching)->capture_default_str();
  c_var->add_option("--lo", v_lo, "Eq lower end")->capture_default_str();
  c_var->add_option("--hi", v_hi, "Eq upper end")->capture_default_str();
  c_var->add_option("--points", v_points)->capture_default_str();
  c_var->add_option("--out", v_out)->required();
  c_var->callback([&] {
    write_curve_csv(variance_bound_curve(v_cost, v_max, v_branching,
                                         linspace(v_lo, v_hi, v_points)),
                    v_out);
    std::cout << "wrote " << v_out << "\n";
  });

  auto* ingest_cmd = app.add_subcommand(
      "ingest", "per-assignment max-grade statistics from grade records");
  std::string i_records, i_manifest, i_out;
  ingest_cmd->add_option("--records", i_records, "grade-record CSV")
      ->required();
  ingest_cmd->add_option("--manifest", i_manifest, "manifest JSON")
      ->required();
  ingest_cmd->add_option("--out", i_out, "stats CSV path");

  try {
    app.parse(argc, argv);
    if (sim_cmd->parsed())
      return run_simulate(sim_config, sim_seed, sim_seed_opt->count() > 0,
                          sim_threads);
    if (ingest_cmd->parsed()) return run_ingest(i_records, i_manifest, i_out);
    if (bounds_cmd->parsed()) return bounds_cli.exit_code;
    if (check_cmd->parsed()) return check_cli.exit_code;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DegenerateInputError& e) {
    std::cerr << "degenerate input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
