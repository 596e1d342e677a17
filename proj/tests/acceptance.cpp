// Acceptance gate: one line per criterion, nonzero exit if any fail.
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "peergrade/bounds.hpp"
#include "peergrade/dynamics.hpp"
#include "peergrade/io.hpp"

using namespace peergrade;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int number;
  std::string description;
  bool ok = true;
  std::vector<std::string> problems;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      problems.push_back(what);
    }
  }
};

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd =
      std::string(PEERGRADE_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe))
    r.out.append(buf, n);
  const int status = ::pclose(pipe);
  if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  return r;
}

double value_after(const std::string& text, const std::string& token) {
  const auto pos = text.find(token);
  if (pos == std::string::npos) return std::nan("");
  return std::strtod(text.c_str() + pos + token.size(), nullptr);
}

// Criterion 1: classroom headline numbers through the CLI.
void criterion1(Criterion& c) {
  const CliResult minp =
      run_cli("bounds min-p --minutes 5 --alpha 0.25 --sigma 1");
  c.expect(minp.exit_code == 0, "min-p exited " + std::to_string(minp.exit_code));
  c.expect(value_after(minp.out, "p_lower = ") == 0.5,
           "min-p printed " + minp.out);

  const CliResult wl =
      run_cli("bounds workload --students 100 --reviews 5 --target-p 0.5");
  c.expect(wl.exit_code == 0, "workload exited " + std::to_string(wl.exit_code));
  c.expect(value_after(wl.out, "k = ") == 13.0, "workload printed " + wl.out);

  // library-level cross-check with an independent product form of
  // 1 - C(N-m,k)/C(N,k)
  auto coverage_product = [](int n, int m, int k) {
    double q = 1.0;
    for (int j = 0; j < k; ++j) q *= static_cast<double>(n - m - j) / (n - j);
    return 1.0 - q;
  };
  c.expect(std::abs(coverage_probability(100, 5, 13) -
                    coverage_product(100, 5, 13)) <= 1e-9,
           "p(13) disagrees with the product form");
  c.expect(coverage_probability(100, 5, 13) >= 0.5, "p(13) < 0.5");
  c.expect(coverage_probability(100, 5, 12) < 0.5, "p(12) >= 0.5");
  c.expect(min_instructor_workload(100, 5, 0.5) == 13, "workload k != 13");
}

// Criterion 2: coverage probability vs full enumeration of instructor sets.
void criterion2(Criterion& c) {
  for (int n = 1; n <= 20; ++n) {
    const int m_hi = std::min(5, n);
    // hit_count[m][k], total_count[k]
    std::vector<std::vector<long>> hits(m_hi + 1, std::vector<long>(n + 1, 0));
    std::vector<long> totals(n + 1, 0);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      const int k = std::popcount(mask);
      ++totals[k];
      for (int m = 0; m <= m_hi; ++m)
        if (mask & ((1u << m) - 1u)) ++hits[m][k];
    }
    for (int m = 0; m <= m_hi; ++m)
      for (int k = 0; k <= n; ++k) {
        const double brute = static_cast<double>(hits[m][k]) / totals[k];
        const double got = coverage_probability(n, m, k);
        if (std::abs(got - brute) > 1e-12) {
          c.expect(false, "mismatch at N=" + std::to_string(n) +
                              " m=" + std::to_string(m) +
                              " k=" + std::to_string(k));
          return;
        }
      }
  }
}

// Criterion 3: best-response iteration vs the closed-form error sequence.
void criterion3(Criterion& c) {
  const StrategyProfile start{Strategy::constant(8.0), {}};
  for (double p : {0.1, 0.5, 0.9}) {
    const auto traj = iterate_best_response(start, p, 4.0, 10);
    const auto errors = convergence_errors(p, 4.0, 10);
    c.expect(traj.size() == 10 && errors.size() == 10, "wrong length");
    for (int t = 0; t < 10; ++t) {
      const double closed = std::pow(1.0 - p, 2 * t) * 16.0;
      c.expect(std::abs(traj[t].error - closed) <= 1e-9,
               "p=" + std::to_string(p) + " t=" + std::to_string(t + 1) +
                   " error off the closed form");
      c.expect(traj[t].error == errors[t],
               "p=" + std::to_string(p) + " t=" + std::to_string(t + 1) +
                   " differs from convergence_errors");
    }
  }
}

// Criterion 4: deviation checker against the all-M profile, q=6, C=1.
void criterion4(Criterion& c) {
  Scenario sc = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(0.0, 10.0), 1);
  std::map<int, double> q;
  for (int i : sc.submissions) q[i] = 6.0;
  sc.fixed_qualities = q;

  const StrategyProfile all_max{Strategy::constant(10.0), {}};
  const SimOptions opt{100000, 1, 4};
  const double cost = 1.0;

  // p = 0.6: the measured best reply recovers gain alpha p^2 (D-q)^2 - C.
  std::vector<double> slopes, intercepts;
  for (int k = 1; k <= 10; ++k) slopes.push_back(k / 10.0);
  for (double b = 0.0; b <= 10.0 + 1e-9; b += 0.5) intercepts.push_back(b);
  const StrategyGrid grid = StrategyGrid::affine(slopes, intercepts, 10.0);
  const BestResponse br = best_response(grid, all_max, 0,
                                        LossSpec::flat(0.6, 1.0), sc, cost,
                                        opt);
  c.expect(std::abs(br.gain - 4.76) <= 3.0 * br.gain_se + 1e-9,
           "p=0.6 gain " + std::to_string(br.gain) + " != 4.76");
  c.expect(br.gain > cost, "p=0.6 gain not above the review cost");

  // p = 0.3: no constant-grade deviation should be profitable.
  const EquilibriumVerdict v =
      check_equilibrium(all_max, StrategyGrid::constants(10.0),
                        LossSpec::flat(0.3, 1.0), sc, cost, opt, {0});
  c.expect(v.kind == EquilibriumVerdict::Kind::no_profitable_deviation_on_grid,
           "p=0.3 found a profitable constant deviation (" + v.strategy_label +
               ", gain " + std::to_string(v.gain) + ")");
}

// Criterion 5: truthful play on random review trees.
void criterion5(Criterion& c) {
  const SimOptions opt{300, 1, 2};
  const StrategyGrid grid = StrategyGrid::constants(10.0, 0.5);
  int checked_defectors = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (int K : {2, 3}) {
      const int leaves = K == 2 ? 64 : 27;
      std::vector<int> subs(leaves), students(leaves);
      for (int k = 0; k < leaves; ++k) subs[k] = k;
      for (int k = 0; k < leaves; ++k) students[k] = 1000 + k;
      const ReviewTree tree = build_review_tree(subs, students, K, seed);
      const Scenario sc = Scenario::from_tree(
          tree, 10.0, QualityDistribution::uniform_dist(0.0, 9.0));

      const StrategyProfile truthful{Strategy::truthful(10.0), {}};
      const EquilibriumVerdict v = check_equilibrium(
          truthful, grid, LossSpec::tree(), sc, 0.0, opt);
      c.expect(
          v.kind == EquilibriumVerdict::Kind::no_profitable_deviation_on_grid,
          "K=" + std::to_string(K) + " seed=" + std::to_string(seed) +
              ": grid deviation from all-truthful");

      const auto everyone = sc.students();
      for (std::size_t j = 0; j < everyone.size(); j += everyone.size() / 3) {
        const int u = everyone[j];
        StrategyProfile defect = truthful;
        defect.overrides[u] = Strategy::constant(10.0);
        const SimReport r =
            expected_loss(defect, u, LossSpec::tree(), sc, opt);
        c.expect(r.estimate - 3.0 * r.std_error > 0.0,
                 "constant-M defector " + std::to_string(u) +
                     " does not strictly lose (K=" + std::to_string(K) + ")");
        ++checked_defectors;
      }
    }
  }
  c.expect(checked_defectors >= 18, "too few defectors sampled");
}

// Criterion 6: honesty condition vs direct utility comparison; cost bound.
void criterion6(Criterion& c) {
  RngStream rng(2026, 8, 24);
  for (int k = 0; k < 1000; ++k) {
    const double punish = rng.uniform(-5.0, 5.0);
    const double lh = rng.uniform(-5.0, 5.0);
    const double ld = rng.uniform(-5.0, 5.0);
    const int K = 1 + static_cast<int>(rng.uniform_index(6));
    const bool direct = punish > K * (lh - ld);
    if (tree_honesty_condition(punish, K, lh, ld) != direct) {
      c.expect(false, "honesty condition mismatch at sample " +
                          std::to_string(k));
      return;
    }
  }
  c.expect(tree_cost_bound(1.0, 9.5, 10.0, 5) == 0.25,
           "C_max(sigma_q^2=1, Eq=9.5, M=10, K=5) != 0.25");
}

// Criterion 7: truthful vs D_eta across the gamma/eta grid; gamma interval.
void criterion7(Criterion& c) {
  const SimOptions opt{100000, 1, 4};
  for (double gamma : {0.25, 0.5, 0.75})
    for (double eta2 : {0.25, 1.0, 4.0}) {
      const ComparisonReport r = compare_truthful_vs_deta(
          eta2, gamma, 5, 1.0, VarVariant::local, 0.0, 6, opt);
      const std::string tag =
          "gamma=" + std::to_string(gamma) + " eta2=" + std::to_string(eta2);
      c.expect(r.gamma_admissible, tag + ": gamma not admissible");
      c.expect(r.outcome == CheckReport::Outcome::pass,
               tag + ": " + r.detail);
      c.expect(std::abs(r.truthful_estimate - (-gamma)) <=
                   3.0 * r.truthful_se,
               tag + ": truthful estimate off");
      c.expect(std::abs(r.deta_estimate -
                        (5.0 * eta2 / 4.0 - gamma * eta2)) <= 3.0 * r.deta_se,
               tag + ": D_eta estimate off");
    }

  // case split of the admissible interval
  const GammaRange low = gamma_range(0.5, 1.0, 0.0, 5);
  c.expect(!low.empty && low.lo == 0.5 && low.hi == 1.0,
           "eta^2 < sigma_q^2 case");
  const GammaRange eq = gamma_range(0.5, 1.0, 1.0, 5);
  c.expect(!eq.empty && eq.lo == 0.0 && eq.hi == 1.0,
           "eta^2 = sigma_q^2 case");
  const GammaRange high = gamma_range(0.5, 1.0, 2.0, 5);
  c.expect(!high.empty && high.lo == 0.0 && high.hi == 1.0,
           "eta^2 > sigma_q^2 case");
  c.expect(gamma_range(1.0, 1.0, 0.5, 5).empty, "interval at C = sigma_q^2");
}

// Criterion 8: appendix lemma checks, five parameter pairs each.
void criterion8(Criterion& c) {
  const Scenario cls = Scenario::classroom(
      10, 5, 10.0, QualityDistribution::uniform_dist(4.0, 6.0), 3);
  const SimOptions mc{100000, 1, 4};
  const SimOptions tiny{2000, 1, 1};

  struct Pair {
    double b1, v1, b2, v2;
    bool exact;
  };
  const std::vector<Pair> lemma1_pairs = {
      {0.5, 0.5, 0.0, 0.0, false}, {0.0, 1.0, 0.0, 0.0, false},
      {0.5, 0.5, 0.25, 0.25, false}, {0.3, 0.4, 0.3, 0.4, true},
      {0.0, 0.0, 0.3, 0.4, false}};
  for (const Pair& p : lemma1_pairs) {
    const CheckReport r = verify_lemma_long1(
        Strategy::truthful_noisy(p.b1, p.v1, 10.0),
        Strategy::truthful_noisy(p.b2, p.v2, 10.0), 0, cls,
        p.exact ? tiny : mc);
    c.expect(r.outcome == CheckReport::Outcome::pass,
             "lemma 1 (" + std::to_string(p.b1) + "," + std::to_string(p.v1) +
                 ") vs (" + std::to_string(p.b2) + "," + std::to_string(p.v2) +
                 "): " + r.detail);
    if (p.exact)
      c.expect(r.observed == 0.0 && r.std_error == 0.0,
               "identical strategies should cancel exactly");
  }

  // n = K scenario: one student holds all five edges.
  std::vector<ReviewPair> pairs;
  for (int i = 100; i < 105; ++i) pairs.push_back({i, 0});
  const Scenario nk = Scenario::custom(
      pairs, 10.0, QualityDistribution::uniform_dist(4.0, 6.0));

  struct Combo {
    const Scenario* sc;
    double b1, v1;
    bool exact;
  };
  const std::vector<Combo> lemma2_combos = {{&cls, 0.0, 1.0, false},
                                            {&cls, 1.0, 0.0, false},
                                            {&cls, 0.5, 0.5, false},
                                            {&nk, 1.0, 0.0, true},
                                            {&nk, 0.0, 1.0, false}};
  for (const Combo& k : lemma2_combos) {
    const CheckReport r = verify_lemma_long2(
        Strategy::truthful_noisy(k.b1, k.v1, 10.0), Strategy::truthful(10.0),
        0, *k.sc, k.exact ? tiny : mc);
    c.expect(r.outcome == CheckReport::Outcome::pass,
             "lemma 2 (" + std::to_string(k.b1) + "," + std::to_string(k.v1) +
                 "): " + r.detail);
    if (k.exact)
      c.expect(r.expected == 0.0 && std::abs(r.observed) <= 1e-12,
               "bias coefficient should vanish at n = K");
  }
}

// Criterion 9: synthetic ingest fixtures and curve shapes.
void criterion9(Criterion& c) {
  // planted max-grader fractions through the library
  std::vector<GradeRecord> recs;
  for (int u = 0; u < 10; ++u)
    for (int i = 0; i < 3; ++i)
      recs.push_back({"hw1", u, i, (u < 3) ? 10.0 : 5.0});
  for (int u = 0; u < 4; ++u) recs.push_back({"hw2", u, 0, 100.0});
  const auto stats = max_grader_stats(recs, {{"hw1", 10.0}, {"hw2", 100.0}});
  c.expect(stats.at("hw1").max_grader_fraction == 0.3,
           "planted 3-of-10 fraction not recovered exactly");
  c.expect(stats.at("hw2").max_grader_fraction == 1.0,
           "all-max fixture not recovered exactly");

  // the same fixture through the CLI
  const fs::path dir =
      fs::temp_directory_path() / ("peergrade-acc-" + std::to_string(getpid()));
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "records.csv");
    out << "assignment_id,student_id,submission_id,grade\n";
    for (const GradeRecord& r : recs)
      out << r.assignment_id << ',' << r.student << ',' << r.submission << ','
          << r.grade << '\n';
  }
  {
    std::ofstream out(dir / "manifest.json");
    out << R"({"assignments": {"hw1": 10, "hw2": 100}})";
  }
  const CliResult cli =
      run_cli("ingest --records " + (dir / "records.csv").string() +
              " --manifest " + (dir / "manifest.json").string());
  c.expect(cli.exit_code == 0, "ingest exited " + std::to_string(cli.exit_code));
  {
    const auto pos = cli.out.find("hw1,");
    c.expect(pos != std::string::npos, "ingest CSV missing hw1: " + cli.out);
    if (pos != std::string::npos) {
      char* rest = nullptr;
      const double grade_frac =
          std::strtod(cli.out.c_str() + pos + 4, &rest);
      const double grader_frac = std::strtod(rest + 1, nullptr);
      c.expect(grade_frac == 9.0 / 30.0 && grader_frac == 3.0 / 10.0,
               "ingest CSV hw1 fractions wrong: " + cli.out);
    }
  }
  c.expect(cli.out.find("hw2,1,1") != std::string::npos,
           "ingest CSV missing the all-max hw2 row: " + cli.out);
  fs::remove_all(dir);

  // min-p curve: monotone sqrt growth, p = 1 where C = alpha sigma^2
  const CostModel cm;
  const auto minp = min_p_curve(0.25, 1.0, cm, {5.0, 10.0, 20.0, 45.0, 80.0});
  for (std::size_t k = 1; k < minp.size(); ++k)
    c.expect(minp[k].second > minp[k - 1].second, "min-p curve not increasing");
  c.expect(minp[2].second == 1.0, "p bound at 20 minutes should be exactly 1");
  c.expect(std::abs(minp[2].second / minp[0].second - 2.0) <= 1e-12,
           "quadrupling minutes should double the bound");

  // variance bound curve: flat at 0, then quadratic rise to K*C at Eq = M
  const auto var1 = variance_bound_curve(1.0, 10.0, 4, {0.0, 6.0, 8.0, 9.0, 10.0});
  c.expect(var1.front().second == 0.0, "variance bound not floored at 0");
  for (std::size_t k = 1; k < var1.size(); ++k)
    c.expect(var1[k].second >= var1[k - 1].second,
             "variance bound curve not monotone");
  c.expect(var1.back().second == 4.0, "vertex at Eq = M should equal K*C");
  const auto var2 = variance_bound_curve(2.0, 10.0, 4, {10.0});
  c.expect(var2.front().second == 8.0, "vertex should be linear in K*C");
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "classroom example: min-p 0.5 and workload k=13 via the CLI"},
      {2, "coverage probability matches brute-force enumeration (N<=20)"},
      {3, "best-response errors follow (1-p)^{2(t-1)} gap^2 exactly"},
      {4, "flat-scheme deviation gains at p=0.6 / p=0.3 around the bound"},
      {5, "truthful play is stable on random review trees"},
      {6, "tree honesty condition and cost bound"},
      {7, "truthful beats D_eta across the gamma/eta^2 grid"},
      {8, "paired lemma checks incl. the exact n=K case"},
      {9, "ingest recovers planted fractions; curves have the right shape"},
  };

  criterion1(criteria[0]);
  criterion2(criteria[1]);
  criterion3(criteria[2]);
  criterion4(criteria[3]);
  criterion5(criteria[4]);
  criterion6(criteria[5]);
  criterion7(criteria[6]);
  criterion8(criteria[7]);
  criterion9(criteria[8]);

  int failures = 0;
  for (const Criterion& c : criteria) {
    std::cout << "ACCEPTANCE " << c.number << ": "
              << (c.ok ? "PASS" : "FAIL") << " - " << c.description << "\n";
    for (const std::string& p : c.problems)
      std::cout << "    " << p << "\n";
    if (!c.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
