#include "peergrade/dynamics.hpp"

#include "peergrade/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

namespace peergrade {

namespace {

// Running mean / M2 (Welford). Merging partial accumulators in a fixed order
// keeps the result independent of how replicates were scheduled.
struct Accum {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Accum& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double d = o.mean - mean;
    const long total = n + o.n;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * (static_cast<double>(n) * o.n / total);
    n = total;
  }
  double std_error() const {
    if (n < 2) return 0.0;
    return std::sqrt(m2 / (n - 1) / n);
  }
};

constexpr long kBlock = 1024;

long num_blocks(long replicates) { return (replicates + kBlock - 1) / kBlock; }

// Runs body(block, first_replicate, last_replicate) over all blocks, on up
// to `threads` workers. Exceptions are rethrown on the caller's thread.
void run_blocks(long replicates, int threads,
                const std::function<void(long, long, long)>& body) {
  const long nblocks = num_blocks(replicates);
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const long b = next.fetch_add(1);
      if (b >= nblocks) return;
      try {
        body(b, b * kBlock, std::min(replicates, (b + 1) * kBlock));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int nw = std::min<long>(threads, nblocks);
    pool.reserve(nw);
    for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

std::set<int> sample_instructor_set(const std::vector<int>& submissions,
                                    double p, std::uint64_t seed,
                                    std::uint64_t replicate) {
  RngStream rng(seed, kInstructorEntity, replicate);
  std::set<int> out;
  for (int i : submissions)
    if (rng.bernoulli(p)) out.insert(i);
  return out;
}

// One student's loss on a realized graph, for any scheme. The instructor
// set, when the spec samples one per run, is passed in.
double student_loss(const GradeGraph& graph, const LossSpec& spec,
                    const ReviewTree* tree, int u,
                    const std::set<int>* instructor_set) {
  switch (spec.scheme) {
    case LossSpec::Scheme::l2:
      return loss_l2(graph, u);
    case LossSpec::Scheme::flat:
      if (spec.realized) {
        if (!instructor_set)
          throw ConfigError("realized flat loss needs an instructor set");
        return loss_flat_realized(graph, u, spec.alpha, *instructor_set);
      }
      return loss_flat(graph, u, spec.p, spec.alpha);
    case LossSpec::Scheme::var:
      return loss_var(graph, u, spec.gamma, spec.variant).total;
    case LossSpec::Scheme::tree: {
      if (!tree) throw ConfigError("tree loss requires a review tree");
      const auto idx = tree->node_of_student(u);
      if (!idx)
        throw ConfigError("student " + std::to_string(u) +
                          " is not in the review tree");
      return loss_tree(*tree, graph, *idx);
    }
  }
  throw ConfigError("unknown loss scheme");
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario

Scenario Scenario::classroom(int num_students, int reviews_per_student,
                             double max_grade, QualityDistribution qdist,
                             std::uint64_t seed) {
  BipartiteAssignment a = build_assignment(num_students, reviews_per_student,
                                           reviews_per_student, seed);
  Scenario s;
  s.descriptor = "classroom(N=" + std::to_string(num_students) +
                 ",m=" + std::to_string(reviews_per_student) +
                 ",M=" + format_double(max_grade) + ")";
  s.max_grade = max_grade;
  s.pairs = std::move(a.pairs);
  s.qdist = std::move(qdist);
  std::set<int> subs;
  for (const ReviewPair& e : s.pairs) subs.insert(e.submission);
  s.submissions.assign(subs.begin(), subs.end());
  return s;
}

Scenario Scenario::custom(std::vector<ReviewPair> pairs, double max_grade,
                          QualityDistribution qdist) {
  if (pairs.empty()) throw ConfigError("scenario needs at least one review");
  Scenario s;
  s.descriptor = "custom(" + std::to_string(pairs.size()) + " reviews)";
  s.max_grade = max_grade;
  s.pairs = std::move(pairs);
  s.qdist = std::move(qdist);
  std::set<int> subs;
  for (const ReviewPair& e : s.pairs) subs.insert(e.submission);
  s.submissions.assign(subs.begin(), subs.end());
  return s;
}

Scenario Scenario::from_tree(ReviewTree tree, double max_grade,
                             QualityDistribution qdist) {
  Scenario s;
  s.max_grade = max_grade;
  s.qdist = std::move(qdist);
  std::set<int> subs;
  for (const ReviewTree::Node& node : tree.nodes) {
    if (node.kind == ReviewTree::Kind::submission) subs.insert(node.id);
    if (node.kind != ReviewTree::Kind::student) continue;
    for (int i : node.reviewed) s.pairs.push_back({i, node.id});
  }
  if (s.pairs.empty())
    throw ConfigError("review tree has no student reviewers");
  s.submissions.assign(subs.begin(), subs.end());
  s.descriptor = "tree(K=" + std::to_string(tree.branching) + "," +
                 std::to_string(s.submissions.size()) + " leaves)";
  s.tree = std::move(tree);
  return s;
}

std::map<int, double> Scenario::qualities_for(std::uint64_t seed,
                                              std::uint64_t replicate) const {
  if (fixed_qualities) return *fixed_qualities;
  RngStream rng(seed, kQualityEntity, replicate);
  std::map<int, double> q;
  for (int i : submissions) q[i] = qdist.sample(rng);
  return q;
}

std::vector<int> Scenario::students() const {
  std::set<int> ids;
  for (const ReviewPair& e : pairs) ids.insert(e.student);
  return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// StrategyGrid

StrategyGrid StrategyGrid::constants(double max_grade, double step) {
  if (max_grade <= 0.0) throw ConfigError("max grade must be > 0");
  if (step <= 0.0) step = max_grade / 100.0;
  StrategyGrid g;
  for (double d = 0.0; d < max_grade + step * 0.5; d += step) {
    const double v = std::min(d, max_grade);
    g.strategies.push_back(Strategy::constant(v));
    g.labels.push_back("constant(" + format_double(v) + ")");
  }
  g.strategies.push_back(Strategy::truthful(max_grade));
  g.labels.push_back("truthful");
  g.truthful_index = static_cast<int>(g.strategies.size()) - 1;
  return g;
}

StrategyGrid StrategyGrid::affine(const std::vector<double>& slopes,
                                  const std::vector<double>& intercepts,
                                  double max_grade) {
  if (slopes.empty() || intercepts.empty())
    throw ConfigError("affine grid needs non-empty slope and intercept grids");
  StrategyGrid g;
  for (double a : slopes)
    for (double b : intercepts) {
      g.strategies.push_back(Strategy::affine(a, b, max_grade));
      g.labels.push_back("affine(" + format_double(a) + "," +
                         format_double(b) + ")");
      if (a == 1.0 && b == 0.0)
        g.truthful_index = static_cast<int>(g.strategies.size()) - 1;
    }
  if (g.truthful_index < 0) {
    g.strategies.push_back(Strategy::truthful(max_grade));
    g.labels.push_back("truthful");
    g.truthful_index = static_cast<int>(g.strategies.size()) - 1;
  }
  return g;
}

StrategyGrid StrategyGrid::truthful_plus_noise(
    const std::vector<double>& biases, const std::vector<double>& stds,
    double max_grade, NoiseShape shape) {
  if (biases.empty() || stds.empty())
    throw ConfigError("noise grid needs non-empty bias and std grids");
  StrategyGrid g;
  for (double b : biases)
    for (double v : stds) {
      if (v < 0.0) throw ConfigError("noise std must be >= 0");
      g.strategies.push_back(Strategy::truthful_noisy(b, v, max_grade, shape));
      g.labels.push_back("truthful+noise(b=" + format_double(b) +
                         ",v=" + format_double(v) + ")");
      if (b == 0.0 && v == 0.0)
        g.truthful_index = static_cast<int>(g.strategies.size()) - 1;
    }
  if (g.truthful_index < 0) {
    g.strategies.push_back(Strategy::truthful(max_grade));
    g.labels.push_back("truthful");
    g.truthful_index = static_cast<int>(g.strategies.size()) - 1;
  }
  return g;
}

// ---------------------------------------------------------------------------
// expected_loss

SimReport expected_loss(const StrategyProfile& profile, int u,
                        const LossSpec& spec, const Scenario& scenario,
                        const SimOptions& opt) {
  if (opt.replicates < 1) throw ConfigError("need at least one replicate");
  const ReviewTree* tree = scenario.tree ? &*scenario.tree : nullptr;
  const bool sample_set =
      spec.scheme == LossSpec::Scheme::flat && spec.realized &&
      !spec.instructor_set;

  std::vector<Accum> blocks(num_blocks(opt.replicates));
  run_blocks(opt.replicates, opt.threads, [&](long b, long first, long last) {
    Accum acc;
    for (long r = first; r < last; ++r) {
      const auto qualities = scenario.qualities_for(opt.seed, r);
      const GradeGraph graph = realize_graph(
          scenario.pairs, qualities, profile, scenario.max_grade, opt.seed, r);
      const std::set<int>* set_ptr = nullptr;
      std::set<int> sampled;
      if (spec.scheme == LossSpec::Scheme::flat && spec.realized) {
        if (sample_set) {
          sampled =
              sample_instructor_set(scenario.submissions, spec.p, opt.seed, r);
          set_ptr = &sampled;
        } else {
          set_ptr = &*spec.instructor_set;
        }
      }
      acc.add(student_loss(graph, spec, tree, u, set_ptr));
    }
    blocks[b] = acc;
  });

  Accum total;
  for (const Accum& a : blocks) total.merge(a);
  SimReport report;
  report.estimate = total.mean;
  report.std_error = total.std_error();
  report.replicates = total.n;
  report.seed = opt.seed;
  report.scenario = scenario.descriptor;
  return report;
}

// ---------------------------------------------------------------------------
// best_response

namespace {

// Per-replicate environment seen by student u: everything the candidate
// loss depends on except u's own grades.
struct ReplicateContext {
  std::vector<double> quality;    // per submission of u, sorted order
  std::vector<double> peer_sum;   // other reviewers' grade sum
  std::vector<int> reviewer_cnt;  // total reviewers including u
  double others_sum = 0.0, others_sumsq = 0.0;
  long others_cnt = 0;
  double parent_grade = 0.0;
  int shared_pos = -1;
  // common random draws for noisy candidates, one tuple per submission
  std::vector<double> zn_eps, zn_xi, un_eps, un_xi;
};

// Realized grade for candidate s on slot j, using the context's common
// draws (same arithmetic as sample_grade).
double candidate_grade(const Strategy& s, const ReplicateContext& ctx, int j,
                       double max_grade) {
  double eps = 0.0;
  double xi = s.voluntary_noise_mean;
  switch (s.noise_shape) {
    case NoiseShape::none:
      break;
    case NoiseShape::gaussian_clipped:
      if (s.measurement_noise_std > 0.0)
        eps = s.measurement_noise_std * ctx.zn_eps[j];
      if (s.voluntary_noise_std > 0.0)
        xi += s.voluntary_noise_std * ctx.zn_xi[j];
      break;
    case NoiseShape::uniform_clipped: {
      const double we = s.measurement_noise_std * std::sqrt(3.0);
      const double wv = s.voluntary_noise_std * std::sqrt(3.0);
      if (we > 0.0) eps = we * ctx.un_eps[j];
      if (wv > 0.0) xi += wv * ctx.un_xi[j];
      break;
    }
  }
  const double perceived = clamp_grade(ctx.quality[j] + eps, max_grade);
  return clamp_grade(s.quality_map(perceived) + xi, max_grade);
}

double candidate_loss(const Strategy& s, const ReplicateContext& ctx,
                      const LossSpec& spec, double max_grade,
                      std::vector<double>& grades) {
  const std::size_t n = ctx.quality.size();
  grades.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    grades[j] = candidate_grade(s, ctx, static_cast<int>(j), max_grade);

  switch (spec.scheme) {
    case LossSpec::Scheme::l2: {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double consensus =
            (ctx.peer_sum[j] + grades[j]) / ctx.reviewer_cnt[j];
        const double d = grades[j] - consensus;
        acc += d * d;
      }
      return acc / n;
    }
    case LossSpec::Scheme::flat: {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = grades[j];
        const double qd = g - ctx.quality[j];
        double pd = 0.0;
        if (spec.p < 1.0) {
          if (ctx.reviewer_cnt[j] < 2)
            throw DegenerateInputError(
                "submission has a single reviewer; exclusive consensus "
                "undefined");
          pd = g - ctx.peer_sum[j] / (ctx.reviewer_cnt[j] - 1);
        }
        acc += spec.alpha * ((1.0 - spec.p) * pd * pd + spec.p * qd * qd);
      }
      return acc / n;
    }
    case LossSpec::Scheme::var: {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (ctx.reviewer_cnt[j] < 2)
          throw DegenerateInputError(
              "submission has a single reviewer; exclusive consensus "
              "undefined");
        const double pd =
            grades[j] - ctx.peer_sum[j] / (ctx.reviewer_cnt[j] - 1);
        acc += pd * pd;
      }
      const double agreement = acc / n;
      double sigma_hat2;
      if (spec.variant == VarVariant::local) {
        if (n < 2)
          throw DegenerateInputError("local variance needs at least 2 reviews");
        double mean = 0.0;
        for (double g : grades) mean += g;
        mean /= n;
        double ss = 0.0;
        for (double g : grades) {
          const double d = g - mean;
          ss += d * d;
        }
        sigma_hat2 = ss / (n - 1);
      } else {
        double sum = ctx.others_sum, sumsq = ctx.others_sumsq;
        for (double g : grades) {
          sum += g;
          sumsq += g * g;
        }
        const long total = ctx.others_cnt + static_cast<long>(n);
        if (total < 2)
          throw DegenerateInputError("global variance needs at least 2 grades");
        const double mean = sum / total;
        sigma_hat2 = (sumsq - total * mean * mean) / (total - 1);
      }
      return agreement - spec.gamma * sigma_hat2;
    }
    case LossSpec::Scheme::tree: {
      const double d = ctx.parent_grade - grades[ctx.shared_pos];
      return d * d;
    }
  }
  throw ConfigError("unknown loss scheme");
}

}  // namespace

BestResponse best_response(const StrategyGrid& grid,
                           const StrategyProfile& opponents, int u,
                           const LossSpec& spec, const Scenario& scenario,
                           double cost, const SimOptions& opt) {
  if (grid.strategies.empty()) throw ConfigError("empty strategy grid");
  if (opt.replicates < 1) throw ConfigError("need at least one replicate");
  const ReviewTree* tree = scenario.tree ? &*scenario.tree : nullptr;
  const std::size_t ncand = grid.size();
  const double M = scenario.max_grade;

  if (spec.scheme == LossSpec::Scheme::flat && spec.realized)
    throw ConfigError(
        "best_response supports the expected-form flat loss only");

  // Tree bookkeeping resolved once.
  int shared_submission = -1, parent_id = -1;
  bool parent_is_instructor = false;
  if (spec.scheme == LossSpec::Scheme::tree) {
    if (!tree) throw ConfigError("tree loss requires a review tree");
    const auto idx = tree->node_of_student(u);
    if (!idx)
      throw ConfigError("student " + std::to_string(u) +
                        " is not in the review tree");
    const ReviewTree::Node& node = tree->nodes[*idx];
    shared_submission = node.shared_with_parent;
    if (shared_submission < 0)
      throw DegenerateInputError("node has no shared submission with parent");
    const ReviewTree::Node& parent = tree->nodes[node.parent];
    parent_is_instructor = parent.kind == ReviewTree::Kind::instructor;
    parent_id = parent.id;
  }

  bool needs_noise = false;
  for (const Strategy& s : grid.strategies)
    if (s.noise_shape != NoiseShape::none &&
        (s.measurement_noise_std > 0.0 || s.voluntary_noise_std > 0.0))
      needs_noise = true;
  const bool needs_global = spec.scheme == LossSpec::Scheme::var &&
                            spec.variant == VarVariant::global;

  const long nblocks = num_blocks(opt.replicates);
  std::vector<std::vector<Accum>> obj_blocks(
      nblocks, std::vector<Accum>(ncand));
  std::vector<std::vector<Accum>> gain_blocks(
      nblocks, std::vector<Accum>(ncand));

  run_blocks(opt.replicates, opt.threads, [&](long b, long first, long last) {
    std::vector<Accum> obj(ncand), gain(ncand);
    ReplicateContext ctx;
    std::vector<double> grades;
    for (long r = first; r < last; ++r) {
      const auto qualities = scenario.qualities_for(opt.seed, r);
      const GradeGraph graph =
          realize_graph(scenario.pairs, qualities, opponents, M, opt.seed, r);
      const auto& subs = graph.submissions_of(u);
      const std::size_t n = subs.size();
      ctx.quality.resize(n);
      ctx.peer_sum.resize(n);
      ctx.reviewer_cnt.resize(n);
      ctx.shared_pos = -1;
      for (std::size_t j = 0; j < n; ++j) {
        const int i = subs[j];
        ctx.quality[j] = graph.quality(i);
        const auto& reviewers = graph.reviewers_of(i);
        double sum = 0.0;
        for (int v : reviewers)
          if (v != u) sum += graph.grade(i, v);
        ctx.peer_sum[j] = sum;
        ctx.reviewer_cnt[j] = static_cast<int>(reviewers.size());
        if (i == shared_submission) ctx.shared_pos = static_cast<int>(j);
      }
      if (needs_global) {
        ctx.others_sum = ctx.others_sumsq = 0.0;
        ctx.others_cnt = 0;
        const auto& edges = graph.edges();
        const auto& all = graph.grades();
        for (std::size_t e = 0; e < edges.size(); ++e) {
          if (edges[e].student == u) continue;
          ctx.others_sum += all[e];
          ctx.others_sumsq += all[e] * all[e];
          ++ctx.others_cnt;
        }
      }
      if (spec.scheme == LossSpec::Scheme::tree) {
        if (ctx.shared_pos < 0)
          throw ConfigError("shared submission missing from u's review set");
        ctx.parent_grade = parent_is_instructor
                               ? graph.quality(shared_submission)
                               : graph.grade(shared_submission, parent_id);
      }
      if (needs_noise) {
        // Common random numbers: every candidate sees the same primitive
        // draws, so differences between candidates are paired.
        RngStream rng(opt.seed, (1ULL << 32) + static_cast<std::uint64_t>(u),
                      r);
        ctx.zn_eps.resize(n);
        ctx.zn_xi.resize(n);
        ctx.un_eps.resize(n);
        ctx.un_xi.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
          ctx.zn_eps[j] = rng.normal(0.0, 1.0);
          ctx.zn_xi[j] = rng.normal(0.0, 1.0);
          ctx.un_eps[j] = rng.uniform(-1.0, 1.0);
          ctx.un_xi[j] = rng.uniform(-1.0, 1.0);
        }
      }

      const Strategy& incumbent = opponents.resolve(u);
      const double incumbent_obj =
          student_loss(graph, spec, tree, u, nullptr) +
          (incumbent.requires_measurement() ? cost : 0.0);
      for (std::size_t c = 0; c < ncand; ++c) {
        const Strategy& s = grid.strategies[c];
        const double o = candidate_loss(s, ctx, spec, M, grades) +
                         (s.requires_measurement() ? cost : 0.0);
        obj[c].add(o);
        gain[c].add(incumbent_obj - o);
      }
    }
    obj_blocks[b] = std::move(obj);
    gain_blocks[b] = std::move(gain);
  });

  std::vector<Accum> obj(ncand), gain(ncand);
  for (long b = 0; b < nblocks; ++b)
    for (std::size_t c = 0; c < ncand; ++c) {
      obj[c].merge(obj_blocks[b][c]);
      gain[c].merge(gain_blocks[b][c]);
    }

  int best = -1;
  double best_mean = 0.0;
  for (std::size_t c = 0; c < ncand; ++c) {
    if (best < 0 || obj[c].mean < best_mean) {
      best = static_cast<int>(c);
      best_mean = obj[c].mean;
    } else if (obj[c].mean == best_mean &&
               static_cast<int>(c) == grid.truthful_index) {
      best = static_cast<int>(c);  // ties go to the truthful strategy
    }
  }

  BestResponse out;
  out.best_index = best;
  out.strategy = grid.strategies[best];
  out.label = grid.labels[best];
  out.objective = obj[best].mean;
  out.objective_se = obj[best].std_error();
  out.gain = gain[best].mean;
  out.gain_se = gain[best].std_error();
  out.incumbent_objective = obj[best].mean + gain[best].mean;
  out.objectives.resize(ncand);
  for (std::size_t c = 0; c < ncand; ++c) out.objectives[c] = obj[c].mean;
  return out;
}

EquilibriumVerdict check_equilibrium(const StrategyProfile& profile,
                                     const StrategyGrid& grid,
                                     const LossSpec& spec,
                                     const Scenario& scenario, double cost,
                                     const SimOptions& opt,
                                     const std::vector<int>& students) {
  const std::vector<int> who =
      students.empty() ? scenario.students() : students;
  EquilibriumVerdict verdict;
  verdict.cost = cost;
  verdict.profile_descriptor = scenario.descriptor;
  for (int u : who) {
    const BestResponse br =
        best_response(grid, profile, u, spec, scenario, cost, opt);
    if (br.gain > 0.0 && br.gain > 3.0 * br.gain_se) {
      verdict.kind = EquilibriumVerdict::Kind::deviation_found;
      verdict.student = u;
      verdict.strategy_label = br.label;
      verdict.gain = br.gain;
      verdict.gain_se = br.gain_se;
      return verdict;
    }
  }
  verdict.kind = EquilibriumVerdict::Kind::no_profitable_deviation_on_grid;
  return verdict;
}

// ---------------------------------------------------------------------------
// Best-response dynamics (closed form)

std::vector<TrajectoryPoint> iterate_best_response(
    const StrategyProfile& initial, double p, double quality, int rounds) {
  if (p < 0.0 || p > 1.0) throw ConfigError("p must be in [0, 1]");
  if (rounds < 1) throw ConfigError("need at least one round");
  if (!initial.overrides.empty())
    throw ConfigError(
        "best-response iteration expects a symmetric constant profile");
  const Strategy& s = initial.default_strategy;
  if (s.requires_measurement() || !s.is_deterministic() ||
      s.voluntary_noise_mean != 0.0)
    throw ConfigError(
        "best-response iteration expects a zero-noise constant start");
  // Track the gap g_t - q directly: the update g_{t+1} = (1-p) g_t + p q
  // is exactly a (1-p) contraction of the gap.
  double gap = s.quality_map(0.0) - quality;
  std::vector<TrajectoryPoint> trajectory;
  trajectory.reserve(rounds);
  for (int t = 1; t <= rounds; ++t) {
    trajectory.push_back({t, quality + gap, gap * gap});
    gap *= (1.0 - p);
  }
  return trajectory;
}

// ---------------------------------------------------------------------------
// Lemma checks

namespace {

double strategy_bias(const Strategy& s) { return s.voluntary_noise_mean; }

double strategy_variance(const Strategy& s) {
  if (s.noise_shape == NoiseShape::none) return 0.0;
  return s.measurement_noise_std * s.measurement_noise_std +
         s.voluntary_noise_std * s.voluntary_noise_std;
}

CheckReport paired_check(const Strategy& s1, const Strategy& s2, int u,
                         const Scenario& scenario, const SimOptions& opt,
                         double precision, double expected,
                         const std::function<double(const GradeGraph&)>& stat,
                         const std::string& what) {
  // Both profiles share every opponent's stream, so the environment term
  // cancels replicate by replicate.
  const StrategyProfile prof1{Strategy::truthful(scenario.max_grade),
                              {{u, s1}}};
  const StrategyProfile prof2{Strategy::truthful(scenario.max_grade),
                              {{u, s2}}};
  std::vector<Accum> blocks(num_blocks(opt.replicates));
  run_blocks(opt.replicates, opt.threads, [&](long b, long first, long last) {
    Accum acc;
    for (long r = first; r < last; ++r) {
      const auto qualities = scenario.qualities_for(opt.seed, r);
      const GradeGraph g1 = realize_graph(scenario.pairs, qualities, prof1,
                                          scenario.max_grade, opt.seed, r);
      const GradeGraph g2 = realize_graph(scenario.pairs, qualities, prof2,
                                          scenario.max_grade, opt.seed, r);
      acc.add(stat(g1) - stat(g2));
    }
    blocks[b] = acc;
  });
  Accum total;
  for (const Accum& a : blocks) total.merge(a);

  CheckReport report;
  report.observed = total.mean;
  report.expected = expected;
  report.std_error = total.std_error();
  const double gap = std::abs(report.observed - expected);
  if (gap > 3.0 * report.std_error + 1e-12) {
    report.outcome = CheckReport::Outcome::fail;
    report.detail = what + ": paired difference off by " + format_double(gap) +
                    " (> 3 SE)";
  } else if (3.0 * report.std_error > precision) {
    report.outcome = CheckReport::Outcome::inconclusive;
    report.detail = what + ": 3 SE = " +
                    format_double(3.0 * report.std_error) +
                    " exceeds the precision target";
  } else {
    report.outcome = CheckReport::Outcome::pass;
    report.detail = what + ": within 3 SE";
  }
  return report;
}

}  // namespace

CheckReport verify_lemma_long1(const Strategy& s1, const Strategy& s2, int u,
                               const Scenario& scenario, const SimOptions& opt,
                               double precision) {
  const double b1 = strategy_bias(s1), b2 = strategy_bias(s2);
  const double v1 = strategy_variance(s1), v2 = strategy_variance(s2);
  const double expected = (v1 + b1 * b1) - (v2 + b2 * b2);
  return paired_check(
      s1, s2, u, scenario, opt, precision, expected,
      [u](const GradeGraph& g) { return loss_l2_exclusive(g, u); },
      "E[l2-exclusive] difference vs (sigma^2 + b^2) difference");
}

CheckReport verify_lemma_long2(const Strategy& s1, const Strategy& s2, int u,
                               const Scenario& scenario, const SimOptions& opt,
                               double precision) {
  long n = 0;
  for (const ReviewPair& e : scenario.pairs)
    if (e.student == u) ++n;
  const long K = static_cast<long>(scenario.pairs.size());
  if (n < 1) throw ConfigError("student has no reviews in the scenario");
  if (K < 2)
    throw DegenerateInputError("global variance needs at least 2 grades");
  const double b1 = strategy_bias(s1), b2 = strategy_bias(s2);
  const double v1 = strategy_variance(s1), v2 = strategy_variance(s2);
  const double var_coeff = static_cast<double>(n) / K;
  const double bias_coeff = K > 1 ? static_cast<double>(n) * (K - n) /
                                        (static_cast<double>(K) * (K - 1))
                                  : 0.0;
  const double expected =
      var_coeff * (v1 - v2) + bias_coeff * (b1 * b1 - b2 * b2);
  return paired_check(
      s1, s2, u, scenario, opt, precision, expected,
      [](const GradeGraph& g) { return sample_variance_global(g); },
      "E[global variance] difference vs coefficient formula");
}

// ---------------------------------------------------------------------------
// Truthful vs D_eta

ComparisonReport compare_truthful_vs_deta(double eta2, double gamma, int n,
                                          double sigma_q2, VarVariant variant,
                                          double cost, int num_students,
                                          const SimOptions& opt,
                                          double max_grade,
                                          NoiseShape noise_shape) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw ConfigError("gamma must be in (0, 1)");
  if (eta2 < 0.0 || sigma_q2 <= 0.0)
    throw ConfigError("eta^2 must be >= 0 and sigma_q^2 > 0");
  if (num_students < n + 1)
    throw ConfigError("need more students than reviews per student");

  const double mid = max_grade / 2.0;
  Scenario scenario = Scenario::classroom(
      num_students, n, max_grade,
      QualityDistribution::gaussian(mid, std::sqrt(sigma_q2), 0.0, max_grade),
      opt.seed);

  const LossSpec spec = LossSpec::var(gamma, variant);
  const StrategyProfile truthful{Strategy::truthful(max_grade), {}};
  const StrategyProfile deta{
      Strategy::constant_noisy(mid, std::sqrt(eta2), noise_shape), {}};
  const int u = scenario.students().front();

  const SimReport rep_t = expected_loss(truthful, u, spec, scenario, opt);
  const SimReport rep_d = expected_loss(deta, u, spec, scenario, opt);

  ComparisonReport out;
  out.truthful_estimate = rep_t.estimate + cost;  // truthful pays to measure
  out.truthful_se = rep_t.std_error;
  out.truthful_analytic = -gamma * sigma_q2 + cost;
  out.deta_estimate = rep_d.estimate;  // constant strategies measure nothing
  out.deta_se = rep_d.std_error;
  out.deta_analytic = n * eta2 / (n - 1) - gamma * eta2;

  const GammaRange range = gamma_range(cost, sigma_q2, eta2, n);
  out.gamma_admissible = !range.empty && gamma > range.lo && gamma < range.hi;
  if (!out.gamma_admissible) {
    out.outcome = CheckReport::Outcome::inconclusive;
    out.detail = range.empty
                     ? "admissible gamma range is empty; nothing to assert"
                     : "gamma outside the admissible range; nothing to assert";
    return out;
  }

  const double t_gap = std::abs(out.truthful_estimate - out.truthful_analytic);
  const double d_gap = std::abs(out.deta_estimate - out.deta_analytic);
  const double order_margin = out.deta_estimate - out.truthful_estimate;
  const double order_se =
      std::sqrt(out.truthful_se * out.truthful_se + out.deta_se * out.deta_se);
  if (t_gap > 3.0 * out.truthful_se + 1e-12 ||
      d_gap > 3.0 * out.deta_se + 1e-12) {
    out.outcome = CheckReport::Outcome::fail;
    out.detail = "estimate disagrees with the analytic loss beyond 3 SE";
  } else if (order_margin <= 3.0 * order_se) {
    // truthful should win by a margin the replicate budget can resolve
    out.outcome = order_margin <= 0.0 ? CheckReport::Outcome::fail
                                      : CheckReport::Outcome::inconclusive;
    out.detail = order_margin <= 0.0
                     ? "truthful did not beat the D_eta strategy"
                     : "ordering not resolved at 3 SE";
  } else {
    out.outcome = CheckReport::Outcome::pass;
    out.detail = "truthful beats D_eta; estimates match analytic losses";
  }
  return out;
}

}  // namespace peergrade
