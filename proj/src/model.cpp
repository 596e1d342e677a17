#include "peergrade/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace peergrade {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string describe(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// PiecewiseLinear

PiecewiseLinear::PiecewiseLinear() : pts_{{0.0, 0.0}, {1.0, 1.0}} {}

PiecewiseLinear::PiecewiseLinear(std::vector<std::array<double, 2>> breakpoints)
    : pts_(std::move(breakpoints)) {
  if (pts_.empty()) throw ConfigError("quality map needs at least one breakpoint");
  for (std::size_t k = 1; k < pts_.size(); ++k) {
    if (!(pts_[k][0] > pts_[k - 1][0]))
      throw ConfigError("quality map breakpoints must be strictly increasing");
  }
}

double PiecewiseLinear::operator()(double x) const {
  if (x <= pts_.front()[0]) return pts_.front()[1];
  if (x >= pts_.back()[0]) return pts_.back()[1];
  auto it = std::upper_bound(
      pts_.begin(), pts_.end(), x,
      [](double v, const std::array<double, 2>& p) { return v < p[0]; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double t = (x - lo[0]) / (hi[0] - lo[0]);
  return lo[1] + t * (hi[1] - lo[1]);
}

bool PiecewiseLinear::is_constant() const {
  for (const auto& p : pts_)
    if (p[1] != pts_.front()[1]) return false;
  return true;
}

PiecewiseLinear PiecewiseLinear::identity(double max_grade) {
  return PiecewiseLinear({{0.0, 0.0}, {max_grade, max_grade}});
}

PiecewiseLinear PiecewiseLinear::constant(double value) {
  return PiecewiseLinear({{0.0, value}});
}

PiecewiseLinear PiecewiseLinear::affine(double slope, double intercept,
                                        double max_grade) {
  auto value = [&](double x) {
    return clamp_grade(slope * x + intercept, max_grade);
  };
  std::vector<double> xs{0.0, max_grade};
  if (slope != 0.0) {
    for (double level : {0.0, max_grade}) {
      double x = (level - intercept) / slope;
      if (x > 0.0 && x < max_grade) xs.push_back(x);
    }
  }
  std::sort(xs.begin(), xs.end());
  std::vector<std::array<double, 2>> pts;
  for (double x : xs) pts.push_back({x, value(x)});
  return PiecewiseLinear(std::move(pts));
}

// ---------------------------------------------------------------------------
// Strategy

bool Strategy::is_deterministic() const {
  if (noise_shape == NoiseShape::none) return true;
  return measurement_noise_std == 0.0 && voluntary_noise_std == 0.0;
}

Strategy Strategy::truthful(double max_grade) {
  Strategy s;
  s.quality_map = PiecewiseLinear::identity(max_grade);
  return s;
}

Strategy Strategy::constant(double grade) {
  Strategy s;
  s.quality_map = PiecewiseLinear::constant(grade);
  return s;
}

Strategy Strategy::affine(double slope, double intercept, double max_grade) {
  Strategy s;
  s.quality_map = PiecewiseLinear::affine(slope, intercept, max_grade);
  return s;
}

Strategy Strategy::truthful_noisy(double bias, double stddev, double max_grade,
                                  NoiseShape shape) {
  Strategy s;
  s.quality_map = PiecewiseLinear::identity(max_grade);
  s.voluntary_noise_mean = bias;
  s.voluntary_noise_std = stddev;
  s.noise_shape = shape;
  return s;
}

Strategy Strategy::constant_noisy(double grade, double stddev,
                                  NoiseShape shape) {
  Strategy s;
  s.quality_map = PiecewiseLinear::constant(grade);
  s.voluntary_noise_std = stddev;
  s.noise_shape = shape;
  return s;
}

// ---------------------------------------------------------------------------
// QualityDistribution

double QualityDistribution::sample(RngStream& rng) const {
  switch (kind) {
    case Kind::uniform:
      return rng.uniform(lo, hi);
    case Kind::gaussian_clipped: {
      double q = stddev > 0.0 ? rng.normal(mean, stddev) : mean;
      return q < lo ? lo : (q > hi ? hi : q);
    }
    case Kind::discrete: {
      double u = rng.uniform(0.0, 1.0);
      double acc = 0.0;
      for (const auto& [value, prob] : atoms) {
        acc += prob;
        if (u <= acc) return value;
      }
      return atoms.back().first;
    }
  }
  return 0.0;
}

double QualityDistribution::expectation() const {
  switch (kind) {
    case Kind::uniform:
      return 0.5 * (lo + hi);
    case Kind::gaussian_clipped:
      return mean;
    case Kind::discrete: {
      double m = 0.0;
      for (const auto& [value, prob] : atoms) m += value * prob;
      return m;
    }
  }
  return 0.0;
}

double QualityDistribution::variance() const {
  switch (kind) {
    case Kind::uniform: {
      const double w = hi - lo;
      return w * w / 12.0;
    }
    case Kind::gaussian_clipped:
      return stddev * stddev;
    case Kind::discrete: {
      const double m = expectation();
      double v = 0.0;
      for (const auto& [value, prob] : atoms)
        v += prob * (value - m) * (value - m);
      return v;
    }
  }
  return 0.0;
}

QualityDistribution QualityDistribution::uniform_dist(double lo, double hi) {
  if (lo > hi) throw ConfigError("uniform quality distribution needs lo <= hi");
  QualityDistribution d;
  d.kind = Kind::uniform;
  d.lo = lo;
  d.hi = hi;
  return d;
}

QualityDistribution QualityDistribution::gaussian(double mean, double stddev,
                                                  double lo, double hi) {
  if (stddev < 0.0) throw ConfigError("quality stddev must be >= 0");
  QualityDistribution d;
  d.kind = Kind::gaussian_clipped;
  d.mean = mean;
  d.stddev = stddev;
  d.lo = lo;
  d.hi = hi;
  return d;
}

QualityDistribution QualityDistribution::discrete(
    std::vector<std::pair<double, double>> atoms) {
  if (atoms.empty()) throw ConfigError("discrete quality distribution is empty");
  double total = 0.0;
  for (const auto& [value, prob] : atoms) total += prob;
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("discrete quality probabilities sum to " +
                      describe(total) + ", expected 1");
  QualityDistribution d;
  d.kind = Kind::discrete;
  d.atoms = std::move(atoms);
  return d;
}

// ---------------------------------------------------------------------------
// GradeGraph

GradeGraph::GradeGraph(double max_grade, std::map<int, double> qualities,
                       std::vector<ReviewPair> pairs,
                       std::vector<double> grades) {
  if (max_grade <= 0.0) throw ConfigError("max grade must be positive");
  if (pairs.size() != grades.size())
    throw ConfigError("edge list and grade list differ in length");
  for (const auto& [id, q] : qualities) {
    if (q < 0.0 || q > max_grade)
      throw ConfigError("quality of submission " + std::to_string(id) +
                        " outside [0, M]");
  }

  auto core = std::make_shared<Core>();
  core->max_grade = max_grade;
  core->qualities = std::move(qualities);

  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (pairs[a].student != pairs[b].student)
      return pairs[a].student < pairs[b].student;
    return pairs[a].submission < pairs[b].submission;
  });

  grades_.reserve(order.size());
  for (int k : order) {
    const ReviewPair& e = pairs[k];
    const double g = grades[k];
    if (e.submission == e.student)
      throw ConfigError("student " + std::to_string(e.student) +
                        " reviews their own submission");
    if (!core->qualities.count(e.submission))
      throw ConfigError("no quality for submission " +
                        std::to_string(e.submission));
    if (g < 0.0 || g > max_grade)
      throw ConfigError("grade outside [0, M] on edge (" +
                        std::to_string(e.submission) + ", " +
                        std::to_string(e.student) + ")");
    auto [it, inserted] = core->edge_index.emplace(
        std::make_pair(e.submission, e.student), (int)core->edges.size());
    if (!inserted)
      throw ConfigError("duplicate edge (" + std::to_string(e.submission) +
                        ", " + std::to_string(e.student) + ")");
    core->edges.push_back({e.submission, e.student});
    grades_.push_back(g);
    core->by_student[e.student].push_back(e.submission);
    core->by_submission[e.submission].push_back(e.student);
  }
  for (const auto& [u, subs] : core->by_student) core->students.push_back(u);
  for (const auto& [i, revs] : core->by_submission)
    core->submissions.push_back(i);
  core_ = std::move(core);
}

const std::vector<int>& GradeGraph::submissions_of(int student) const {
  auto it = core_->by_student.find(student);
  if (it == core_->by_student.end())
    throw DegenerateInputError("student " + std::to_string(student) +
                               " has no reviews");
  return it->second;
}

const std::vector<int>& GradeGraph::reviewers_of(int submission) const {
  auto it = core_->by_submission.find(submission);
  if (it == core_->by_submission.end())
    throw DegenerateInputError("submission " + std::to_string(submission) +
                               " has no reviewers");
  return it->second;
}

double GradeGraph::grade(int submission, int student) const {
  auto it = core_->edge_index.find({submission, student});
  if (it == core_->edge_index.end())
    throw DegenerateInputError("no grade for edge (" +
                               std::to_string(submission) + ", " +
                               std::to_string(student) + ")");
  return grades_[it->second];
}

double GradeGraph::quality(int submission) const {
  auto it = core_->qualities.find(submission);
  if (it == core_->qualities.end())
    throw ConfigError("no quality for submission " +
                      std::to_string(submission));
  return it->second;
}

bool GradeGraph::has_student(int student) const {
  return core_->by_student.count(student) != 0;
}

GradeGraph GradeGraph::regrade(std::vector<double> grades) const {
  if (grades.size() != grades_.size())
    throw ConfigError("regrade: grade count mismatch");
  return GradeGraph(core_, std::move(grades));
}

// ---------------------------------------------------------------------------
// Sampling

double sample_grade(const Strategy& strategy, double quality, double max_grade,
                    RngStream& rng) {
  double eps = 0.0;
  double xi = strategy.voluntary_noise_mean;
  switch (strategy.noise_shape) {
    case NoiseShape::none:
      break;
    case NoiseShape::gaussian_clipped:
      if (strategy.measurement_noise_std > 0.0)
        eps = rng.normal(0.0, strategy.measurement_noise_std);
      if (strategy.voluntary_noise_std > 0.0)
        xi = rng.normal(strategy.voluntary_noise_mean,
                        strategy.voluntary_noise_std);
      break;
    case NoiseShape::uniform_clipped: {
      const double we = strategy.measurement_noise_std * std::sqrt(3.0);
      const double wv = strategy.voluntary_noise_std * std::sqrt(3.0);
      if (we > 0.0) eps = rng.uniform(-we, we);
      if (wv > 0.0)
        xi = rng.uniform(strategy.voluntary_noise_mean - wv,
                         strategy.voluntary_noise_mean + wv);
      break;
    }
  }
  const double perceived = clamp_grade(quality + eps, max_grade);
  return clamp_grade(strategy.quality_map(perceived) + xi, max_grade);
}

GradeGraph realize_graph(const std::vector<ReviewPair>& assignment,
                         const std::map<int, double>& qualities,
                         const StrategyProfile& profile, double max_grade,
                         std::uint64_t seed, std::uint64_t replicate) {
  std::map<int, std::vector<int>> by_student;
  for (const ReviewPair& e : assignment) {
    if (!qualities.count(e.submission))
      throw ConfigError("assignment references submission " +
                        std::to_string(e.submission) + " with no quality");
    by_student[e.student].push_back(e.submission);
  }
  std::vector<ReviewPair> pairs;
  std::vector<double> grades;
  pairs.reserve(assignment.size());
  grades.reserve(assignment.size());
  for (auto& [u, subs] : by_student) {
    std::sort(subs.begin(), subs.end());
    const Strategy& s = profile.resolve(u);
    RngStream rng(seed, static_cast<std::uint64_t>(u), replicate);
    for (int i : subs) {
      pairs.push_back({i, u});
      grades.push_back(sample_grade(s, qualities.at(i), max_grade, rng));
    }
  }
  return GradeGraph(max_grade, qualities, std::move(pairs), std::move(grades));
}

// ---------------------------------------------------------------------------
// Grade moments (bias / variance at a fixed quality)

namespace {

// Adaptive Simpson on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double tol,
                        int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, tol * 0.5, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, tol * 0.5, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  return adaptive_simpson(f, a, b, f(a), f(m), f(b), tol, 40);
}

struct NoiseComponent {
  // Deterministic component contributes the single value `mean`.
  bool deterministic;
  double mean;
  double stddev;
  bool gaussian;  // vs uniform; only meaningful when not deterministic
  double lo, hi;  // integration support

  double pdf(double x) const {
    if (gaussian) {
      const double z = (x - mean) / stddev;
      return std::exp(-0.5 * z * z) / (stddev * std::sqrt(2.0 * kPi));
    }
    return (x >= lo && x <= hi) ? 1.0 / (hi - lo) : 0.0;
  }
};

NoiseComponent make_component(double mean, double stddev, NoiseShape shape) {
  NoiseComponent c;
  c.mean = mean;
  c.stddev = stddev;
  if (shape == NoiseShape::none || stddev == 0.0) {
    c.deterministic = true;
    c.gaussian = false;
    c.lo = c.hi = mean;
    return c;
  }
  c.deterministic = false;
  c.gaussian = (shape == NoiseShape::gaussian_clipped);
  const double w = c.gaussian ? 8.0 * stddev : stddev * std::sqrt(3.0);
  c.lo = mean - w;
  c.hi = mean + w;
  return c;
}

// Expectation of h over the component's distribution, splitting the domain at
// the given points so each piece is smooth.
double component_expectation(const NoiseComponent& c,
                             const std::function<double(double)>& h,
                             std::vector<double> splits, double tol) {
  if (c.deterministic) return h(c.mean);
  splits.push_back(c.lo);
  splits.push_back(c.hi);
  std::sort(splits.begin(), splits.end());
  double total = 0.0;
  double prev = c.lo;
  for (double s : splits) {
    if (s <= prev || s > c.hi) continue;
    total += integrate([&](double x) { return c.pdf(x) * h(x); }, prev, s, tol);
    prev = s;
  }
  return total;
}

}  // namespace

BiasVariance grade_moments(const Strategy& strategy, double quality,
                           double max_grade) {
  const NoiseComponent eps =
      make_component(0.0, strategy.measurement_noise_std, strategy.noise_shape);
  const NoiseComponent xi =
      make_component(strategy.voluntary_noise_mean,
                     strategy.voluntary_noise_std, strategy.noise_shape);
  const double tol = 1e-12;

  // Inner expectations over xi of clip(y + xi)^k; the clip kinks sit at
  // xi = -y and xi = M - y.
  auto inner = [&](double y, int k) {
    auto h = [&](double x) {
      const double g = clamp_grade(y + x, max_grade);
      return k == 1 ? g : g * g;
    };
    return component_expectation(xi, h, {-y, max_grade - y}, tol);
  };

  auto moment = [&](int k) {
    auto h = [&](double e) {
      const double y = strategy.quality_map(clamp_grade(quality + e, max_grade));
      return inner(y, k);
    };
    // Outer kinks: perceived-quality clipping plus the quality-map breakpoints.
    std::vector<double> splits{-quality, max_grade - quality};
    for (const auto& p : strategy.quality_map.breakpoints())
      splits.push_back(p[0] - quality);
    return component_expectation(eps, h, std::move(splits), tol);
  };

  BiasVariance bv;
  bv.mean = moment(1);
  const double m2 = moment(2);
  bv.variance = std::max(0.0, m2 - bv.mean * bv.mean);
  return bv;
}

SigmaTruthfulness is_sigma_truthful(const Strategy& strategy, double sigma,
                                    const std::vector<double>& quality_grid,
                                    double max_grade) {
  if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
  if (quality_grid.empty())
    throw ConfigError("sigma-truthfulness grid is empty");
  SigmaTruthfulness result;
  for (double q : quality_grid) {
    if (q < 0.0 || q > max_grade)
      throw ConfigError("grid quality outside [0, M]");
    const BiasVariance bv = grade_moments(strategy, q, max_grade);
    const double bias = bv.mean - q;
    const double sq_err = bias * bias + bv.variance;
    if (sq_err > result.worst_sq_error) {
      result.worst_sq_error = sq_err;
      result.worst_quality = q;
    }
  }
  const double budget = sigma * sigma;
  result.truthful =
      result.worst_sq_error <= budget + 1e-9 * std::max(1.0, budget);
  return result;
}

}  // namespace peergrade
