#include "peergrade/losses.hpp"

#include <algorithm>
#include <cmath>

namespace peergrade {

LossSpec LossSpec::l2() { return LossSpec{}; }

LossSpec LossSpec::flat(double p, double alpha) {
  if (p < 0.0 || p > 1.0) throw ConfigError("flat loss needs p in [0, 1]");
  if (alpha <= 0.0) throw ConfigError("flat loss needs alpha > 0");
  LossSpec s;
  s.scheme = Scheme::flat;
  s.p = p;
  s.alpha = alpha;
  return s;
}

LossSpec LossSpec::var(double gamma, VarVariant variant) {
  LossSpec s;
  s.scheme = Scheme::var;
  s.gamma = gamma;
  s.variant = variant;
  return s;
}

LossSpec LossSpec::tree() {
  LossSpec s;
  s.scheme = Scheme::tree;
  return s;
}

namespace {

double consensus_mean(const GradeGraph& graph, int submission) {
  const auto& reviewers = graph.reviewers_of(submission);
  double sum = 0.0;
  for (int v : reviewers) sum += graph.grade(submission, v);
  return sum / reviewers.size();
}

double peer_mean_excluding(const GradeGraph& graph, int submission,
                           int student) {
  const auto& reviewers = graph.reviewers_of(submission);
  if (reviewers.size() < 2)
    throw DegenerateInputError(
        "submission " + std::to_string(submission) +
        " has a single reviewer; exclusive consensus undefined");
  double sum = 0.0;
  for (int v : reviewers)
    if (v != student) sum += graph.grade(submission, v);
  return sum / (reviewers.size() - 1);
}

}  // namespace

double loss_l2(const GradeGraph& graph, int student) {
  const auto& subs = graph.submissions_of(student);
  double acc = 0.0;
  for (int i : subs) {
    const double d = graph.grade(i, student) - consensus_mean(graph, i);
    acc += d * d;
  }
  return acc / subs.size();
}

double loss_l2_exclusive(const GradeGraph& graph, int student) {
  const auto& subs = graph.submissions_of(student);
  double acc = 0.0;
  for (int i : subs) {
    const double d =
        graph.grade(i, student) - peer_mean_excluding(graph, i, student);
    acc += d * d;
  }
  return acc / subs.size();
}

double loss_flat(const GradeGraph& graph, int student, double p, double alpha) {
  if (p < 0.0 || p > 1.0) throw ConfigError("flat loss needs p in [0, 1]");
  if (alpha <= 0.0) throw ConfigError("flat loss needs alpha > 0");
  const auto& subs = graph.submissions_of(student);
  double acc = 0.0;
  for (int i : subs) {
    const double g = graph.grade(i, student);
    const double peer =
        p < 1.0 ? g - peer_mean_excluding(graph, i, student) : 0.0;
    const double instr = g - graph.quality(i);
    acc += alpha * ((1.0 - p) * peer * peer + p * instr * instr);
  }
  return acc / subs.size();
}

double loss_flat_realized(const GradeGraph& graph, int student, double alpha,
                          const std::set<int>& instructor_graded) {
  if (alpha <= 0.0) throw ConfigError("flat loss needs alpha > 0");
  const auto& subs = graph.submissions_of(student);
  double acc = 0.0;
  for (int i : subs) {
    const double g = graph.grade(i, student);
    double d;
    if (instructor_graded.count(i))
      d = g - graph.quality(i);
    else
      d = g - peer_mean_excluding(graph, i, student);
    acc += alpha * d * d;
  }
  return acc / subs.size();
}

double loss_tree(const ReviewTree& tree, const GradeGraph& graph,
                 int node_index) {
  if (node_index < 0 || node_index >= static_cast<int>(tree.nodes.size()))
    throw ConfigError("tree node index out of range");
  const ReviewTree::Node& node = tree.nodes[node_index];
  if (node.kind != ReviewTree::Kind::student)
    throw ConfigError("tree loss is defined for student nodes only");
  const int shared = node.shared_with_parent;
  if (shared < 0)
    throw DegenerateInputError("node has no shared submission with parent");
  const ReviewTree::Node& parent = tree.nodes[node.parent];
  double parent_grade;
  if (parent.kind == ReviewTree::Kind::instructor) {
    parent_grade = graph.quality(shared);  // the instructor grades truthfully
  } else {
    parent_grade = graph.grade(shared, parent.id);
  }
  const double own = graph.grade(shared, node.id);
  const double d = parent_grade - own;
  return d * d;
}

double sample_variance_local(const GradeGraph& graph, int student) {
  const auto& subs = graph.submissions_of(student);
  if (subs.size() < 2)
    throw DegenerateInputError("local variance needs at least 2 reviews");
  double mean = 0.0;
  for (int i : subs) mean += graph.grade(i, student);
  mean /= subs.size();
  double acc = 0.0;
  for (int i : subs) {
    const double d = graph.grade(i, student) - mean;
    acc += d * d;
  }
  return acc / (subs.size() - 1);
}

double sample_variance_global(const GradeGraph& graph) {
  const auto& grades = graph.grades();
  if (grades.size() < 2)
    throw DegenerateInputError("global variance needs at least 2 grades");
  double mean = 0.0;
  for (double g : grades) mean += g;
  mean /= grades.size();
  double acc = 0.0;
  for (double g : grades) {
    const double d = g - mean;
    acc += d * d;
  }
  return acc / (grades.size() - 1);
}

VarLoss loss_var(const GradeGraph& graph, int student, double gamma,
                 VarVariant variant) {
  VarLoss out;
  out.agreement = loss_l2_exclusive(graph, student);
  const double sigma_hat2 = variant == VarVariant::local
                                ? sample_variance_local(graph, student)
                                : sample_variance_global(graph);
  out.variance_term = -gamma * sigma_hat2;
  out.total = out.agreement + out.variance_term;
  return out;
}

double review_grade(double loss, double r_max, double loss_ceiling) {
  if (r_max <= 0.0 || loss_ceiling <= 0.0)
    throw ConfigError("review grade scale needs R_max > 0 and L_max > 0");
  const double raw = r_max * (1.0 - loss / loss_ceiling);
  return std::clamp(raw, 0.0, r_max);
}

LossReport compute_losses(const GradeGraph& graph, const LossSpec& spec,
                          const ReviewTree* tree) {
  LossReport report;
  if (spec.scheme == LossSpec::Scheme::tree) {
    if (!tree) throw ConfigError("tree loss requires a review tree");
    for (int k : tree->internal_node_indices()) {
      LossReport::Entry e;
      e.student = tree->nodes[k].id;
      e.total = loss_tree(*tree, graph, k);
      report.entries.push_back(e);
    }
    return report;
  }
  for (int u : graph.students()) {
    LossReport::Entry e;
    e.student = u;
    switch (spec.scheme) {
      case LossSpec::Scheme::l2:
        e.total = loss_l2(graph, u);
        break;
      case LossSpec::Scheme::flat: {
        if (spec.realized) {
          if (!spec.instructor_set)
            throw ConfigError("realized flat loss needs an instructor set");
          e.total =
              loss_flat_realized(graph, u, spec.alpha, *spec.instructor_set);
        } else {
          e.total = loss_flat(graph, u, spec.p, spec.alpha);
        }
        // peer term / instructor term split
        const auto& subs = graph.submissions_of(u);
        double peer_term = 0.0, instr_term = 0.0;
        for (int i : subs) {
          const double g = graph.grade(i, u);
          const double qd = g - graph.quality(i);
          if (spec.realized && spec.instructor_set &&
              spec.instructor_set->count(i)) {
            instr_term += spec.alpha * qd * qd;
          } else if (spec.realized) {
            const double pd = g - peer_mean_excluding(graph, i, u);
            peer_term += spec.alpha * pd * pd;
          } else {
            const double pd =
                spec.p < 1.0 ? g - peer_mean_excluding(graph, i, u) : 0.0;
            peer_term += spec.alpha * (1.0 - spec.p) * pd * pd;
            instr_term += spec.alpha * spec.p * qd * qd;
          }
        }
        e.components = {peer_term / subs.size(), instr_term / subs.size()};
        break;
      }
      case LossSpec::Scheme::var: {
        const VarLoss v = loss_var(graph, u, spec.gamma, spec.variant);
        e.total = v.total;
        e.components = {v.agreement, v.variance_term};
        break;
      }
      case LossSpec::Scheme::tree:
        break;  // handled above
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace peergrade
