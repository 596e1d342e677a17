#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "peergrade/assignment.hpp"
#include "peergrade/model.hpp"

namespace peergrade {

enum class VarVariant { local, global };

// Which loss scheme to evaluate and with which parameters.
struct LossSpec {
  enum class Scheme { l2, flat, tree, var };
  Scheme scheme = Scheme::l2;

  // flat
  double p = 0.0;
  double alpha = 1.0;
  bool realized = false;  // expected form by default
  std::optional<std::set<int>> instructor_set;  // nullopt => sampled per run

  // var
  double gamma = 0.0;
  VarVariant variant = VarVariant::local;

  static LossSpec l2();
  static LossSpec flat(double p, double alpha);
  static LossSpec var(double gamma, VarVariant variant);
  static LossSpec tree();
};

// Mean over del-u of (g_iu - consensus_i)^2 with the consensus including u.
double loss_l2(const GradeGraph& graph, int student);

// Same, with the consensus excluding u's own grade. Every reviewed
// submission must have at least two reviewers.
double loss_l2_exclusive(const GradeGraph& graph, int student);

// Expected-form flat supervised loss:
// mean over del-u of alpha * [(1-p)(g_iu - peer mean)^2 + p (g_iu - q_i)^2].
double loss_flat(const GradeGraph& graph, int student, double p, double alpha);

// Realized form: submissions in instructor_graded contribute the instructor
// term, the rest the peer term.
double loss_flat_realized(const GradeGraph& graph, int student, double alpha,
                          const std::set<int>& instructor_graded);

// Squared gap to the parent's grade on the shared submission. The root is
// the instructor and grades with the true quality.
double loss_tree(const ReviewTree& tree, const GradeGraph& graph,
                 int node_index);

// Unbiased sample variance of the grades given by one student.
double sample_variance_local(const GradeGraph& graph, int student);
// Unbiased sample variance of all grades in the graph.
double sample_variance_global(const GradeGraph& graph);

struct VarLoss {
  double total = 0.0;
  double agreement = 0.0;      // l2-exclusive part
  double variance_term = 0.0;  // -gamma * sigma-hat^2
};
VarLoss loss_var(const GradeGraph& graph, int student, double gamma,
                 VarVariant variant);

// Review grade linear in the loss: R_max * (1 - loss / L_max), clamped to
// [0, R_max].
double review_grade(double loss, double r_max, double loss_ceiling);

struct LossReport {
  struct Entry {
    int student = 0;
    double total = 0.0;
    std::optional<std::pair<double, double>> components;
  };
  std::vector<Entry> entries;
};

LossReport compute_losses(const GradeGraph& graph, const LossSpec& spec,
                          const ReviewTree* tree = nullptr);

}  // namespace peergrade
