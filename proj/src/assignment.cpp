#include "peergrade/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace peergrade {

// ---------------------------------------------------------------------------
// BipartiteAssignment

std::vector<int> BipartiteAssignment::submissions() const {
  std::set<int> ids;
  for (const ReviewPair& e : pairs) ids.insert(e.submission);
  return {ids.begin(), ids.end()};
}

std::vector<int> BipartiteAssignment::reviewers_of(int submission) const {
  std::vector<int> out;
  for (const ReviewPair& e : pairs)
    if (e.submission == submission) out.push_back(e.student);
  return out;
}

std::vector<int> BipartiteAssignment::submissions_of(int student) const {
  std::vector<int> out;
  for (const ReviewPair& e : pairs)
    if (e.student == student) out.push_back(e.submission);
  return out;
}

BipartiteAssignment build_assignment(int num_students, int reviews_per_student,
                                     int per_submission_min,
                                     std::uint64_t seed) {
  const int n = num_students;
  const int m = reviews_per_student;
  if (n < 2) throw InfeasibleError("need at least 2 students");
  if (m < 1 || m > n - 1)
    throw InfeasibleError("reviews per student must be in [1, N-1]");
  if (per_submission_min > m)
    throw InfeasibleError(
        "per-submission minimum of " + std::to_string(per_submission_min) +
        " exceeds the " + std::to_string(m) +
        " reviews each submission receives in the regular construction");

  RngStream rng(seed, kAssignmentEntity, 0);

  // Configuration-model construction: a pool with m copies of every
  // submission, shuffled and dealt m slots per student, then repaired by
  // random swaps until no student holds their own or a duplicate submission.
  std::vector<int> pool(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) pool[static_cast<std::size_t>(i) * m + j] = i;

  auto shuffle_pool = [&] {
    for (std::size_t k = pool.size(); k > 1; --k)
      std::swap(pool[k - 1], pool[rng.uniform_index(k)]);
  };
  auto slot_ok = [&](std::size_t slot, int submission) {
    const int student = static_cast<int>(slot) / m;
    if (submission == student) return false;
    const std::size_t base = static_cast<std::size_t>(student) * m;
    for (std::size_t j = base; j < base + m; ++j)
      if (j != slot && pool[j] == submission) return false;
    return true;
  };

  for (int attempt = 0; attempt < 200; ++attempt) {
    shuffle_pool();
    bool ok = true;
    for (std::size_t slot = 0; slot < pool.size(); ++slot) {
      if (slot_ok(slot, pool[slot])) continue;
      bool fixed = false;
      for (int tries = 0; tries < 4 * n * m; ++tries) {
        const std::size_t other = rng.uniform_index(pool.size());
        if (other == slot) continue;
        if (slot_ok(slot, pool[other]) && slot_ok(other, pool[slot])) {
          std::swap(pool[slot], pool[other]);
          fixed = true;
          break;
        }
      }
      if (!fixed) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    BipartiteAssignment a;
    a.num_students = n;
    a.reviews_per_student = m;
    a.pairs.reserve(pool.size());
    for (std::size_t slot = 0; slot < pool.size(); ++slot)
      a.pairs.push_back({pool[slot], static_cast<int>(slot) / m});
    return a;
  }
  throw InfeasibleError("assignment repair did not converge");
}

// ---------------------------------------------------------------------------
// Coverage combinatorics

namespace {

double log_choose(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
         std::lgamma(n - k + 1.0);
}

}  // namespace

double coverage_probability(int num_students, int reviews_per_student,
                            int instructor_count) {
  const int n = num_students, m = reviews_per_student, k = instructor_count;
  if (n < 1 || m < 0 || m > n) throw ConfigError("need 0 <= m <= N, N >= 1");
  if (k < 0 || k > n) throw ConfigError("need 0 <= k <= N");
  if (k == 0) return 0.0;
  if (k > n - m) return 1.0;  // every size-k set must hit the m reviewed ones
  const double log_q = log_choose(n - m, k) - log_choose(n, k);
  return -std::expm1(log_q);
}

int min_instructor_workload(int num_students, int reviews_per_student,
                            double target_p) {
  if (target_p < 0.0 || target_p >= 1.0)
    throw ConfigError("target probability must be in [0, 1)");
  // coverage_probability is monotone nondecreasing in k, so binary search.
  int lo = 0, hi = num_students;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (coverage_probability(num_students, reviews_per_student, mid) >=
        target_p)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Review tree

int ReviewTree::depth() const {
  int d = 0;
  for (const Node& n : nodes) d = std::max(d, n.level + 1);
  return d;
}

std::optional<int> ReviewTree::node_of_student(int student) const {
  for (std::size_t k = 0; k < nodes.size(); ++k)
    if (nodes[k].kind == Kind::student && nodes[k].id == student)
      return static_cast<int>(k);
  return std::nullopt;
}

std::vector<int> ReviewTree::internal_node_indices() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes.size(); ++k)
    if (nodes[k].kind == Kind::student) out.push_back(static_cast<int>(k));
  return out;
}

ReviewTree build_review_tree(const std::vector<int>& submissions,
                             const std::vector<int>& students, int branching,
                             std::uint64_t seed) {
  if (submissions.empty()) throw InfeasibleError("no submissions");
  if (branching < 1) throw InfeasibleError("branching factor must be >= 1");
  const int K = branching;

  RngStream rng(seed, kTreeEntity, 0);

  std::vector<ReviewTree::Node> nodes;
  std::vector<int> current;  // node indices of the level being grouped
  for (int s : submissions) {
    ReviewTree::Node leaf;
    leaf.kind = ReviewTree::Kind::submission;
    leaf.id = s;
    leaf.reviewed = {s};  // a leaf's only reviewable submission is itself
    current.push_back(static_cast<int>(nodes.size()));
    nodes.push_back(std::move(leaf));
  }

  std::size_t next_student = 0;
  auto attach = [&](ReviewTree::Node& parent, int parent_index,
                    const std::vector<int>& children) {
    for (int c : children) {
      ReviewTree::Node& child = nodes[c];
      child.parent = parent_index;
      const int shared =
          child.reviewed[rng.uniform_index(child.reviewed.size())];
      child.shared_with_parent = shared;
      parent.children.push_back(c);
      parent.reviewed.push_back(shared);
    }
  };

  while (static_cast<int>(current.size()) > K ||
         next_student < students.size()) {
    const int cur = static_cast<int>(current.size());
    const int parents = (cur + K - 1) / K;
    if (students.size() - next_student < static_cast<std::size_t>(parents)) {
      const long bound =
          K > 1 ? (static_cast<long>(submissions.size()) - 1) / (K - 1) : -1;
      throw InfeasibleError(
          "not enough students to build the review tree: need at least " +
          (bound >= 0 ? std::to_string(bound) : std::string("more")) +
          " internal students for branching " + std::to_string(K));
    }
    std::vector<int> next_level;
    const int base = cur / parents, rem = cur % parents;
    int offset = 0;
    for (int g = 0; g < parents; ++g) {
      const int size = base + (g < rem ? 1 : 0);  // earlier groups take more
      std::vector<int> group(current.begin() + offset,
                             current.begin() + offset + size);
      offset += size;
      ReviewTree::Node parent;
      parent.kind = ReviewTree::Kind::student;
      parent.id = students[next_student++];
      const int parent_index = static_cast<int>(nodes.size());
      attach(parent, parent_index, group);
      next_level.push_back(parent_index);
      nodes.push_back(std::move(parent));
    }
    current = std::move(next_level);
  }

  ReviewTree::Node root;
  root.kind = ReviewTree::Kind::instructor;
  root.id = -1;
  const int root_index = static_cast<int>(nodes.size());
  attach(root, root_index, current);
  nodes.push_back(std::move(root));

  // Reindex breadth-first from the root so nodes[0] is the instructor and
  // levels count down toward the leaves.
  std::vector<int> order{root_index};
  for (std::size_t h = 0; h < order.size(); ++h)
    for (int c : nodes[order[h]].children) order.push_back(c);
  std::vector<int> remap(nodes.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k)
    remap[order[k]] = static_cast<int>(k);

  ReviewTree tree;
  tree.branching = K;
  tree.nodes.resize(nodes.size());
  for (std::size_t old = 0; old < nodes.size(); ++old) {
    ReviewTree::Node n = nodes[old];
    if (n.parent >= 0) n.parent = remap[n.parent];
    for (int& c : n.children) c = remap[c];
    tree.nodes[remap[old]] = std::move(n);
  }
  tree.nodes[0].level = 0;
  for (std::size_t k = 1; k < tree.nodes.size(); ++k)
    tree.nodes[k].level = tree.nodes[tree.nodes[k].parent].level + 1;
  return tree;
}

// ---------------------------------------------------------------------------
// Max-grader statistics

std::map<std::string, MaxGraderStats> max_grader_stats(
    const std::vector<GradeRecord>& records,
    const std::map<std::string, double>& max_grade_by_assignment,
    std::vector<std::string>* warnings) {
  std::map<std::string, std::vector<const GradeRecord*>> by_assignment;
  for (const GradeRecord& r : records) by_assignment[r.assignment_id].push_back(&r);

  std::map<std::string, MaxGraderStats> out;
  for (const auto& [aid, recs] : by_assignment) {
    auto mit = max_grade_by_assignment.find(aid);
    if (mit == max_grade_by_assignment.end())
      throw ConfigError("no max grade in manifest for assignment " + aid);
    const double M = mit->second;
    if (recs.empty()) {
      if (warnings)
        warnings->push_back("assignment " + aid + " has no records; skipped");
      continue;
    }
    MaxGraderStats st;
    std::map<int, bool> all_max;  // student -> every grade equals M so far
    long max_grades = 0;
    for (const GradeRecord* r : recs) {
      const bool is_max = std::abs(r->grade - M) <= 1e-9 * std::max(1.0, M);
      if (is_max) ++max_grades;
      auto [it, inserted] = all_max.emplace(r->student, is_max);
      if (!inserted) it->second = it->second && is_max;
    }
    st.total_grades = static_cast<long>(recs.size());
    st.total_students = static_cast<long>(all_max.size());
    st.max_grade_fraction = static_cast<double>(max_grades) / st.total_grades;
    long max_graders = 0;
    for (const auto& [u, flag] : all_max)
      if (flag) ++max_graders;
    st.max_grader_fraction =
        static_cast<double>(max_graders) / st.total_students;
    out[aid] = st;
  }
  return out;
}

}  // namespace peergrade
