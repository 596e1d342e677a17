#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "peergrade/model.hpp"

namespace peergrade {

// Random review assignment for a class where every student submits one
// submission (submission id == owner's student id) and reviews exactly m
// others. The standard construction keeps the graph regular on both sides:
// every submission also receives exactly m reviews.
struct BipartiteAssignment {
  int num_students = 0;
  int reviews_per_student = 0;
  std::vector<ReviewPair> pairs;

  std::vector<int> submissions() const;
  std::vector<int> reviewers_of(int submission) const;
  std::vector<int> submissions_of(int student) const;
};

BipartiteAssignment build_assignment(int num_students, int reviews_per_student,
                                     int per_submission_min,
                                     std::uint64_t seed);

// Probability that at least one of a student's m reviewed submissions is in a
// uniformly chosen instructor set of size k: p = 1 - C(N-m,k)/C(N,k).
double coverage_probability(int num_students, int reviews_per_student,
                            int instructor_count);

// Smallest k with coverage_probability(N, m, k) >= target_p.
int min_instructor_workload(int num_students, int reviews_per_student,
                            double target_p);

// Instructor-rooted review hierarchy. Leaves are submissions; every internal
// node reviews one submission in common with each of its children, and that
// shared submission is what the child is judged on.
struct ReviewTree {
  enum class Kind { instructor, student, submission };
  struct Node {
    Kind kind = Kind::submission;
    int id = -1;  // student or submission id; instructor uses -1
    int parent = -1;
    std::vector<int> children;   // node indices
    std::vector<int> reviewed;   // submission ids (internal nodes only)
    int shared_with_parent = -1;  // submission id (non-root nodes)
    int level = 0;
  };

  std::vector<Node> nodes;  // nodes[0] is the instructor root
  int branching = 0;

  const Node& root() const { return nodes.front(); }
  int depth() const;
  std::optional<int> node_of_student(int student) const;
  std::vector<int> internal_node_indices() const;  // students, root excluded
};

ReviewTree build_review_tree(const std::vector<int>& submissions,
                             const std::vector<int>& students, int branching,
                             std::uint64_t seed);

// Per-assignment max-grade statistics from ingested grade records.
struct GradeRecord {
  std::string assignment_id;
  int student = 0;
  int submission = 0;
  double grade = 0.0;
};

struct MaxGraderStats {
  double max_grade_fraction = 0.0;   // grades equal to M / all grades
  double max_grader_fraction = 0.0;  // students with all grades == M / students
  long total_grades = 0;
  long total_students = 0;
};

std::map<std::string, MaxGraderStats> max_grader_stats(
    const std::vector<GradeRecord>& records,
    const std::map<std::string, double>& max_grade_by_assignment,
    std::vector<std::string>* warnings = nullptr);

}  // namespace peergrade
