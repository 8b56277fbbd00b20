#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jap/matrix.hpp"

namespace jap {

using PersonIndex = std::int32_t;
using JobIndex = std::int32_t;

/// Selection edge {person, job}; also the unit of action in the environment.
struct Assignment {
  PersonIndex person = 0;
  JobIndex job = 0;

  auto operator<=>(const Assignment&) const = default;
};

/// Directed conflict arc: a person doing `from` may not also do `to`.
struct ConflictArc {
  JobIndex from = 0;
  JobIndex to = 0;

  auto operator<=>(const ConflictArc&) const = default;
};

/// Which conflict arcs trigger removals when an assignment is applied.
enum class ConflictRemovalMode {
  kOutgoingOnly,   // only arcs leaving the chosen job
  kBidirectional,  // arcs in either direction (keeps every rollout feasible)
};

// -- Unvalidated input ------------------------------------------------------

enum class Side { kPerson, kJob };

struct VertexRef {
  Side side = Side::kPerson;
  std::int64_t index = 0;
};

struct CandidateEdge {
  VertexRef a;
  VertexRef b;
};

/// Arbitrary edge sets that may or may not form a job allocation graph.
struct GraphCandidate {
  std::int64_t n_people = 0;
  std::int64_t n_jobs = 0;
  std::vector<CandidateEdge> selection;
  std::vector<CandidateEdge> conflicts;
};

enum class ViolationKind {
  kNegativeCount,
  kIndexOutOfRange,
  kSelectionNotBipartite,
  kConflictNotJobToJob,
  kSelfConflict,
  kDuplicateSelection,
  kDuplicateConflict,
};

const char* to_string(ViolationKind kind);

struct GraphViolation {
  ViolationKind kind;
  bool in_conflicts = false;  // which edge list `edge_index` refers to
  std::size_t edge_index = 0;
  std::string detail;
};

/// Every reason the candidate is not a job allocation graph; empty means ok.
std::vector<GraphViolation> validate_graph(const GraphCandidate& candidate);

class GraphError : public std::invalid_argument {
 public:
  explicit GraphError(std::vector<GraphViolation> violations);
  const std::vector<GraphViolation>& violations() const { return violations_; }

 private:
  std::vector<GraphViolation> violations_;
};

class ActionNotAvailable : public std::invalid_argument {
 public:
  explicit ActionNotAvailable(Assignment a);
  Assignment action;
};

class AssignmentNotInSelection : public std::invalid_argument {
 public:
  explicit AssignmentNotInSelection(Assignment a);
  Assignment assignment;
};

// -- Graph --------------------------------------------------------------------

/// Compressed adjacency: neighbors of vertex v are values[offsets[v] .. offsets[v+1]).
struct Adjacency {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::int32_t> values;

  std::size_t vertex_count() const { return offsets.size() - 1; }
  std::span<const std::int32_t> operator[](std::size_t v) const {
    return {values.data() + offsets[v], values.data() + offsets[v + 1]};
  }
  bool operator==(const Adjacency&) const = default;
};

/// Bipartite people/jobs selection edges plus directed job conflict arcs.
///
/// Immutable. The conflict structure never changes along an episode, so it is
/// shared between a graph and every state derived from it; only the selection
/// set and its indices are copied per state.
class JobAllocationGraph {
 public:
  JobAllocationGraph();

  /// Validates and canonicalizes; throws GraphError listing every violation.
  JobAllocationGraph(std::int32_t n_people, std::int32_t n_jobs,
                     std::vector<Assignment> selection, std::vector<ConflictArc> conflicts);

  static JobAllocationGraph from_candidate(const GraphCandidate& candidate);

  std::int32_t n_people() const { return n_people_; }
  std::int32_t n_jobs() const { return n_jobs_; }

  /// Canonical order: lexicographic by (person, job). Edge indices used by the
  /// Q-network and policies refer to positions in this span.
  std::span<const Assignment> selection() const { return selection_; }
  /// Canonical order: lexicographic by (from, to).
  std::span<const ConflictArc> conflicts() const { return conflicts_->arcs; }

  bool terminal() const { return selection_.empty(); }

  std::span<const JobIndex> jobs_of(PersonIndex p) const { return person_jobs_[p]; }
  std::span<const PersonIndex> people_of(JobIndex j) const { return job_people_[j]; }
  std::span<const JobIndex> conflict_out(JobIndex j) const { return conflicts_->out[j]; }
  std::span<const JobIndex> conflict_in(JobIndex j) const { return conflicts_->in[j]; }
  /// Sorted union of in- and out-neighbours.
  std::span<const JobIndex> conflict_neighbors(JobIndex j) const { return conflicts_->sym[j]; }

  bool has_conflict_arc(JobIndex from, JobIndex to) const;
  bool conflicts_either_way(JobIndex a, JobIndex b) const;

  /// Position of `a` in selection(), if present.
  std::optional<std::size_t> selection_index(Assignment a) const;
  bool has_selection(Assignment a) const { return selection_index(a).has_value(); }

  /// First position in selection() belonging to person p.
  std::size_t person_offset(PersonIndex p) const { return person_jobs_.offsets[p]; }

  std::uint64_t fingerprint() const;

  /// Same vertex counts and edge sets.
  bool operator==(const JobAllocationGraph& other) const;

  /// Same conflicts with a different (already canonical, valid) selection set.
  JobAllocationGraph with_selection(std::vector<Assignment> selection) const;

 private:
  struct ConflictIndex {
    std::vector<ConflictArc> arcs;
    Adjacency out;
    Adjacency in;
    Adjacency sym;
  };

  void rebuild_selection_index();

  std::int32_t n_people_ = 0;
  std::int32_t n_jobs_ = 0;
  std::shared_ptr<const ConflictIndex> conflicts_;
  std::vector<Assignment> selection_;
  Adjacency person_jobs_;
  Adjacency job_people_;
};

// -- Allocations --------------------------------------------------------------

/// Set of assignments taken from one graph.
class Allocation {
 public:
  Allocation() = default;
  Allocation(std::vector<Assignment> assignments, std::uint64_t graph_fingerprint);

  std::span<const Assignment> assignments() const { return assignments_; }
  std::size_t size() const { return assignments_.size(); }
  std::uint64_t graph_fingerprint() const { return graph_fingerprint_; }

  bool operator==(const Allocation&) const = default;

 private:
  std::vector<Assignment> assignments_;  // sorted, unique
  std::uint64_t graph_fingerprint_ = 0;
};

struct AllocationCheck {
  bool feasible = true;
  /// First same-person pair joined by a conflict arc, in canonical order.
  std::optional<std::pair<Assignment, Assignment>> violation;
};

/// Throws AssignmentNotInSelection when an assignment is not a selection edge.
AllocationCheck validate_allocation(const JobAllocationGraph& g, const Allocation& a);

// -- Features and transitions -------------------------------------------------

/// Initial embeddings: columns are [selection degree, conflict out-degree].
struct DegreeFeatures {
  Matrix person;  // |P| x 2, second column zero
  Matrix job;     // |J| x 2
};

DegreeFeatures degree_features(const JobAllocationGraph& g);

/// Removes `a` and every assignment of the same person that conflicts with it.
/// Throws ActionNotAvailable when `a` is not a selection edge of `g`.
JobAllocationGraph apply_assignment(const JobAllocationGraph& g, Assignment a,
                                    ConflictRemovalMode mode = ConflictRemovalMode::kBidirectional);

/// |S u C| / (|P||J| + |J|(|J|-1)).
double graph_density(const JobAllocationGraph& g);

/// Density of the directed graph on P u J in which each selection edge counts
/// as two arcs: (2|S| + |C|) / (n(n-1)) with n = |P| + |J|.
double digraph_density(const JobAllocationGraph& g);

}  // namespace jap
