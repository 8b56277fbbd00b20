#include "jap/graph.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

namespace jap {

namespace {

Adjacency build_adjacency(std::size_t vertex_count,
                          const std::vector<std::pair<std::int32_t, std::int32_t>>& sorted_pairs) {
  Adjacency adj;
  adj.offsets.assign(vertex_count + 1, 0);
  for (const auto& [v, _] : sorted_pairs) ++adj.offsets[v + 1];
  for (std::size_t v = 0; v < vertex_count; ++v) adj.offsets[v + 1] += adj.offsets[v];
  adj.values.reserve(sorted_pairs.size());
  for (const auto& [_, w] : sorted_pairs) adj.values.push_back(w);
  return adj;
}

std::string describe(const CandidateEdge& e) {
  auto side = [](Side s) { return s == Side::kPerson ? "p" : "j"; };
  std::ostringstream os;
  os << '(' << side(e.a.side) << e.a.index << ", " << side(e.b.side) << e.b.index << ')';
  return os.str();
}

void hash_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001B3ULL;
  }
}

GraphCandidate to_candidate(std::int32_t n_people, std::int32_t n_jobs,
                            const std::vector<Assignment>& selection,
                            const std::vector<ConflictArc>& conflicts) {
  GraphCandidate c;
  c.n_people = n_people;
  c.n_jobs = n_jobs;
  c.selection.reserve(selection.size());
  for (const auto& a : selection)
    c.selection.push_back({{Side::kPerson, a.person}, {Side::kJob, a.job}});
  c.conflicts.reserve(conflicts.size());
  for (const auto& arc : conflicts)
    c.conflicts.push_back({{Side::kJob, arc.from}, {Side::kJob, arc.to}});
  return c;
}

}  // namespace

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kNegativeCount: return "NegativeCount";
    case ViolationKind::kIndexOutOfRange: return "IndexOutOfRange";
    case ViolationKind::kSelectionNotBipartite: return "SelectionNotBipartite";
    case ViolationKind::kConflictNotJobToJob: return "ConflictNotJobToJob";
    case ViolationKind::kSelfConflict: return "SelfConflict";
    case ViolationKind::kDuplicateSelection: return "DuplicateSelection";
    case ViolationKind::kDuplicateConflict: return "DuplicateConflict";
  }
  return "Unknown";
}

std::vector<GraphViolation> validate_graph(const GraphCandidate& candidate) {
  std::vector<GraphViolation> out;
  if (candidate.n_people < 0 || candidate.n_jobs < 0) {
    out.push_back({ViolationKind::kNegativeCount, false, 0, "vertex counts must be non-negative"});
    return out;
  }
  auto in_range = [&](const VertexRef& v) {
    const std::int64_t n = v.side == Side::kPerson ? candidate.n_people : candidate.n_jobs;
    return v.index >= 0 && v.index < n;
  };

  std::set<std::pair<std::int64_t, std::int64_t>> seen_selection;
  for (std::size_t i = 0; i < candidate.selection.size(); ++i) {
    const auto& e = candidate.selection[i];
    if (e.a.side == e.b.side) {
      out.push_back({ViolationKind::kSelectionNotBipartite, false, i, describe(e)});
      continue;
    }
    if (!in_range(e.a) || !in_range(e.b)) {
      out.push_back({ViolationKind::kIndexOutOfRange, false, i, describe(e)});
      continue;
    }
    const auto& person = e.a.side == Side::kPerson ? e.a : e.b;
    const auto& job = e.a.side == Side::kJob ? e.a : e.b;
    if (!seen_selection.emplace(person.index, job.index).second)
      out.push_back({ViolationKind::kDuplicateSelection, false, i, describe(e)});
  }

  std::set<std::pair<std::int64_t, std::int64_t>> seen_conflict;
  for (std::size_t i = 0; i < candidate.conflicts.size(); ++i) {
    const auto& e = candidate.conflicts[i];
    if (e.a.side != Side::kJob || e.b.side != Side::kJob) {
      out.push_back({ViolationKind::kConflictNotJobToJob, true, i, describe(e)});
      continue;
    }
    if (!in_range(e.a) || !in_range(e.b)) {
      out.push_back({ViolationKind::kIndexOutOfRange, true, i, describe(e)});
      continue;
    }
    if (e.a.index == e.b.index) {
      out.push_back({ViolationKind::kSelfConflict, true, i, describe(e)});
      continue;
    }
    if (!seen_conflict.emplace(e.a.index, e.b.index).second)
      out.push_back({ViolationKind::kDuplicateConflict, true, i, describe(e)});
  }
  return out;
}

namespace {

std::string summarize(const std::vector<GraphViolation>& violations) {
  std::ostringstream os;
  os << "invalid job allocation graph:";
  for (const auto& v : violations)
    os << ' ' << to_string(v.kind) << (v.in_conflicts ? " conflict#" : " selection#")
       << v.edge_index << ' ' << v.detail << ';';
  return os.str();
}

std::string describe(Assignment a) {
  return "{p" + std::to_string(a.person) + ", j" + std::to_string(a.job) + "}";
}

}  // namespace

GraphError::GraphError(std::vector<GraphViolation> violations)
    : std::invalid_argument(summarize(violations)), violations_(std::move(violations)) {}

ActionNotAvailable::ActionNotAvailable(Assignment a)
    : std::invalid_argument("action not available: " + describe(a)), action(a) {}

AssignmentNotInSelection::AssignmentNotInSelection(Assignment a)
    : std::invalid_argument("assignment not in selection set: " + describe(a)), assignment(a) {}

JobAllocationGraph::JobAllocationGraph()
    : conflicts_(std::make_shared<const ConflictIndex>()) {}

JobAllocationGraph::JobAllocationGraph(std::int32_t n_people, std::int32_t n_jobs,
                                       std::vector<Assignment> selection,
                                       std::vector<ConflictArc> conflicts)
    : n_people_(n_people), n_jobs_(n_jobs) {
  if (auto violations = validate_graph(to_candidate(n_people, n_jobs, selection, conflicts));
      !violations.empty())
    throw GraphError(std::move(violations));

  std::sort(selection.begin(), selection.end());
  std::sort(conflicts.begin(), conflicts.end());

  auto index = std::make_shared<ConflictIndex>();
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  pairs.reserve(conflicts.size());
  for (const auto& arc : conflicts) pairs.emplace_back(arc.from, arc.to);
  index->out = build_adjacency(n_jobs, pairs);

  std::vector<std::pair<std::int32_t, std::int32_t>> reversed;
  reversed.reserve(pairs.size());
  for (const auto& [u, v] : pairs) reversed.emplace_back(v, u);
  std::sort(reversed.begin(), reversed.end());
  index->in = build_adjacency(n_jobs, reversed);

  pairs.insert(pairs.end(), reversed.begin(), reversed.end());
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  index->sym = build_adjacency(n_jobs, pairs);

  index->arcs = std::move(conflicts);
  conflicts_ = std::move(index);
  selection_ = std::move(selection);
  rebuild_selection_index();
}

JobAllocationGraph JobAllocationGraph::from_candidate(const GraphCandidate& candidate) {
  if (auto violations = validate_graph(candidate); !violations.empty())
    throw GraphError(std::move(violations));
  if (candidate.n_people > std::numeric_limits<std::int32_t>::max() ||
      candidate.n_jobs > std::numeric_limits<std::int32_t>::max())
    throw GraphError({{ViolationKind::kIndexOutOfRange, false, 0, "vertex count too large"}});

  std::vector<Assignment> selection;
  selection.reserve(candidate.selection.size());
  for (const auto& e : candidate.selection) {
    const auto& person = e.a.side == Side::kPerson ? e.a : e.b;
    const auto& job = e.a.side == Side::kJob ? e.a : e.b;
    selection.push_back({static_cast<PersonIndex>(person.index), static_cast<JobIndex>(job.index)});
  }
  std::vector<ConflictArc> conflicts;
  conflicts.reserve(candidate.conflicts.size());
  for (const auto& e : candidate.conflicts)
    conflicts.push_back({static_cast<JobIndex>(e.a.index), static_cast<JobIndex>(e.b.index)});
  return JobAllocationGraph(static_cast<std::int32_t>(candidate.n_people),
                            static_cast<std::int32_t>(candidate.n_jobs), std::move(selection),
                            std::move(conflicts));
}

void JobAllocationGraph::rebuild_selection_index() {
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  pairs.reserve(selection_.size());
  for (const auto& a : selection_) pairs.emplace_back(a.person, a.job);
  person_jobs_ = build_adjacency(n_people_, pairs);

  for (auto& [p, j] : pairs) std::swap(p, j);
  std::sort(pairs.begin(), pairs.end());
  job_people_ = build_adjacency(n_jobs_, pairs);
}

bool JobAllocationGraph::has_conflict_arc(JobIndex from, JobIndex to) const {
  const auto out = conflict_out(from);
  return std::binary_search(out.begin(), out.end(), to);
}

bool JobAllocationGraph::conflicts_either_way(JobIndex a, JobIndex b) const {
  const auto sym = conflict_neighbors(a);
  return std::binary_search(sym.begin(), sym.end(), b);
}

std::optional<std::size_t> JobAllocationGraph::selection_index(Assignment a) const {
  if (a.person < 0 || a.person >= n_people_ || a.job < 0 || a.job >= n_jobs_) return std::nullopt;
  const auto jobs = jobs_of(a.person);
  const auto it = std::lower_bound(jobs.begin(), jobs.end(), a.job);
  if (it == jobs.end() || *it != a.job) return std::nullopt;
  return person_jobs_.offsets[a.person] + static_cast<std::size_t>(it - jobs.begin());
}

std::uint64_t JobAllocationGraph::fingerprint() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  hash_mix(h, static_cast<std::uint64_t>(n_people_));
  hash_mix(h, static_cast<std::uint64_t>(n_jobs_));
  hash_mix(h, selection_.size());
  for (const auto& a : selection_) {
    hash_mix(h, static_cast<std::uint64_t>(a.person));
    hash_mix(h, static_cast<std::uint64_t>(a.job));
  }
  hash_mix(h, conflicts_->arcs.size());
  for (const auto& arc : conflicts_->arcs) {
    hash_mix(h, static_cast<std::uint64_t>(arc.from));
    hash_mix(h, static_cast<std::uint64_t>(arc.to));
  }
  return h;
}

bool JobAllocationGraph::operator==(const JobAllocationGraph& other) const {
  return n_people_ == other.n_people_ && n_jobs_ == other.n_jobs_ &&
         selection_ == other.selection_ &&
         (conflicts_ == other.conflicts_ || conflicts_->arcs == other.conflicts_->arcs);
}

JobAllocationGraph JobAllocationGraph::with_selection(std::vector<Assignment> selection) const {
  JobAllocationGraph next;
  next.n_people_ = n_people_;
  next.n_jobs_ = n_jobs_;
  next.conflicts_ = conflicts_;
  next.selection_ = std::move(selection);
  next.rebuild_selection_index();
  return next;
}

Allocation::Allocation(std::vector<Assignment> assignments, std::uint64_t graph_fingerprint)
    : assignments_(std::move(assignments)), graph_fingerprint_(graph_fingerprint) {
  std::sort(assignments_.begin(), assignments_.end());
  assignments_.erase(std::unique(assignments_.begin(), assignments_.end()), assignments_.end());
}

AllocationCheck validate_allocation(const JobAllocationGraph& g, const Allocation& a) {
  for (const auto& x : a.assignments())
    if (!g.has_selection(x)) throw AssignmentNotInSelection(x);

  // Assignments are sorted by person, so each person's jobs form a contiguous run.
  const auto items = a.assignments();
  for (std::size_t begin = 0; begin < items.size();) {
    std::size_t end = begin;
    while (end < items.size() && items[end].person == items[begin].person) ++end;
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t k = i + 1; k < end; ++k)
        if (g.conflicts_either_way(items[i].job, items[k].job))
          return {false, std::make_pair(items[i], items[k])};
    begin = end;
  }
  return {};
}

DegreeFeatures degree_features(const JobAllocationGraph& g) {
  DegreeFeatures f{Matrix(g.n_people(), 2), Matrix(g.n_jobs(), 2)};
  for (PersonIndex p = 0; p < g.n_people(); ++p)
    f.person(p, 0) = static_cast<double>(g.jobs_of(p).size());
  for (JobIndex j = 0; j < g.n_jobs(); ++j) {
    f.job(j, 0) = static_cast<double>(g.people_of(j).size());
    f.job(j, 1) = static_cast<double>(g.conflict_out(j).size());
  }
  return f;
}

JobAllocationGraph apply_assignment(const JobAllocationGraph& g, Assignment a,
                                    ConflictRemovalMode mode) {
  if (!g.has_selection(a)) throw ActionNotAvailable(a);

  const auto removed = mode == ConflictRemovalMode::kBidirectional ? g.conflict_neighbors(a.job)
                                                                   : g.conflict_out(a.job);
  const auto all = g.selection();
  std::vector<Assignment> next;
  next.reserve(all.size() - 1);
  for (const auto& x : all) {
    if (x.person == a.person &&
        (x.job == a.job || std::binary_search(removed.begin(), removed.end(), x.job)))
      continue;
    next.push_back(x);
  }
  return g.with_selection(std::move(next));
}

double graph_density(const JobAllocationGraph& g) {
  const double p = g.n_people();
  const double j = g.n_jobs();
  const double denom = p * j + j * (j - 1.0);
  if (denom <= 0.0) return 0.0;
  return static_cast<double>(g.selection().size() + g.conflicts().size()) / denom;
}

double digraph_density(const JobAllocationGraph& g) {
  const double n = static_cast<double>(g.n_people()) + g.n_jobs();
  if (n < 2.0) return 0.0;
  return static_cast<double>(2 * g.selection().size() + g.conflicts().size()) / (n * (n - 1.0));
}

}  // namespace jap
