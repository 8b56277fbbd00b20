#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "jap/environment.hpp"
#include "jap/graph.hpp"
#include "jap/qnet.hpp"
#include "jap/rng.hpp"

namespace jap {

/// How the greedy baseline measures job degree.
enum class GreedyDegree {
  kSelection,  // number of remaining selection edges
  kTotal,      // selection edges plus conflict arcs in either direction
};

/// Job of minimum degree among jobs with at least one selection edge, then
/// its person of minimum selection degree; lowest index breaks ties.
/// Throws EmptyActionSet.
Assignment greedy_action(const JobAllocationGraph& g, GreedyDegree degree = GreedyDegree::kSelection);

/// Uniform over the selection set. Throws EmptyActionSet.
Assignment random_action(const JobAllocationGraph& g, Rng& rng);

/// Highest Q-value under `params`, lowest edge index on ties.
Assignment gnn_action(const JobAllocationGraph& g, const QNetworkParams& params);

struct PolicyKind {
  enum class Tag { kGnn, kUntrainedGnn, kGreedy, kRandom };
  Tag tag = Tag::kGreedy;
  std::string checkpoint;  // kGnn
  std::uint64_t seed = 0;  // kUntrainedGnn, kRandom
  GreedyDegree greedy_degree = GreedyDegree::kSelection;  // kGreedy

  /// "greedy", "greedy-total", "random", "untrained", "gnn:PATH".
  static PolicyKind parse(const std::string& text);
  std::string label() const;
  bool stochastic() const { return tag == Tag::kRandom || tag == Tag::kUntrainedGnn; }
};

Policy make_greedy_policy(GreedyDegree degree = GreedyDegree::kSelection);
Policy make_random_policy(std::uint64_t seed);
Policy make_gnn_policy(std::shared_ptr<const QNetworkParams> params);

// -- Exact optimum ------------------------------------------------------------

enum class OptimumMethod { kBruteForce, kDecomposedBnb };

struct OptimumResult {
  std::size_t size = 0;
  Allocation witness;
  OptimumMethod method = OptimumMethod::kDecomposedBnb;
  std::uint64_t node_count = 0;
  /// False when a node budget ran out; size is then only a lower bound.
  bool optimal = true;
};

class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr std::uint64_t kDefaultNodeBudget = 10'000'000;

/// Maximum independent set of an undirected graph given as sorted adjacency
/// lists, by branch and bound (vertices ordered by degree, greedy-colouring
/// bound, greedy initial incumbent).
struct IndependentSetResult {
  std::vector<std::int32_t> vertices;
  std::uint64_t node_count = 0;
  bool optimal = true;
};
IndependentSetResult maximum_independent_set(const std::vector<std::vector<std::int32_t>>& adjacency,
                                             std::uint64_t node_budget = kDefaultNodeBudget);

/// People never interact: the optimum is the sum over people of a maximum
/// independent set in the (symmetrised) conflict graph induced on their
/// eligible jobs. `node_budget` applies per person. Never throws on budget;
/// inspect `optimal`.
OptimumResult exact_optimum(const JobAllocationGraph& g,
                            std::uint64_t node_budget = kDefaultNodeBudget);

/// |allocation| / optimum. Throws BudgetExceeded if the optimum is not proven.
double approximation_ratio(std::size_t allocation_size, const OptimumResult& optimum);
double approximation_ratio(const Policy& policy, const JobAllocationGraph& g,
                           const OptimumResult& optimum,
                           ConflictRemovalMode mode = ConflictRemovalMode::kBidirectional);

}  // namespace jap
