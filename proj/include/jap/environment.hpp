#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

#include "jap/graph.hpp"

namespace jap {

using GraphPtr = std::shared_ptr<const JobAllocationGraph>;

/// MDP state: the current graph plus the episode trace that produced it.
struct EnvState {
  GraphPtr graph;
  GraphPtr initial;
  std::size_t steps_taken = 0;
  std::vector<Assignment> chosen;

  bool terminal() const { return graph->terminal(); }
};

struct StepOutcome {
  EnvState next_state;
  double reward = 1.0;
  bool done = false;
};

class PolicyReturnedUnavailableAction : public std::runtime_error {
 public:
  explicit PolicyReturnedUnavailableAction(Assignment a);
  Assignment action;
};

EnvState reset(GraphPtr g);
EnvState reset(const JobAllocationGraph& g);

/// Throws ActionNotAvailable when `a` is not in the state's selection set.
StepOutcome step(const EnvState& s, Assignment a,
                 ConflictRemovalMode mode = ConflictRemovalMode::kBidirectional);

using Policy = std::function<Assignment(const EnvState&)>;

struct RolloutResult {
  Allocation allocation;
  double total_reward = 0.0;
  std::vector<Assignment> trace;  // in play order
};

/// Plays `policy` until no assignment is left.
RolloutResult rollout(const JobAllocationGraph& g, const Policy& policy,
                      ConflictRemovalMode mode = ConflictRemovalMode::kBidirectional);

/// Replays a trace and writes one `step person job remaining` line per step.
void write_trace_log(std::ostream& os, const JobAllocationGraph& g,
                     const std::vector<Assignment>& trace,
                     ConflictRemovalMode mode = ConflictRemovalMode::kBidirectional);

}  // namespace jap
