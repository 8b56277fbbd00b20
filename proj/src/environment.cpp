#include "jap/environment.hpp"

#include <ostream>
#include <string>

namespace jap {

PolicyReturnedUnavailableAction::PolicyReturnedUnavailableAction(Assignment a)
    : std::runtime_error("policy returned unavailable action {p" + std::to_string(a.person) +
                         ", j" + std::to_string(a.job) + "}"),
      action(a) {}

EnvState reset(GraphPtr g) {
  if (!g) throw std::invalid_argument("InvalidGraph: null graph");
  EnvState s;
  s.initial = g;
  s.graph = std::move(g);
  return s;
}

EnvState reset(const JobAllocationGraph& g) {
  return reset(std::make_shared<const JobAllocationGraph>(g));
}

StepOutcome step(const EnvState& s, Assignment a, ConflictRemovalMode mode) {
  StepOutcome out;
  out.next_state.graph = std::make_shared<const JobAllocationGraph>(apply_assignment(*s.graph, a, mode));
  out.next_state.initial = s.initial;
  out.next_state.steps_taken = s.steps_taken + 1;
  out.next_state.chosen = s.chosen;
  out.next_state.chosen.push_back(a);
  out.reward = 1.0;
  out.done = out.next_state.graph->terminal();
  return out;
}

RolloutResult rollout(const JobAllocationGraph& g, const Policy& policy, ConflictRemovalMode mode) {
  EnvState s = reset(g);
  double total = 0.0;
  while (!s.terminal()) {
    const Assignment a = policy(s);
    if (!s.graph->has_selection(a)) throw PolicyReturnedUnavailableAction(a);
    auto outcome = step(s, a, mode);
    total += outcome.reward;
    s = std::move(outcome.next_state);
  }
  RolloutResult r;
  r.allocation = Allocation(s.chosen, g.fingerprint());
  r.total_reward = total;
  r.trace = std::move(s.chosen);
  return r;
}

void write_trace_log(std::ostream& os, const JobAllocationGraph& g,
                     const std::vector<Assignment>& trace, ConflictRemovalMode mode) {
  os << "# step person job remaining_selection\n";
  JobAllocationGraph current = g;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    current = apply_assignment(current, trace[t], mode);
    os << t << ' ' << trace[t].person << ' ' << trace[t].job << ' ' << current.selection().size()
       << '\n';
  }
}

}  // namespace jap
