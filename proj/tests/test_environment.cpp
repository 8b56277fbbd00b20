#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "jap/baselines.hpp"
#include "jap/environment.hpp"
#include "oracles.hpp"

using namespace jap;

TEST_CASE("step returns reward one and the next state") {
  const auto g = fixtures::four_by_five();
  const auto s0 = reset(g);
  CHECK(s0.steps_taken == 0);
  CHECK_FALSE(s0.terminal());
  const auto out = step(s0, {0, 0});
  CHECK(out.reward == 1.0);
  CHECK_FALSE(out.done);
  CHECK(out.next_state.steps_taken == 1);
  CHECK(out.next_state.chosen == std::vector<Assignment>{{0, 0}});
  CHECK(out.next_state.graph->selection().size() == 8);
  CHECK(*out.next_state.initial == g);
  // The input state is untouched.
  CHECK(s0.graph->selection().size() == 10);
  CHECK_THROWS_AS(step(out.next_state, {0, 1}), ActionNotAvailable);
}

TEST_CASE("episode ends when the selection set is empty") {
  const JobAllocationGraph g(1, 2, {{0, 0}, {0, 1}}, {{0, 1}});
  const auto out = step(reset(g), {0, 1});
  CHECK(out.done);
  CHECK(out.next_state.terminal());
}

TEST_CASE("the worked example reaches the optimum under the greedy choice sequence") {
  const auto g = fixtures::four_by_five();
  const auto r = rollout(g, make_greedy_policy());
  CHECK(r.total_reward == static_cast<double>(r.allocation.size()));
  CHECK(r.allocation.size() == 8);
  CHECK(validate_allocation(g, r.allocation).feasible);
}

TEST_CASE("outgoing-only removal can produce infeasible allocations") {
  const auto g = fixtures::four_by_five();
  // Taking j1 first leaves j0 -> j1 unchecked in literal mode.
  std::vector<Assignment> script{{0, 1}, {0, 0}};
  std::size_t k = 0;
  Policy scripted = [&](const EnvState& s) {
    if (k < script.size()) return script[k++];
    return s.graph->selection().front();
  };
  const auto r = rollout(g, scripted, ConflictRemovalMode::kOutgoingOnly);
  CHECK_FALSE(validate_allocation(g, r.allocation).feasible);
}

TEST_CASE("random rollouts are always feasible in bidirectional mode") {
  Rng rng(31);
  for (int i = 0; i < 300; ++i) {
    const auto g = fixtures::tiny_graph(rng, 40);
    const auto r = rollout(g, make_random_policy(rng.next_u64()));
    const std::vector<Assignment> a(r.allocation.assignments().begin(), r.allocation.assignments().end());
    CHECK(oracle::feasible(g, a));
    CHECK(r.trace.size() == a.size());
    // Maximal: every unused edge conflicts with a chosen one.
    for (const auto& e : g.selection()) {
      if (std::find(a.begin(), a.end(), e) != a.end()) continue;
      bool blocked = false;
      for (const auto& x : a) blocked |= x.person == e.person && oracle::conflict(g, x.job, e.job);
      CHECK(blocked);
    }
  }
}

TEST_CASE("policies returning unavailable actions are reported") {
  const auto g = fixtures::four_by_five();
  Policy bad = [](const EnvState&) { return Assignment{1, 0}; };
  CHECK_THROWS_AS(rollout(g, bad), PolicyReturnedUnavailableAction);
}

TEST_CASE("trace log has one line per step") {
  const auto g = fixtures::four_by_five();
  const auto r = rollout(g, make_greedy_policy());
  std::ostringstream os;
  write_trace_log(os, g, r.trace);
  const auto text = os.str();
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) >= r.trace.size());
  std::ostringstream again;
  write_trace_log(again, g, r.trace);
  CHECK(again.str() == text);
}
