#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "jap/baselines.hpp"
#include "jap/trainer.hpp"
#include "oracles.hpp"

using namespace jap;

TEST_CASE("exact optimum of the worked example") {
  const auto g = fixtures::four_by_five();
  const auto r = exact_optimum(g);
  CHECK(r.optimal);
  CHECK(r.size == 8);
  CHECK(r.witness.size() == 8);
  CHECK(validate_allocation(g, r.witness).feasible);
}

TEST_CASE("exact optimum matches subset enumeration") {
  Rng rng(61);
  for (int i = 0; i < 100; ++i) {
    const auto g = fixtures::tiny_graph(rng);
    const auto r = exact_optimum(g);
    REQUIRE(r.optimal);
    CHECK(r.size == oracle::brute_force_optimum(g));
    CHECK(r.size == oracle::brute_force_person_sum(g));
    const std::vector<Assignment> w(r.witness.assignments().begin(), r.witness.assignments().end());
    CHECK(w.size() == r.size);
    CHECK(oracle::feasible(g, w));
  }
}

TEST_CASE("independent set solver on known graphs") {
  // 5-cycle: alpha = 2. Complete graph K4: alpha = 1. Empty graph on 6: 6.
  const std::vector<std::vector<std::int32_t>> c5{{1, 4}, {0, 2}, {1, 3}, {2, 4}, {0, 3}};
  CHECK(maximum_independent_set(c5).vertices.size() == 2);
  const std::vector<std::vector<std::int32_t>> k4{{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  CHECK(maximum_independent_set(k4).vertices.size() == 1);
  CHECK(maximum_independent_set(std::vector<std::vector<std::int32_t>>(6)).vertices.size() == 6);
  CHECK(maximum_independent_set({}).vertices.empty());
  // Petersen graph: alpha = 4.
  const std::vector<std::vector<std::int32_t>> pet{{1, 4, 5}, {0, 2, 6}, {1, 3, 7}, {2, 4, 8}, {0, 3, 9},
                                                   {0, 7, 8}, {1, 8, 9}, {2, 5, 9}, {3, 5, 6}, {4, 6, 7}};
  const auto r = maximum_independent_set(pet);
  CHECK(r.vertices.size() == 4);
  for (auto u : r.vertices)
    for (auto v : r.vertices)
      for (auto w : pet[static_cast<std::size_t>(u)]) CHECK(w != v);
}

TEST_CASE("node budget exhaustion is reported, not thrown") {
  GeneratorConfig c = preset("er");
  c.seed = 1;
  const auto g = generate(c);
  const auto r = exact_optimum(g, 50);
  CHECK_FALSE(r.optimal);
  CHECK(validate_allocation(g, r.witness).feasible);
  CHECK(r.witness.size() == r.size);
  CHECK_THROWS_AS(approximation_ratio(r.size, r), BudgetExceeded);
}

TEST_CASE("greedy picks the least contested job") {
  // Job degrees: j0 = 2, j1 = 1, j2 = 3. j1's only person is p1.
  const JobAllocationGraph g(3, 3, {{0, 0}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 2}}, {});
  CHECK(greedy_action(g) == Assignment{1, 1});
  // Ties on job degree go to the lowest job, then the least loaded person.
  const JobAllocationGraph h(2, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {});
  CHECK(greedy_action(h) == Assignment{0, 0});
  const JobAllocationGraph k(2, 2, {{0, 0}, {0, 1}, {1, 1}}, {});
  CHECK(greedy_action(k) == Assignment{0, 0});
  // Conflict arcs count only for the total-degree variant.
  const JobAllocationGraph t(1, 3, {{0, 0}, {0, 1}, {0, 2}}, {{0, 1}, {0, 2}});
  CHECK(greedy_action(t, GreedyDegree::kSelection) == Assignment{0, 0});
  CHECK(greedy_action(t, GreedyDegree::kTotal) == Assignment{0, 1});
  CHECK_THROWS_AS(greedy_action(JobAllocationGraph(1, 1, {}, {})), EmptyActionSet);
}

TEST_CASE("random action is uniform over the selection set") {
  const auto g = fixtures::four_by_five();
  Rng rng(62);
  std::map<Assignment, int> count;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++count[random_action(g, rng)];
  CHECK(count.size() == g.selection().size());
  for (const auto& [a, n] : count) CHECK(std::abs(n / double(draws) - 0.1) < 0.006);
}

TEST_CASE("gnn action is the argmax of the Q-values") {
  const auto g = fixtures::four_by_five();
  auto theta = init_params(63);
  oracle::randomize(theta, 64);
  const auto q = q_values(g, theta);
  CHECK(gnn_action(g, theta) == g.selection()[argmax_index(q)]);
}

TEST_CASE("approximation ratio") {
  const auto g = fixtures::four_by_five();
  const auto opt = exact_optimum(g);
  CHECK(approximation_ratio(6, opt) == 0.75);
  CHECK(approximation_ratio(make_greedy_policy(), g, opt) <= 1.0);
  const JobAllocationGraph empty(1, 1, {}, {});
  CHECK(approximation_ratio(0, exact_optimum(empty)) == 1.0);
}

TEST_CASE("policy kinds parse and print") {
  CHECK(PolicyKind::parse("greedy").tag == PolicyKind::Tag::kGreedy);
  const auto total = PolicyKind::parse("greedy-total");
  CHECK(total.tag == PolicyKind::Tag::kGreedy);
  CHECK(total.greedy_degree == GreedyDegree::kTotal);
  CHECK(total.label() == "greedy-total");
  CHECK(PolicyKind::parse("greedy").greedy_degree == GreedyDegree::kSelection);
  CHECK(PolicyKind::parse("random").stochastic());
  CHECK(PolicyKind::parse("untrained").tag == PolicyKind::Tag::kUntrainedGnn);
  const auto k = PolicyKind::parse("gnn:model.json");
  CHECK(k.tag == PolicyKind::Tag::kGnn);
  CHECK(k.checkpoint == "model.json");
  CHECK_THROWS(PolicyKind::parse("oracle"));
}
