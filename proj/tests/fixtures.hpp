#pragma once

#include <vector>

#include "jap/generator.hpp"
#include "jap/graph.hpp"
#include "jap/rng.hpp"

namespace fixtures {

// Four people, five jobs. Person 0 can do j0, j1, j2 with j0 -> j1 and
// j2 -> j1 in conflict; person 2 faces the mutual pair j3 <-> j4. The
// optimum is 2 per person, 8 in total.
inline jap::JobAllocationGraph four_by_five() {
  return jap::JobAllocationGraph(
      4, 5,
      {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 3}, {2, 2}, {2, 3}, {2, 4}, {3, 0}, {3, 4}},
      {{0, 1}, {2, 1}, {3, 4}, {4, 3}});
}

/// Small ER or BA graph with at most 3 people and 10 jobs whose selection
/// set has at most `max_edges` edges (redrawn until it fits).
inline jap::JobAllocationGraph tiny_graph(jap::Rng& rng, std::size_t max_edges = 20) {
  while (true) {
    jap::GeneratorConfig c;
    c.n_people = 1 + static_cast<std::int32_t>(rng.index(3));
    c.n_jobs = 2 + static_cast<std::int32_t>(rng.index(9));
    c.family = rng.bernoulli(0.5) ? jap::GraphFamily::kErdosRenyi : jap::GraphFamily::kBarabasiAlbert;
    c.p_conflict = 0.05 + 0.4 * rng.uniform();
    c.p_select = 0.3 + 0.6 * rng.uniform();
    c.ba_m = 1 + static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(std::min(3, c.n_jobs - 1))));
    c.seed = rng.next_u64();
    auto g = jap::generate(c);
    if (g.selection().size() <= max_edges) return g;
  }
}

}  // namespace fixtures
