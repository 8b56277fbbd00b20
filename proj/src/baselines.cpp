#include "jap/baselines.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>

#include "jap/trainer.hpp"

namespace jap {

Assignment greedy_action(const JobAllocationGraph& g, GreedyDegree degree) {
  if (g.terminal()) throw EmptyActionSet();
  JobIndex best_job = -1;
  std::size_t best_degree = std::numeric_limits<std::size_t>::max();
  for (JobIndex j = 0; j < g.n_jobs(); ++j) {
    const std::size_t sel = g.people_of(j).size();
    if (sel == 0) continue;
    std::size_t d = sel;
    if (degree == GreedyDegree::kTotal) d += g.conflict_out(j).size() + g.conflict_in(j).size();
    if (d < best_degree) {
      best_degree = d;
      best_job = j;
    }
  }
  PersonIndex best_person = -1;
  std::size_t best_person_degree = std::numeric_limits<std::size_t>::max();
  for (PersonIndex p : g.people_of(best_job)) {
    const std::size_t d = g.jobs_of(p).size();
    if (d < best_person_degree) {
      best_person_degree = d;
      best_person = p;
    }
  }
  return {best_person, best_job};
}

Assignment random_action(const JobAllocationGraph& g, Rng& rng) {
  if (g.terminal()) throw EmptyActionSet();
  return g.selection()[rng.index(g.selection().size())];
}

Assignment gnn_action(const JobAllocationGraph& g, const QNetworkParams& params) {
  if (g.terminal()) throw EmptyActionSet();
  return g.selection()[argmax_index(q_values(g, params))];
}

PolicyKind PolicyKind::parse(const std::string& text) {
  PolicyKind k;
  if (text == "greedy" || text == "greedy-total") {
    k.tag = Tag::kGreedy;
    if (text == "greedy-total") k.greedy_degree = GreedyDegree::kTotal;
  } else if (text == "random") {
    k.tag = Tag::kRandom;
  } else if (text == "untrained" || text == "untrained-gnn") {
    k.tag = Tag::kUntrainedGnn;
  } else if (text.rfind("gnn:", 0) == 0 && text.size() > 4) {
    k.tag = Tag::kGnn;
    k.checkpoint = text.substr(4);
  } else {
    throw std::invalid_argument("unknown policy '" + text + "' (greedy|greedy-total|random|untrained|gnn:CKPT)");
  }
  return k;
}

std::string PolicyKind::label() const {
  switch (tag) {
    case Tag::kGreedy: return greedy_degree == GreedyDegree::kTotal ? "greedy-total" : "greedy";
    case Tag::kRandom: return "random";
    case Tag::kUntrainedGnn: return "untrained-gnn";
    case Tag::kGnn: return "gnn:" + checkpoint;
  }
  return "unknown";
}

Policy make_greedy_policy(GreedyDegree degree) {
  return [degree](const EnvState& s) { return greedy_action(*s.graph, degree); };
}

Policy make_random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const EnvState& s) { return random_action(*s.graph, *rng); };
}

Policy make_gnn_policy(std::shared_ptr<const QNetworkParams> params) {
  return [params = std::move(params)](const EnvState& s) { return gnn_action(*s.graph, *params); };
}

// -- Maximum independent set --------------------------------------------------

namespace {

// Max clique in the complement graph over bitsets; vertex order is fixed so
// that lower indices have higher complement degree. Colour classes below the
// pruning threshold are filled first, and a vertex that would land above it
// is re-coloured by swapping with a single conflicting vertex when possible.
class CliqueSearch {
 public:
  CliqueSearch(std::size_t n, std::uint64_t budget) : n_(n), words_((n + 63) / 64), budget_(budget) {
    comp_.assign(n * words_, 0);
    candidates_.assign((n + 2) * words_, 0);
    branch_.resize(n + 2);
    classes_.assign((n + 1) * words_, 0);
    uncolored_.assign(words_, 0);
    scratch_.assign(words_, 0);
  }

  void add_compatible(std::size_t u, std::size_t v) {
    comp_[u * words_ + v / 64] |= std::uint64_t{1} << (v % 64);
    comp_[v * words_ + u / 64] |= std::uint64_t{1} << (u % 64);
  }

  void seed_incumbent(std::vector<std::size_t> clique) { best_ = std::move(clique); }

  void run() {
    if (n_ == 0) return;
    std::uint64_t* all = level(0);
    for (std::size_t v = 0; v < n_; ++v) all[v / 64] |= std::uint64_t{1} << (v % 64);
    expand(0);
  }

  const std::vector<std::size_t>& best() const { return best_; }
  std::uint64_t nodes() const { return nodes_; }
  bool exhausted() const { return out_of_budget_; }

 private:
  const std::uint64_t* compatible(std::size_t v) const { return comp_.data() + v * words_; }
  std::uint64_t* level(std::size_t depth) { return candidates_.data() + depth * words_; }
  std::uint64_t* klass(std::size_t c) { return classes_.data() + c * words_; }

  // Vertices of `cand` that may still extend the current clique past the
  // incumbent, with their colour bounds, in ascending colour order.
  void colour(const std::uint64_t* cand, std::vector<std::pair<std::size_t, std::size_t>>& order) {
    order.clear();
    const std::size_t kmin =
        best_.size() + 1 > current_.size() ? best_.size() + 1 - current_.size() : 1;
    std::copy(cand, cand + words_, uncolored_.begin());
    // Classes 1 .. kmin-1 never produce branch points.
    std::size_t used = 0;
    while (used + 1 < kmin && any(uncolored_.data())) {
      std::uint64_t* k = klass(++used);
      std::fill(k, k + words_, 0);
      std::copy(uncolored_.begin(), uncolored_.end(), scratch_.begin());
      while (true) {
        const auto v = first(scratch_.data());
        if (v == n_) break;
        set(k, v);
        clear(uncolored_.data(), v);
        clear(scratch_.data(), v);
        const std::uint64_t* c = compatible(v);
        for (std::size_t w = 0; w < words_; ++w) scratch_[w] &= ~c[w];
      }
    }
    if (!any(uncolored_.data())) return;
    if (used + 1 == kmin) {
      for (std::size_t v = first(uncolored_.data()); v != n_; v = next(uncolored_.data(), v))
        if (renumber(v, used)) clear(uncolored_.data(), v);
    }
    std::size_t c = used;
    while (any(uncolored_.data())) {
      ++c;
      std::copy(uncolored_.begin(), uncolored_.end(), scratch_.begin());
      while (true) {
        const auto v = first(scratch_.data());
        if (v == n_) break;
        clear(uncolored_.data(), v);
        clear(scratch_.data(), v);
        const std::uint64_t* cv = compatible(v);
        for (std::size_t w = 0; w < words_; ++w) scratch_[w] &= ~cv[w];
        if (c >= kmin) order.emplace_back(v, c);
      }
    }
  }

  // Tries to place v into one of classes 1..k by moving its only neighbour in
  // some class to another class it does not touch.
  bool renumber(std::size_t v, std::size_t k) {
    const std::uint64_t* cv = compatible(v);
    for (std::size_t c1 = 1; c1 <= k; ++c1) {
      std::uint64_t* k1 = klass(c1);
      std::size_t hit = n_;
      int count = 0;
      for (std::size_t w = 0; w < words_ && count < 2; ++w) {
        const std::uint64_t m = k1[w] & cv[w];
        if (!m) continue;
        count += std::popcount(m) > 1 ? 2 : 1;
        hit = w * 64 + static_cast<std::size_t>(std::countr_zero(m));
      }
      if (count != 1) continue;
      const std::uint64_t* ch = compatible(hit);
      for (std::size_t c2 = c1 + 1; c2 <= k; ++c2) {
        std::uint64_t* k2 = klass(c2);
        bool clash = false;
        for (std::size_t w = 0; w < words_ && !clash; ++w) clash = (k2[w] & ch[w]) != 0;
        if (clash) continue;
        clear(k1, hit);
        set(k2, hit);
        set(k1, v);
        return true;
      }
    }
    return false;
  }

  void expand(std::size_t depth) {
    if (out_of_budget_) return;
    if (++nodes_ > budget_) {
      out_of_budget_ = true;
      return;
    }
    std::uint64_t* cand = level(depth);
    std::uint64_t* next_cand = level(depth + 1);
    auto& order = branch_[depth];
    colour(cand, order);

    for (std::size_t k = order.size(); k-- > 0;) {
      const auto [v, c] = order[k];
      if (current_.size() + c <= best_.size()) return;
      current_.push_back(v);
      const std::uint64_t* cv = compatible(v);
      for (std::size_t w = 0; w < words_; ++w) next_cand[w] = cand[w] & cv[w];
      if (!any(next_cand)) {
        if (current_.size() > best_.size()) best_ = current_;
      } else {
        expand(depth + 1);
        if (out_of_budget_) return;
      }
      current_.pop_back();
      clear(cand, v);
    }
  }

  bool any(const std::uint64_t* bits) const {
    for (std::size_t w = 0; w < words_; ++w)
      if (bits[w]) return true;
    return false;
  }
  std::size_t first(const std::uint64_t* bits) const {
    for (std::size_t w = 0; w < words_; ++w)
      if (bits[w]) return w * 64 + static_cast<std::size_t>(std::countr_zero(bits[w]));
    return n_;
  }
  // Smallest set bit after v.
  std::size_t next(const std::uint64_t* bits, std::size_t v) const {
    std::size_t w = (v + 1) / 64;
    if (w >= words_) return n_;
    std::uint64_t m = bits[w] & (~std::uint64_t{0} << ((v + 1) % 64));
    while (true) {
      if (m) return w * 64 + static_cast<std::size_t>(std::countr_zero(m));
      if (++w == words_) return n_;
      m = bits[w];
    }
  }
  static void clear(std::uint64_t* bits, std::size_t v) { bits[v / 64] &= ~(std::uint64_t{1} << (v % 64)); }
  static void set(std::uint64_t* bits, std::size_t v) { bits[v / 64] |= std::uint64_t{1} << (v % 64); }

  std::size_t n_;
  std::size_t words_;
  std::uint64_t budget_;
  std::vector<std::uint64_t> comp_;
  std::vector<std::uint64_t> candidates_;  // one bitset per depth
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> branch_;
  std::vector<std::uint64_t> classes_;
  std::vector<std::uint64_t> uncolored_;
  std::vector<std::uint64_t> scratch_;
  std::vector<std::size_t> current_;
  std::vector<std::size_t> best_;
  std::uint64_t nodes_ = 0;
  bool out_of_budget_ = false;
};

// Repeatedly take a vertex of minimum remaining degree.
std::vector<std::int32_t> greedy_independent_set(const std::vector<std::vector<std::int32_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<char> alive(n, 1);
  std::vector<std::size_t> degree(n);
  for (std::size_t v = 0; v < n; ++v) degree[v] = adj[v].size();
  std::vector<std::int32_t> chosen;
  while (true) {
    std::size_t best = n;
    for (std::size_t v = 0; v < n; ++v)
      if (alive[v] && (best == n || degree[v] < degree[best])) best = v;
    if (best == n) break;
    chosen.push_back(static_cast<std::int32_t>(best));
    alive[best] = 0;
    for (auto u : adj[best]) {
      if (!alive[u]) continue;
      alive[u] = 0;
      for (auto w : adj[u]) --degree[w];
    }
  }
  return chosen;
}

}  // namespace

IndependentSetResult maximum_independent_set(const std::vector<std::vector<std::int32_t>>& adjacency,
                                             std::uint64_t node_budget) {
  const std::size_t n = adjacency.size();
  IndependentSetResult result;
  if (n == 0) return result;

  // Relabel in min-width order of the complement graph: repeatedly move the
  // vertex of smallest remaining complement degree (largest remaining
  // conflict degree) to the back.
  std::vector<std::size_t> order(n);
  {
    std::vector<char> alive(n, 1);
    std::vector<std::size_t> degree(n);
    for (std::size_t v = 0; v < n; ++v) degree[v] = adjacency[v].size();
    for (std::size_t pos = n; pos-- > 0;) {
      std::size_t pick = n;
      for (std::size_t v = 0; v < n; ++v)
        if (alive[v] && (pick == n || degree[v] > degree[pick])) pick = v;
      order[pos] = pick;
      alive[pick] = 0;
      for (auto u : adjacency[pick]) --degree[static_cast<std::size_t>(u)];
    }
  }
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;

  CliqueSearch search(n, node_budget);
  std::vector<char> blocked(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::fill(blocked.begin(), blocked.end(), 0);
    for (auto b : adjacency[a]) blocked[static_cast<std::size_t>(b)] = 1;
    for (std::size_t b = a + 1; b < n; ++b)
      if (!blocked[b]) search.add_compatible(rank[a], rank[b]);
  }

  std::vector<std::size_t> incumbent;
  for (auto v : greedy_independent_set(adjacency)) incumbent.push_back(rank[v]);
  search.seed_incumbent(std::move(incumbent));
  search.run();

  for (auto v : search.best()) result.vertices.push_back(static_cast<std::int32_t>(order[v]));
  std::sort(result.vertices.begin(), result.vertices.end());
  result.node_count = search.nodes();
  result.optimal = !search.exhausted();
  return result;
}

OptimumResult exact_optimum(const JobAllocationGraph& g, std::uint64_t node_budget) {
  OptimumResult result;
  result.method = OptimumMethod::kDecomposedBnb;
  std::vector<Assignment> witness;
  for (PersonIndex p = 0; p < g.n_people(); ++p) {
    const auto jobs = g.jobs_of(p);
    std::vector<std::vector<std::int32_t>> adj(jobs.size());
    for (std::size_t a = 0; a < jobs.size(); ++a) {
      // Both lists are sorted: intersect the job's conflict neighbours with the
      // person's eligible jobs.
      const auto nbrs = g.conflict_neighbors(jobs[a]);
      std::size_t x = 0, y = 0;
      while (x < nbrs.size() && y < jobs.size()) {
        if (nbrs[x] < jobs[y]) {
          ++x;
        } else if (jobs[y] < nbrs[x]) {
          ++y;
        } else {
          adj[a].push_back(static_cast<std::int32_t>(y));
          ++x;
          ++y;
        }
      }
    }
    const auto mis = maximum_independent_set(adj, node_budget);
    result.node_count += mis.node_count;
    result.optimal = result.optimal && mis.optimal;
    for (auto v : mis.vertices) witness.push_back({p, jobs[static_cast<std::size_t>(v)]});
  }
  result.size = witness.size();
  result.witness = Allocation(std::move(witness), g.fingerprint());
  return result;
}

double approximation_ratio(std::size_t allocation_size, const OptimumResult& optimum) {
  if (!optimum.optimal) throw BudgetExceeded("optimum not proven; ratio undefined");
  if (optimum.size == 0) return 1.0;
  return static_cast<double>(allocation_size) / static_cast<double>(optimum.size);
}

double approximation_ratio(const Policy& policy, const JobAllocationGraph& g,
                           const OptimumResult& optimum, ConflictRemovalMode mode) {
  return approximation_ratio(rollout(g, policy, mode).allocation.size(), optimum);
}

}  // namespace jap
