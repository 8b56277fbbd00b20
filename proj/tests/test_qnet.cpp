#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "jap/qnet.hpp"
#include "oracles.hpp"

using namespace jap;

namespace {

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double err = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    err = std::max(err, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return err;
}

}  // namespace

TEST_CASE("initialisation") {
  const auto a = init_params(5);
  const auto b = init_params(5);
  const auto c = init_params(6);
  CHECK(a.dims() == std::vector<std::size_t>{2, 16, 16, 8});
  CHECK(a.modules.size() == 3);
  CHECK(a.modules[0].normalize);
  CHECK(a.modules[1].normalize);
  CHECK_FALSE(a.modules[2].normalize);
  for (const auto& m : a.modules) CHECK(m.merger.lambda == 0.0);
  const auto ba = blocks(a), bb = blocks(b), bc = blocks(c);
  CHECK(ba.size() == block_names(a).size());
  bool all_equal = true, any_differs = false;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    all_equal &= std::equal(ba[i].begin(), ba[i].end(), bb[i].begin());
    any_differs |= !std::equal(ba[i].begin(), ba[i].end(), bc[i].begin());
  }
  CHECK(all_equal);
  CHECK(any_differs);
  // Glorot bound for the first selection weight: sqrt(6 / (2 + 16)).
  const double bound = std::sqrt(6.0 / 18.0);
  for (double w : a.modules[0].selection.weight.values()) CHECK(std::abs(w) <= bound);
  const auto z = zeros_like(a);
  const auto zb = blocks(z);
  for (double v : zb[0]) CHECK(v == 0.0);
}

TEST_CASE("forward pass matches the straight-line reference") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = fixtures::tiny_graph(rng, 30);
    QNetConfig cfg;
    cfg.conflict_direction = trial % 2 ? ConflictMessageDirection::kOutgoing : ConflictMessageDirection::kIncoming;
    auto theta = init_params(rng.next_u64(), cfg);
    oracle::randomize(theta, rng.next_u64());
    CHECK(max_rel_diff(q_values(g, theta), oracle::q_values(g, theta)) < 1e-12);
    CHECK(q_forward(g, theta).q == q_values(g, theta));
  }
}

TEST_CASE("Q-values do not depend on vertex labels") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = fixtures::tiny_graph(rng, 30);
    auto theta = init_params(rng.next_u64());
    oracle::randomize(theta, rng.next_u64());
    std::vector<int> pp(static_cast<std::size_t>(g.n_people())), jp(static_cast<std::size_t>(g.n_jobs()));
    std::iota(pp.begin(), pp.end(), 0);
    std::iota(jp.begin(), jp.end(), 0);
    for (std::size_t i = pp.size(); i > 1; --i) std::swap(pp[i - 1], pp[rng.index(i)]);
    for (std::size_t i = jp.size(); i > 1; --i) std::swap(jp[i - 1], jp[rng.index(i)]);
    std::vector<Assignment> s;
    std::vector<ConflictArc> c;
    for (const auto& a : g.selection()) s.push_back({pp[a.person], jp[a.job]});
    for (const auto& a : g.conflicts()) c.push_back({jp[a.from], jp[a.to]});
    const JobAllocationGraph h(g.n_people(), g.n_jobs(), s, c);
    const auto qg = q_values(g, theta);
    const auto qh = q_values(h, theta);
    for (std::size_t e = 0; e < qg.size(); ++e) {
      const auto& a = g.selection()[e];
      const auto idx = h.selection_index({pp[a.person], jp[a.job]});
      REQUIRE(idx.has_value());
      CHECK(qh[*idx] == doctest::Approx(qg[e]).epsilon(1e-10));
    }
  }
}

TEST_CASE("merger algebra") {
  Rng rng(43);
  MergerParams m;
  m.fc_weight = Matrix(8, 4);
  m.fc_bias.assign(4, 0.0);
  for (double& v : m.fc_weight.values()) v = rng.uniform() - 0.5;
  for (double& v : m.fc_bias) v = rng.uniform() - 0.5;
  Matrix x(5, 4), y(5, 4);
  for (double& v : x.values()) v = 3 * rng.uniform() - 1.5;
  for (double& v : y.values()) v = 3 * rng.uniform() - 1.5;

  SUBCASE("lambda zero gives all ones") {
    m.lambda = 0.0;
    const auto merged = merge_job_streams(x, y, m);
    for (double v : merged.values()) CHECK(v == 1.0);
  }
  SUBCASE("swapping the streams changes nothing") {
    m.lambda = 0.7;
    CHECK(merge_job_streams(x, y, m) == merge_job_streams(y, x, m));
  }
  SUBCASE("matches the concatenated form") {
    m.lambda = -1.3;
    const auto out = merge_job_streams(x, y, m);
    for (std::size_t r = 0; r < 5; ++r) {
      const oracle::Vec xr(x.row(r).begin(), x.row(r).end()), yr(y.row(r).begin(), y.row(r).end());
      const auto ref = oracle::merge(xr, yr, m);
      for (std::size_t c = 0; c < 4; ++c) CHECK(out(r, c) == doctest::Approx(ref[c]).epsilon(1e-13));
    }
  }
}

TEST_CASE("lambda zero makes every Q-value depend only on person embeddings") {
  const auto g = fixtures::four_by_five();
  const auto theta = init_params(3);
  const auto fwd = q_forward(g, theta);
  // With all merged job rows equal, the final job embeddings coincide.
  for (std::size_t j = 1; j < fwd.job_embedding.rows(); ++j)
    for (std::size_t c = 0; c < fwd.job_embedding.cols(); ++c)
      CHECK(fwd.job_embedding(j, c) == fwd.job_embedding(0, c));
}

TEST_CASE("layer norm rows are standardised before GELU") {
  Rng rng(44);
  const auto g = fixtures::tiny_graph(rng, 30);
  auto theta = init_params(9);
  for (auto& m : theta.modules) m.merger.lambda = 0.8;
  const auto fwd = q_forward(g, theta);
  REQUIRE(fwd.tape.size() == 3);
  const auto& xhat = fwd.tape[0].norm_xhat;
  for (std::size_t r = 0; r < xhat.rows(); ++r) {
    const auto row = xhat.row(r);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
    double var = 0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var <= 1.0 + 1e-12);
  }
}

TEST_CASE("GELU and its derivative") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-14));
  for (double x : {-3.0, -0.5, 0.0, 0.3, 2.0}) {
    const double h = 1e-6;
    CHECK(gelu_derivative(x) == doctest::Approx((gelu(x + h) - gelu(x - h)) / (2 * h)).epsilon(1e-8));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(45);
  for (int trial = 0; trial < 3; ++trial) {
    const auto g = fixtures::tiny_graph(rng, 12);
    if (g.terminal()) continue;
    auto theta = init_params(rng.next_u64());
    oracle::randomize(theta, rng.next_u64());
    std::vector<double> cot(g.selection().size());
    for (double& c : cot) c = rng.uniform() - 0.5;
    const auto grad = q_backward(g, theta, q_forward(g, theta), cot);
    const auto numeric = oracle::numeric_gradient(g, theta, cot, 1e-5);
    const auto analytic = blocks(grad);
    const auto names = block_names(theta);
    for (std::size_t b = 0; b < analytic.size(); ++b) {
      INFO(names[b]);
      CHECK(oracle::block_relative_error(analytic[b], numeric[b]) < 1e-4);
    }
  }
}

TEST_CASE("backward accumulates and rejects unrecorded passes") {
  const auto g = fixtures::four_by_five();
  auto theta = init_params(1);
  oracle::randomize(theta, 2);
  const std::vector<double> cot(g.selection().size(), 1.0);
  const auto fwd = q_forward(g, theta);
  const auto once = q_backward(g, theta, fwd, cot);
  auto twice = once;
  q_backward(g, theta, fwd, cot, twice);
  const auto b1 = blocks(std::as_const(once));
  const auto b2 = blocks(std::as_const(twice));
  for (std::size_t b = 0; b < b1.size(); ++b)
    for (std::size_t i = 0; i < b1[b].size(); ++i) CHECK(b2[b][i] == doctest::Approx(2 * b1[b][i]));
  QForward empty;
  empty.q = fwd.q;
  CHECK_THROWS_AS(q_backward(g, theta, empty, cot), DimensionMismatch);
  const std::vector<double> short_cot(2, 1.0);
  CHECK_THROWS_AS(q_backward(g, theta, fwd, short_cot), DimensionMismatch);
}

TEST_CASE("empty graphs have no Q-values") {
  const JobAllocationGraph g(2, 3, {}, {{0, 1}});
  CHECK(q_values(g, init_params(0)).empty());
}

TEST_CASE("conflict direction names") {
  CHECK(parse_conflict_direction(to_string(ConflictMessageDirection::kOutgoing)) ==
        ConflictMessageDirection::kOutgoing);
  CHECK_THROWS(parse_conflict_direction("sideways"));
}
