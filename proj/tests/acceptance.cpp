// Acceptance run: one PASS/FAIL line per criterion, then a summary in order.
// Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "CLI11.hpp"
#include "fixtures.hpp"
#include "jap/baselines.hpp"
#include "jap/harness.hpp"
#include "jap/replay.hpp"
#include "jap/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace jap;

namespace {

struct Outcome {
  int id = 0;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void print(const Outcome& o) {
  std::printf("criterion %2d %s  %s [%.1f s]\n", o.id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), o.seconds);
  std::fflush(stdout);
}

// -- 1 ------------------------------------------------------------------------

Outcome feasibility_suite() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  std::size_t ok = 0;
  const std::size_t total = 1000;
  for (std::size_t i = 0; i < total; ++i) {
    GeneratorConfig c;
    c.family = i % 2 ? GraphFamily::kBarabasiAlbert : GraphFamily::kErdosRenyi;
    c.n_people = 1 + static_cast<std::int32_t>(rng.index(15));
    c.n_jobs = 5 + static_cast<std::int32_t>(rng.index(56));
    c.p_conflict = 0.02 + 0.3 * rng.uniform();
    c.p_select = 0.2 + 0.7 * rng.uniform();
    c.ba_m = 1 + static_cast<std::int32_t>(rng.index(4));
    c.seed = rng.next_u64();
    const auto g = generate(c);
    const auto r = rollout(g, make_random_policy(rng.next_u64()), ConflictRemovalMode::kBidirectional);
    const std::vector<Assignment> a(r.allocation.assignments().begin(), r.allocation.assignments().end());
    if (validate_allocation(g, r.allocation).feasible && oracle::feasible(g, a)) ++ok;
  }
  const double s = since(t0);
  return {1, ok == total && s < 60.0,
          fmt("feasibility: %zu/%zu random rollouts feasible (need 100%%, < 60 s)", ok, total), s};
}

// -- 2 and 3 --------------------------------------------------------------------

struct OracleSuite {
  Outcome equivalence;
  Outcome decomposition;
};

OracleSuite oracle_suite() {
  const auto t0 = Clock::now();
  Rng rng(2002);
  const std::size_t total = 250;
  std::size_t match = 0, decomposed = 0, max_edges = 0, max_opt = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto g = fixtures::tiny_graph(rng, 20);
    const auto brute = oracle::brute_force_optimum(g);
    const auto exact = exact_optimum(g);
    if (exact.optimal && exact.size == brute) ++match;
    if (oracle::brute_force_person_sum(g) == brute) ++decomposed;
    max_edges = std::max(max_edges, g.selection().size());
    max_opt = std::max(max_opt, brute);
  }
  const double s = since(t0);
  OracleSuite out;
  out.equivalence = {2, match == total && s < 120.0,
                     fmt("oracle equivalence: %zu/%zu exact matches vs subset enumeration "
                         "(<= 3 people, <= 10 jobs, |S| <= %zu, largest optimum %zu; < 120 s)",
                         match, total, max_edges, max_opt),
                     s};
  out.decomposition = {3, decomposed == total,
                       fmt("decomposition: per-person MIS sum equals whole-graph brute force on %zu/%zu", decomposed,
                           total),
                       s};
  return out;
}

// -- 4 ------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(4004);
  double worst = 0.0;
  std::string worst_block;
  std::size_t cases = 0;
  for (int gi = 0; gi < 3; ++gi) {
    JobAllocationGraph g;
    do g = fixtures::tiny_graph(rng, 15);
    while (g.selection().size() < 3 || g.conflicts().empty());
    for (int seed = 0; seed < 5; ++seed) {
      auto theta = init_params(rng.next_u64());
      oracle::randomize(theta, rng.next_u64());
      std::vector<double> cot(g.selection().size());
      for (double& c : cot) c = rng.uniform() - 0.5;
      const auto grad = q_backward(g, theta, q_forward(g, theta), cot);
      const auto numeric = oracle::numeric_gradient(g, theta, cot, 1e-5);
      const auto analytic = blocks(grad);
      const auto names = block_names(theta);
      for (std::size_t b = 0; b < analytic.size(); ++b) {
        const double e = oracle::block_relative_error(analytic[b], numeric[b]);
        if (e > worst) {
          worst = e;
          worst_block = names[b];
        }
      }
      ++cases;
    }
  }
  const double s = since(t0);
  return {4, worst < 1e-4 && s < 60.0,
          fmt("gradient check: max block relative error %.2e (%s) over %zu cases (need < 1e-4, < 60 s)", worst,
              worst_block.c_str(), cases),
          s};
}

// -- 5 ------------------------------------------------------------------------

Outcome merger_algebra() {
  const auto t0 = Clock::now();
  Rng rng(5005);
  bool ones = true, symmetric = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.index(16), n = 1 + rng.index(20);
    MergerParams m;
    m.fc_weight = Matrix(2 * d, d);
    m.fc_bias.assign(d, 0.0);
    for (double& v : m.fc_weight.values()) v = 4 * rng.uniform() - 2;
    for (double& v : m.fc_bias) v = 4 * rng.uniform() - 2;
    Matrix x(n, d), y(n, d);
    for (double& v : x.values()) v = 10 * rng.uniform() - 5;
    for (double& v : y.values()) v = 10 * rng.uniform() - 5;
    m.lambda = 0.0;
    const auto zero = merge_job_streams(x, y, m);
    ones &= std::all_of(zero.values().begin(), zero.values().end(), [](double v) { return v == 1.0; });
    m.lambda = 4 * rng.uniform() - 2;
    symmetric &= merge_job_streams(x, y, m) == merge_job_streams(y, x, m);
  }
  // Inside a module with lambda = 0 every merged job row is all ones too.
  const auto g = fixtures::four_by_five();
  const auto theta = init_params(5);
  const auto f = degree_features(g);
  const auto out = cae_forward(g, f.person, f.job, theta.modules[0]);
  ones &= std::all_of(out.job.values().begin(), out.job.values().end(), [](double v) { return v == 1.0; });
  return {5, ones && symmetric,
          fmt("merger algebra: lambda=0 gives all ones: %s; stream swap invariant: %s (bitwise)", ones ? "yes" : "no",
              symmetric ? "yes" : "no"),
          since(t0)};
}

// -- 6 ------------------------------------------------------------------------

Outcome per_distribution() {
  const auto t0 = Clock::now();
  const std::vector<double> p{0.5, 1.0, 2.0, 0.1, 3.0, 0.25, 1.5, 4.0};
  ReplayBuffer buf(8, 0.6, 0.4);
  TransitionSample t;
  t.s = std::make_shared<const JobAllocationGraph>(fixtures::four_by_five());
  t.s_next = t.s;
  for (double x : p) buf.set_priority(buf.insert(t), x);
  const auto expected = oracle::per_distribution(p, 0.6);
  const auto got = buf.distribution();
  double closed = 0.0;
  for (std::size_t i = 0; i < 8; ++i) closed = std::max(closed, std::abs(got[i] - expected[i]));

  Rng rng(6006);
  const std::size_t draws = 1'000'000;
  const auto batch = buf.sample(draws, rng);
  std::vector<double> freq(8, 0.0);
  for (auto i : batch.indices) freq[i] += 1.0;
  double l1 = 0.0;
  for (std::size_t i = 0; i < 8; ++i) l1 += std::abs(freq[i] / static_cast<double>(draws) - expected[i]);
  return {6, closed <= 1e-15 && l1 < 0.005,
          fmt("PER distribution: closed form max |diff| %.1e (need <= 1e-15, rounding only); "
              "Monte Carlo L1 over 1e6 draws %.5f (need < 0.005)",
              closed, l1),
          since(t0)};
}

// -- 7 ------------------------------------------------------------------------

std::vector<double> online_q(const JobAllocationGraph& g) {
  std::vector<double> q;
  for (const auto& a : g.selection())
    q.push_back(10.0 * a.person + a.job + 0.5 * static_cast<double>(g.selection().size()));
  return q;
}

std::vector<double> target_q(const JobAllocationGraph& g) {
  std::vector<double> q;
  for (const auto& a : g.selection()) q.push_back(a.person - 0.25 * a.job);
  return q;
}

std::vector<double> flat_q(const JobAllocationGraph& g) { return std::vector<double>(g.selection().size(), 1.0); }

TransitionSample transition(const JobAllocationGraph& s, Assignment a) {
  TransitionSample t;
  t.s = std::make_shared<const JobAllocationGraph>(s);
  t.a = a;
  t.action_index = *s.selection_index(a);
  t.s_next = std::make_shared<const JobAllocationGraph>(apply_assignment(s, a));
  t.done = t.s_next->terminal();
  return t;
}

Outcome double_dqn_target() {
  const auto t0 = Clock::now();
  const auto g = fixtures::four_by_five();
  struct Case {
    TransitionSample t;
    QFunction online;
    double gamma;
    double expected;
  };
  auto terminal_flagged = transition(g, {0, 0});
  terminal_flagged.done = true;
  // Hand values: see the comments in the trainer unit tests for the arithmetic.
  const std::vector<Case> cases{
      {transition(g, {0, 0}), online_q, 1.0, -2.0},
      {transition(g, {0, 0}), online_q, 0.5, -3.0},
      {transition(g.with_selection({{2, 3}}), {2, 3}), online_q, 1.0, -22.5},
      {transition(g, {0, 0}), flat_q, 1.0, -0.5},
      {transition(g, {1, 3}), online_q, 1.0, -15.0},
      {terminal_flagged, online_q, 1.0, -4.0},
  };
  std::size_t exact = 0;
  for (const auto& c : cases) exact += td_error(c.t, c.online, target_q, c.gamma) == c.expected;
  return {7, exact == cases.size(),
          fmt("double DQN target: %zu/%zu crafted transitions reproduce hand values exactly (2 terminal)", exact,
              cases.size()),
          since(t0)};
}

// -- 8 ------------------------------------------------------------------------

Outcome baseline_ordering(const fs::path& out, std::uint64_t seed) {
  const auto t0 = Clock::now();
  BenchmarkOptions opts;
  opts.seed = seed;
  GeneratorConfig cfg = preset("er");
  cfg.seed = Rng::derive_seed(seed, "criterion-8");
  const std::vector<MethodSpec> methods{make_method(PolicyKind::parse("greedy")),
                                        make_method(PolicyKind::parse("random")),
                                        make_method(PolicyKind::parse("greedy-total"))};
  std::vector<DatasetRef> data{dataset_ref("er-300", generate_graphs(cfg, 20), describe(cfg))};
  auto rep = run_benchmark(data, methods, opts);
  std::string scale = "300 jobs, 15 people";
  if (!rep.skipped.empty()) {
    cfg = preset("er-small");
    cfg.seed = Rng::derive_seed(seed, "criterion-8");
    data = {dataset_ref("er-30", generate_graphs(cfg, 20), describe(cfg))};
    rep = run_benchmark(data, methods, opts);
    scale = "30 jobs (300-job oracle budget tripped)";
  }
  fs::create_directories(out / "criterion8");
  std::ofstream s(out / "criterion8" / "summary.csv");
  write_summary_csv(s, rep);
  std::ofstream i(out / "criterion8" / "instances.csv");
  write_instances_csv(i, rep);
  const auto& g = rep.cells[0];
  const auto& r = rep.cells[1];
  const auto& gt = rep.cells[2];
  const double gap = g.mean - r.mean;
  const double sec = since(t0);
  std::printf("  info: greedy by total degree (selection + conflict arcs) %.4f +/- %.4f, gap to random %.4f\n",
              gt.mean, gt.std, gt.mean - r.mean);
  return {8, gap >= 0.02 && sec < 1800.0 && rep.skipped.empty(),
          fmt("baseline ordering on %zu ER instances (%s): greedy %.4f - random %.4f = %.4f (need >= 0.02, < 30 min)",
              g.ratios.size(), scale.c_str(), g.mean, r.mean, gap),
          sec};
}

// -- 9 and 11 -----------------------------------------------------------------

struct TrainingOutcomes {
  Outcome smoke;
  Outcome diagnostics;
};

TrainingOutcomes training_and_diagnostics(const fs::path& out, std::uint64_t seed, std::size_t batch_size) {
  const auto t0 = Clock::now();
  TrainConfig tc;
  tc.episodes = 200;
  tc.batch_size = batch_size;
  tc.seed = Rng::derive_seed(seed, "criterion-9");
  GeneratorConfig train_cfg = preset("er-small");
  train_cfg.seed = Rng::derive_seed(seed, "criterion-9-generation");
  const auto result = train(generator_source(train_cfg), tc, [&](const TrainLogRow& row) {
    if (row.update_idx % 1000 == 0)
      std::printf("  training: update %zu episode %zu loss %.4g mean|Q| %.3g (%.0f s)\n", row.update_idx, row.episode,
                  row.loss, row.mean_abs_q, since(t0));
    std::fflush(stdout);
  });
  const double train_seconds = since(t0);

  fs::create_directories(out / "criterion9");
  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.train_distribution = train_cfg;
  ckpt.metadata["episodes"] = std::to_string(tc.episodes);
  ckpt.metadata["batch_size"] = std::to_string(tc.batch_size);
  save_checkpoint(out / "criterion9" / "checkpoint.json", ckpt);
  {
    std::ofstream log(out / "criterion9" / "train_log.csv");
    write_training_log_csv(log, result.log);
  }

  GeneratorConfig eval_cfg = preset("er-small");
  eval_cfg.seed = Rng::derive_seed(seed, "criterion-9-held-out");
  const auto held_out = generate_graphs(eval_cfg, 20);
  auto params = std::make_shared<const QNetworkParams>(result.params);
  const std::vector<MethodSpec> methods{gnn_method("gnn", params), make_method(PolicyKind::parse("random")),
                                        make_method(PolicyKind::parse("untrained")),
                                        make_method(PolicyKind::parse("greedy"))};
  const std::vector<DatasetRef> data{dataset_ref("er-small-held-out", held_out, describe(eval_cfg))};
  BenchmarkOptions opts;
  opts.seed = seed;
  const auto rep = run_benchmark(data, methods, opts);
  {
    std::ofstream s(out / "criterion9" / "summary.csv");
    write_summary_csv(s, rep);
  }
  const double gnn = rep.cells[0].mean, rnd = rep.cells[1].mean, untrained = rep.cells[2].mean;
  std::printf("  info: greedy baseline on the held-out set %.4f; training took %.0f s (target < 1800 s)\n",
              rep.cells[3].mean, train_seconds);
  TrainingOutcomes o;
  o.smoke = {9,
             result.status == TrainStatus::kCompleted && gnn >= rnd + 0.02 && gnn >= untrained,
             fmt("training smoke (%zu episodes, batch %zu, %s): trained %.4f vs random %.4f + 0.02 and untrained %.4f",
                 tc.episodes, tc.batch_size, result.status == TrainStatus::kCompleted ? "completed" : "diverged",
                 gnn, rnd, untrained),
             since(t0)};

  // Criterion 11 reads the log back from disk as a plotting script would.
  const auto t1 = Clock::now();
  std::ifstream in(out / "criterion9" / "train_log.csv");
  const auto log = read_training_log_csv(in);
  std::size_t finite_prefix = 0;
  while (finite_prefix < log.rows.size() && std::isfinite(log.rows[finite_prefix].loss)) ++finite_prefix;
  // After a divergence the guard stops at the first non-finite row.
  const bool loss_ok = !log.rows.empty() && (finite_prefix == log.rows.size() ||
                                            (result.status == TrainStatus::kDiverged &&
                                             finite_prefix + 1 == log.rows.size()));
  bool max_one = true;
  std::vector<double> rhos;
  std::size_t negative = 0;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    const auto d = run_diagnostics(result.params, held_out[i], &log);
    if (i == 0) {
      std::ofstream os(out / "criterion9" / "diagnostics.csv");
      write_diagnostics_csv(os, d);
    }
    max_one &= !d.normalized_q.empty() && *std::max_element(d.normalized_q.begin(), d.normalized_q.end()) == 1.0;
    if (d.spearman_vs_step) {
      rhos.push_back(*d.spearman_vs_step);
      negative += *d.spearman_vs_step < 0;
    }
  }
  const double mean_rho = mean_std(rhos).mean;
  o.diagnostics = {11, loss_ok && max_one && !rhos.empty() && mean_rho < 0.0,
                   fmt("diagnostics: %zu loss rows, finite %s; normalized max == 1 on all %zu episodes: %s; "
                       "mean Spearman(normalized Q, step) %.3f (%zu/%zu negative, need mean < 0)",
                       log.rows.size(), loss_ok ? "yes" : "no", held_out.size(), max_one ? "yes" : "no", mean_rho,
                       negative, rhos.size()),
                   since(t1)};
  return o;
}

// -- 10 -----------------------------------------------------------------------

Outcome ba_near_optimality(std::uint64_t seed) {
  const auto t0 = Clock::now();
  GeneratorConfig cfg = preset("ba-small");
  cfg.seed = Rng::derive_seed(seed, "criterion-10");
  const std::vector<DatasetRef> data{dataset_ref("ba-small", generate_graphs(cfg, 20), describe(cfg))};
  const std::vector<MethodSpec> methods{make_method(PolicyKind::parse("random"))};
  BenchmarkOptions opts;
  opts.seed = seed;
  const auto rep = run_benchmark(data, methods, opts);
  const auto& c = rep.cells[0];
  return {10, c.mean >= 0.98 && rep.skipped.empty(),
          fmt("BA near-optimality: random %.4f +/- %.4f on %zu ba-small instances (need >= 0.98)", c.mean, c.std,
              c.ratios.size()),
          since(t0)};
}

// -- 12 -----------------------------------------------------------------------

int shell(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + std::string(JAP_CLI_PATH) + "' " + args + " >> cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "cli.log") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome cli_determinism(const fs::path& out) {
  const auto t0 = Clock::now();
  // Every path is relative to the run directory, so two runs see identical text.
  const std::vector<std::string> pipeline{
      "gen --preset er-small --count 4 --seed 7 --out er",
      "gen --preset ba-small --count 4 --seed 8 --out ba",
      "solve --exact er/instance_0000.jap --out solve",
      "ratio --policy random --instances er=er --seed 3 --out ratio",
      "bench --instances er=er --instances ba=ba --policy greedy --policy random --policy untrained --seed 3 --out bench",
      "train --preset er-small --jobs 10 --people 3 --episodes 3 --batch-size 32 --seed 5 --out train",
      "ood --checkpoint model=train/checkpoint.json --instances er=er --instances ba=ba --seed 3 --out ood",
      "sweep --preset er-small --jobs 12 --people 3 --grid 0.1,0.2 --count 3 --checkpoint train/checkpoint.json "
      "--seed 3 --out sweep",
      "diag --checkpoint train/checkpoint.json --instance er/instance_0000.jap --train-log train/train_log.csv "
      "--out diag",
  };
  std::vector<fs::path> runs{out / "criterion12" / "run_a", out / "criterion12" / "run_b"};
  std::size_t failures = 0;
  for (const auto& dir : runs) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& cmd : pipeline) failures += shell(dir, cmd) != 0;
  }
  const auto a = snapshot(runs[0]);
  const auto b = snapshot(runs[1]);
  std::size_t csv = 0, identical = 0;
  for (const auto& [name, bytes] : a) {
    const bool same = b.count(name) && b.at(name) == bytes;
    identical += same;
    if (name.ends_with(".csv")) ++csv;
    if (!same) std::printf("  differs: %s\n", name.c_str());
  }
  return {12, failures == 0 && a.size() == b.size() && identical == a.size() && csv > 0,
          fmt("determinism: %zu CLI invocations x 2 (%zu failed); %zu/%zu output files byte-identical, %zu of them CSV",
              pipeline.size(), failures, identical, a.size(), csv),
          since(t0)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-12"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  std::uint64_t seed = 20240601;
  std::size_t batch_size = TrainConfig{}.batch_size;
  app.add_option("--out", out, "directory for artifacts")->capture_default_str();
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--batch-size", batch_size, "training batch for criterion 9")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  const fs::path root = fs::absolute(out);
  fs::create_directories(root);

  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}
                                              : std::set<int>(only.begin(), only.end());
  auto want = [&](int id) { return selected.count(id) > 0; };
  std::map<int, Outcome> results;
  auto record = [&](Outcome o) {
    print(o);
    results[o.id] = std::move(o);
  };

  // Quick property checks first, the long runs last.
  if (want(1)) record(feasibility_suite());
  if (want(2) || want(3)) {
    auto s = oracle_suite();
    if (want(2)) record(s.equivalence);
    if (want(3)) record(s.decomposition);
  }
  if (want(4)) record(gradient_check());
  if (want(5)) record(merger_algebra());
  if (want(6)) record(per_distribution());
  if (want(7)) record(double_dqn_target());
  if (want(12)) record(cli_determinism(root));
  if (want(10)) record(ba_near_optimality(seed));
  if (want(9) || want(11)) {
    auto t = training_and_diagnostics(root, seed, batch_size);
    if (want(9)) record(t.smoke);
    if (want(11)) record(t.diagnostics);
  }
  if (want(8)) record(baseline_ordering(root, seed));

  std::printf("\nsummary\n");
  std::size_t passed = 0;
  for (const auto& [id, o] : results) {
    print(o);
    passed += o.pass;
  }
  std::printf("%zu/%zu criteria passed\n", passed, results.size());
  return passed == results.size() ? 0 : 1;
}
