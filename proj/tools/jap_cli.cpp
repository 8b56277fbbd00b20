// Command-line front end: dataset generation, training, exact solving and the
// benchmark / sweep / diagnostics reports.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "jap/checkpoint.hpp"
#include "jap/generator.hpp"
#include "jap/graph_io.hpp"
#include "jap/harness.hpp"
#include "jap/text.hpp"
#include "jap/trainer.hpp"

namespace fs = std::filesystem;
using namespace jap;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string out = ".";
};

// Generator flags shared by gen, train and sweep. A preset supplies the
// defaults; explicit flags override single fields.
struct GeneratorFlags {
  std::string preset = "er-small";
  std::optional<std::string> family;
  std::optional<std::int32_t> jobs;
  std::optional<std::int32_t> people;
  std::optional<double> p_conflict;
  std::optional<double> p_select;
  std::optional<std::int32_t> ba_m;

  void add_to(CLI::App* app) {
    app->add_option("--preset", preset, "er | ba | planny | er-small | ba-small")->capture_default_str();
    app->add_option("--family", family, "er | ba");
    app->add_option("--jobs", jobs, "number of jobs");
    app->add_option("--people", people, "number of people");
    app->add_option("--p-conflict", p_conflict, "ER conflict-arc probability per ordered job pair");
    app->add_option("--p-select", p_select, "selection-edge probability per (person, job) pair");
    app->add_option("--ba-m", ba_m, "BA attachment parameter");
  }

  GeneratorConfig resolve(std::uint64_t seed) const {
    GeneratorConfig c = preset.empty() ? GeneratorConfig{} : jap::preset(preset);
    if (family) c.family = parse_family(*family);
    if (jobs) c.n_jobs = *jobs;
    if (people) c.n_people = *people;
    if (p_conflict) c.p_conflict = *p_conflict;
    if (p_select) c.p_select = *p_select;
    if (ba_m) c.ba_m = *ba_m;
    c.seed = seed;
    validate(c);
    return c;
  }
};

ConflictRemovalMode parse_mode(const std::string& s) {
  if (s == "bidirectional") return ConflictRemovalMode::kBidirectional;
  if (s == "outgoing-only") return ConflictRemovalMode::kOutgoingOnly;
  throw std::invalid_argument("unknown removal mode '" + s + "' (bidirectional|outgoing-only)");
}

std::ofstream open_out(const fs::path& dir, const std::string& file) {
  fs::create_directories(dir);
  std::ofstream os(dir / file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + (dir / file).string());
  return os;
}

// "NAME=VALUE" or "VALUE", where the name defaults to the last path element.
std::pair<std::string, std::string> named(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos) return {arg.substr(0, eq), arg.substr(eq + 1)};
  fs::path p(arg);
  std::string name = p.filename().string();
  if (name.empty()) name = p.parent_path().filename().string();
  return {fs::path(name).stem().string(), arg};
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  for (const auto& f : split(text, ',')) grid.push_back(parse_double(f));
  return grid;
}

void write_report(const fs::path& out, const BenchmarkReport& report) {
  auto s = open_out(out, "summary.csv");
  write_summary_csv(s, report);
  auto i = open_out(out, "instances.csv");
  write_instances_csv(i, report);
  auto k = open_out(out, "skipped.csv");
  write_skipped_csv(k, report);
  auto m = open_out(out, "metadata.csv");
  write_metadata_csv(m, report.metadata);
  std::ostringstream table;
  write_report_table(table, report);
  auto t = open_out(out, "table.txt");
  t << table.str();
  std::cout << table.str();
}

std::vector<DatasetRef> load_datasets(const std::vector<std::string>& args) {
  std::vector<DatasetRef> out;
  for (const auto& a : args) {
    const auto [name, dir] = named(a);
    out.push_back(dataset_ref(name, load_dataset(dir)));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Job allocation workbench: learned and baseline policies with an exact oracle"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value file mirroring the command-line flags");
  GlobalOptions global;
  app.add_option("--seed", global.seed, "base seed for every random stream")->capture_default_str();
  app.add_option("--out", global.out, "output directory")->capture_default_str();

  std::string removal_mode = "bidirectional";
  std::uint64_t budget = kDefaultNodeBudget;
  std::size_t seeds = 5;

  // gen
  auto* gen = app.add_subcommand("gen", "generate a dataset of instances plus a manifest");
  GeneratorFlags gen_flags;
  gen_flags.add_to(gen);
  std::size_t gen_count = 20;
  gen->add_option("--count", gen_count, "number of instances")->capture_default_str();

  // train
  auto* trn = app.add_subcommand("train", "train a Q-network with Double DQN and prioritized replay");
  GeneratorFlags trn_flags;
  trn_flags.add_to(trn);
  std::string trn_instances;
  TrainConfig tc;
  std::string exploration = "softmax", conflict_direction = "in";
  std::size_t log_every = 0;
  trn->add_option("--instances", trn_instances, "train on a generated dataset instead of fresh graphs");
  trn->add_option("--episodes", tc.episodes)->capture_default_str();
  trn->add_option("--batch-size", tc.batch_size)->capture_default_str();
  trn->add_option("--lr", tc.learning_rate)->capture_default_str();
  trn->add_option("--gamma", tc.gamma)->capture_default_str();
  trn->add_option("--tau", tc.tau)->capture_default_str();
  trn->add_option("--exploration", exploration, "softmax | eps")->capture_default_str();
  trn->add_option("--epsilon", tc.epsilon)->capture_default_str();
  trn->add_option("--temperature", tc.temperature)->capture_default_str();
  trn->add_option("--weight-decay", tc.weight_decay)->capture_default_str();
  trn->add_option("--alpha", tc.alpha)->capture_default_str();
  trn->add_option("--beta", tc.beta)->capture_default_str();
  trn->add_option("--per-epsilon", tc.per_epsilon)->capture_default_str();
  trn->add_option("--capacity", tc.replay_capacity)->capture_default_str();
  trn->add_flag("--sum-gradients", tc.sum_gradients, "sum rather than average the batch gradient");
  trn->add_option("--conflict-direction", conflict_direction, "in | out")->capture_default_str();
  trn->add_option("--removal-mode", removal_mode)->capture_default_str();
  trn->add_option("--log-every", log_every, "print progress every N updates (0: never)");

  // solve
  auto* slv = app.add_subcommand("solve", "exact maximum allocation of one instance");
  std::string solve_file;
  slv->add_option("--exact", solve_file, "instance file")->required();
  slv->add_option("--budget", budget, "search-node budget per person")->capture_default_str();

  // ratio
  auto* rat = app.add_subcommand("ratio", "approximation ratio of one policy over a dataset");
  std::string ratio_policy = "greedy", ratio_instances;
  rat->add_option("--policy", ratio_policy, "greedy | greedy-total | random | untrained | gnn:CKPT")->capture_default_str();
  rat->add_option("--instances", ratio_instances, "dataset directory")->required();
  rat->add_option("--seeds", seeds, "rollouts per instance for stochastic policies")->capture_default_str();
  rat->add_option("--budget", budget)->capture_default_str();
  rat->add_option("--removal-mode", removal_mode)->capture_default_str();

  // bench
  auto* bch = app.add_subcommand("bench", "benchmark table over datasets and policies");
  std::vector<std::string> bench_instances, bench_policies{"greedy", "random", "untrained"};
  bch->add_option("--instances", bench_instances, "[NAME=]DIR, repeatable")->required();
  bch->add_option("--policy", bench_policies, "repeatable")->capture_default_str();
  bch->add_option("--seeds", seeds)->capture_default_str();
  bch->add_option("--budget", budget)->capture_default_str();
  bch->add_option("--removal-mode", removal_mode)->capture_default_str();

  // ood
  auto* ood = app.add_subcommand("ood", "every checkpoint on every dataset");
  std::vector<std::string> ood_checkpoints, ood_instances;
  ood->add_option("--checkpoint", ood_checkpoints, "[NAME=]PATH, repeatable")->required();
  ood->add_option("--instances", ood_instances, "[NAME=]DIR, repeatable")->required();
  ood->add_option("--seeds", seeds)->capture_default_str();
  ood->add_option("--budget", budget)->capture_default_str();
  ood->add_option("--removal-mode", removal_mode)->capture_default_str();

  // sweep
  auto* swp = app.add_subcommand("sweep", "ratios over a grid of one generator parameter");
  GeneratorFlags swp_flags;
  swp_flags.add_to(swp);
  std::string swp_checkpoint, swp_param = "p_conflict", swp_grid = "0.05,0.1,0.15,0.2,0.25,0.3";
  std::size_t swp_count = 20;
  swp->add_option("--checkpoint", swp_checkpoint, "GNN checkpoint (optional)");
  swp->add_option("--param", swp_param, "p_conflict | jobs")->capture_default_str();
  swp->add_option("--grid", swp_grid, "comma-separated, strictly increasing")->capture_default_str();
  swp->add_option("--count", swp_count, "instances per grid point")->capture_default_str();
  swp->add_option("--seeds", seeds)->capture_default_str();
  swp->add_option("--budget", budget)->capture_default_str();
  swp->add_option("--removal-mode", removal_mode)->capture_default_str();

  // diag
  auto* dia = app.add_subcommand("diag", "per-step maximum Q of one highest-Q episode");
  std::string dia_checkpoint, dia_instance, dia_log;
  dia->add_option("--checkpoint", dia_checkpoint)->required();
  dia->add_option("--instance", dia_instance, "instance file")->required();
  dia->add_option("--train-log", dia_log, "training log CSV to pair with the series");
  dia->add_option("--removal-mode", removal_mode)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  const fs::path out = global.out;

  try {
    const ConflictRemovalMode mode = parse_mode(removal_mode);
    BenchmarkOptions bopts;
    bopts.seeds = seeds;
    bopts.seed = global.seed;
    bopts.oracle_budget = budget;
    bopts.mode = mode;

    if (*gen) {
      const GeneratorConfig base = gen_flags.resolve(global.seed);
      const Dataset d = generate_dataset(base, gen_count, out);
      const DatasetStats st = dataset_stats(d.graphs);
      auto os = open_out(out, "stats.csv");
      os << "n_graphs,mean_jobs,mean_people,mean_conflict_arcs,mean_selection_edges,mean_density,"
            "mean_digraph_density\n"
         << st.n_graphs << ',' << format_number(st.mean_jobs) << ',' << format_number(st.mean_people) << ','
         << format_number(st.mean_conflict_arcs) << ',' << format_number(st.mean_selection_edges) << ','
         << format_number(st.mean_density) << ',' << format_number(st.mean_digraph_density) << '\n';
      std::cout << "wrote " << d.graphs.size() << " instances to " << out.string() << " ("
                << describe(base) << ")\n";
    } else if (*trn) {
      tc.seed = global.seed;
      tc.exploration = parse_exploration(exploration);
      tc.removal_mode = mode;
      tc.net.conflict_direction = parse_conflict_direction(conflict_direction);
      Checkpoint ckpt;
      InstanceSource source;
      if (!trn_instances.empty()) {
        Dataset d = load_dataset(trn_instances);
        if (!d.entries.empty()) ckpt.train_distribution = d.entries.front().config;
        ckpt.metadata["train_instances"] = trn_instances;
        source = dataset_source(std::move(d.graphs));
      } else {
        const GeneratorConfig base = trn_flags.resolve(Rng::derive_seed(global.seed, "generation"));
        ckpt.train_distribution = base;
        source = generator_source(base);
      }
      const auto t0 = std::chrono::steady_clock::now();
      TrainResult r = train(source, tc, [&](const TrainLogRow& row) {
        if (log_every && row.update_idx % log_every == 0) {
          const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          std::cerr << "update " << row.update_idx << " episode " << row.episode << " loss "
                    << format_number(row.loss) << " |q| " << format_number(row.mean_abs_q) << " ("
                    << static_cast<long>(s) << "s)\n";
        }
      });
      ckpt.params = std::move(r.params);
      ckpt.metadata["status"] = r.status == TrainStatus::kCompleted ? "completed" : "diverged";
      if (!r.message.empty()) ckpt.metadata["message"] = r.message;
      ckpt.metadata["episodes"] = std::to_string(tc.episodes);
      ckpt.metadata["batch_size"] = std::to_string(tc.batch_size);
      ckpt.metadata["learning_rate"] = format_number(tc.learning_rate);
      ckpt.metadata["exploration"] = to_string(tc.exploration);
      ckpt.metadata["seed"] = std::to_string(tc.seed);
      ckpt.metadata["updates"] = std::to_string(r.log.rows.size());
      ckpt.metadata["code_version"] = kCodeVersion;
      fs::create_directories(out);
      save_checkpoint(out / "checkpoint.json", ckpt);
      auto log = open_out(out, "train_log.csv");
      write_training_log_csv(log, r.log);
      std::cout << "training " << ckpt.metadata["status"] << " after " << r.log.rows.size()
                << " updates; checkpoint " << (out / "checkpoint.json").string() << "\n";
      if (r.status != TrainStatus::kCompleted) {
        std::cerr << r.message << "\n";
        return 3;
      }
    } else if (*slv) {
      const JobAllocationGraph g = read_instance_file(solve_file);
      const OptimumResult opt = exact_optimum(g, budget);
      auto os = open_out(out, "solution.csv");
      os << "person,job\n";
      for (const auto& a : opt.witness.assignments()) os << a.person << ',' << a.job << '\n';
      std::cout << "optimum " << opt.size << (opt.optimal ? " (proven)" : " (lower bound, budget exceeded)")
                << " nodes " << opt.node_count << "\n";
      if (!opt.optimal) return 2;
    } else if (*rat) {
      const auto datasets = load_datasets({ratio_instances});
      const std::vector<MethodSpec> methods{make_method(PolicyKind::parse(ratio_policy))};
      write_report(out, run_benchmark(datasets, methods, bopts));
    } else if (*bch) {
      const auto datasets = load_datasets(bench_instances);
      std::vector<MethodSpec> methods;
      for (const auto& p : bench_policies) methods.push_back(make_method(PolicyKind::parse(p)));
      write_report(out, run_benchmark(datasets, methods, bopts));
    } else if (*ood) {
      const auto datasets = load_datasets(ood_instances);
      std::vector<NamedCheckpoint> ckpts;
      for (const auto& c : ood_checkpoints) {
        const auto [name, path] = named(c);
        ckpts.push_back({name, load_checkpoint(path)});
      }
      write_report(out, run_ood(ckpts, datasets, bopts));
    } else if (*swp) {
      SweepSpec spec;
      spec.parameter = parse_sweep_parameter(swp_param);
      spec.grid = parse_grid(swp_grid);
      spec.base = swp_flags.resolve(global.seed);
      spec.instances = swp_count;
      std::shared_ptr<const QNetworkParams> gnn;
      if (!swp_checkpoint.empty())
        gnn = std::make_shared<const QNetworkParams>(load_checkpoint(swp_checkpoint).params);
      const SweepResult r = run_er_sweep(gnn, spec, bopts);
      auto os = open_out(out, "sweep.csv");
      write_sweep_csv(os, r);
      auto m = open_out(out, "metadata.csv");
      write_metadata_csv(m, r.metadata);
      write_sweep_csv(std::cout, r);
    } else if (*dia) {
      const Checkpoint ckpt = load_checkpoint(dia_checkpoint);
      const JobAllocationGraph g = read_instance_file(dia_instance);
      std::optional<TrainingLog> log;
      if (!dia_log.empty()) {
        std::ifstream is(dia_log);
        if (!is) throw std::runtime_error("cannot read " + dia_log);
        log = read_training_log_csv(is);
      }
      const EpisodeDiagnostics d = run_diagnostics(ckpt.params, g, log ? &*log : nullptr, mode);
      auto os = open_out(out, "diagnostics.csv");
      write_diagnostics_csv(os, d);
      if (log) {
        auto ls = open_out(out, "loss.csv");
        ls << "update_idx,loss\n";
        for (std::size_t i = 0; i < d.loss.size(); ++i) ls << i << ',' << format_number(d.loss[i]) << '\n';
      }
      std::cout << "episode length " << d.episode_length << ", normalization " << d.normalization
                << ", spearman(normalized_q, step) "
                << (d.spearman_vs_step ? format_number(*d.spearman_vs_step) : std::string("undefined"))
                << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
