#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jap/baselines.hpp"
#include "jap/checkpoint.hpp"
#include "jap/generator.hpp"
#include "jap/trainer.hpp"

namespace jap {

inline constexpr const char* kCodeVersion = "0.1.0";

// -- Statistics ---------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population estimator (divide by n)
  std::size_t n = 0;
};

/// Single pass (Welford). An empty input gives {0, 0, 0}.
MeanStd mean_std(std::span<const double> values);

/// Spearman rank correlation with average ranks for ties; nullopt when
/// either side is constant or fewer than two points are given.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// -- Methods and datasets -----------------------------------------------------

/// A policy as it appears in a report.
struct MethodSpec {
  std::string name;
  PolicyKind kind;
  std::shared_ptr<const QNetworkParams> params;  // kGnn only
  GreedyDegree greedy_degree = GreedyDegree::kSelection;
};

/// Loads the checkpoint for gnn policies. Names: "greedy", "random",
/// "untrained-gnn", or the given gnn name (default: the checkpoint path).
MethodSpec make_method(const PolicyKind& kind, std::string name = {});
MethodSpec gnn_method(std::string name, std::shared_ptr<const QNetworkParams> params);

struct DatasetRef {
  std::string name;
  std::vector<JobAllocationGraph> graphs;
  std::vector<std::string> instance_ids;  // one per graph
  std::string provenance;                 // free text for report metadata
};

/// Instance ids are the manifest paths.
DatasetRef dataset_ref(const std::string& name, const Dataset& dataset);
/// Instance ids are "0", "1", ...
DatasetRef dataset_ref(const std::string& name, std::vector<JobAllocationGraph> graphs,
                       std::string provenance = {});

/// "family=er jobs=30 people=5 p_conflict=0.1 p_select=0.666 ba_m=3 seed=7".
std::string describe(const GeneratorConfig& config);

// -- Benchmarks ---------------------------------------------------------------

struct BenchmarkOptions {
  /// Rollouts per instance for stochastic methods (random, untrained-gnn).
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  std::uint64_t oracle_budget = kDefaultNodeBudget;
  ConflictRemovalMode mode = ConflictRemovalMode::kBidirectional;
};

struct BenchmarkCell {
  std::string method;
  std::string dataset;
  std::vector<std::string> instance_ids;
  std::vector<double> ratios;  // per instance, averaged over seeds if stochastic
  double mean = 0.0;
  double std = 0.0;
};

struct SkippedInstance {
  std::string dataset;
  std::string instance;
  std::string reason;
};

struct BenchmarkReport {
  std::vector<BenchmarkCell> cells;  // method-major, in input order
  std::vector<SkippedInstance> skipped;
  std::map<std::string, std::string> metadata;

  const BenchmarkCell* find(const std::string& method, const std::string& dataset) const;
};

/// Seed of rollout `repeat` of a stochastic method on a graph. It depends on
/// the graph content, not on dataset names or on the other methods.
std::uint64_t rollout_seed(std::uint64_t base, PolicyKind::Tag tag, std::uint64_t fingerprint,
                           std::size_t repeat);

/// Parameters of the untrained network used for repeat `repeat`.
QNetworkParams untrained_params(std::uint64_t base, std::size_t repeat, const QNetConfig& net = {});

/// Ratio of one method on one instance (averaged over opts.seeds rollouts for
/// stochastic methods). Throws BudgetExceeded when `optimum` is not proven.
double evaluate(const MethodSpec& method, const JobAllocationGraph& g, const OptimumResult& optimum,
                const BenchmarkOptions& opts);

/// Solves every instance once and rolls out every method on it. Instances
/// whose oracle runs out of budget are listed in `skipped`.
BenchmarkReport run_benchmark(std::span<const DatasetRef> datasets, std::span<const MethodSpec> methods,
                              const BenchmarkOptions& opts);

/// Every (checkpoint, dataset) pair; the report's metadata records each
/// checkpoint's training distribution.
struct NamedCheckpoint {
  std::string name;
  Checkpoint checkpoint;
};
BenchmarkReport run_ood(std::span<const NamedCheckpoint> checkpoints, std::span<const DatasetRef> datasets,
                        const BenchmarkOptions& opts);

// -- Sweeps -------------------------------------------------------------------

enum class SweepParameter { kConflictProbability, kJobs };

const char* to_string(SweepParameter p);  // "p_conflict", "jobs"
SweepParameter parse_sweep_parameter(const std::string& name);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::kConflictProbability;
  std::vector<double> grid;  // strictly increasing
  GeneratorConfig base;      // everything not swept; base.seed seeds every point
  std::size_t instances = 20;
};

/// The generator config of one grid point. Instances of that point are
/// generate_graphs(sweep_point_config(spec, v), spec.instances).
GeneratorConfig sweep_point_config(const SweepSpec& spec, double value);

struct SweepCell {
  std::string method;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_instances = 0;
  std::size_t n_skipped = 0;
};

struct SweepResult {
  std::string parameter;
  std::vector<double> grid;
  std::vector<std::string> methods;
  std::vector<std::vector<SweepCell>> points;  // [grid index][method index]
  std::map<std::string, std::string> metadata;
};

/// Methods are "gnn" (when params are given), "greedy" and "random".
SweepResult run_er_sweep(std::shared_ptr<const QNetworkParams> gnn, const SweepSpec& spec,
                         const BenchmarkOptions& opts);

// -- Diagnostics --------------------------------------------------------------

struct EpisodeDiagnostics {
  std::vector<double> max_q;         // max_a Q(s_t, a) at each step t
  std::vector<double> normalized_q;  // max_q / max_t max_q
  /// "max" normally; "min-max" when some max_q is not positive, in which
  /// case the series is (q - min) / (max - min) so it stays in [0, 1].
  std::string normalization = "max";
  std::vector<double> loss;          // training loss per update, if a log was given
  std::optional<double> spearman_vs_step;  // correlation of normalized_q with t
  std::size_t episode_length = 0;
};

/// One episode that always takes the highest-Q assignment.
EpisodeDiagnostics run_diagnostics(const QNetworkParams& params, const JobAllocationGraph& g,
                                   const TrainingLog* log = nullptr,
                                   ConflictRemovalMode mode = ConflictRemovalMode::kBidirectional);

// -- Output -------------------------------------------------------------------

/// method,dataset,n_instances,n_skipped,mean_ratio,std_ratio
void write_summary_csv(std::ostream& os, const BenchmarkReport& report);
/// method,dataset,instance,ratio
void write_instances_csv(std::ostream& os, const BenchmarkReport& report);
/// dataset,instance,reason
void write_skipped_csv(std::ostream& os, const BenchmarkReport& report);
/// key,value
void write_metadata_csv(std::ostream& os, const std::map<std::string, std::string>& metadata);
/// Methods as rows, datasets as columns, "mean +/- std" cells.
void write_report_table(std::ostream& os, const BenchmarkReport& report);

/// parameter,value,method,mean_ratio,std_ratio,n_instances
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);
/// step,max_q,normalized_q
void write_diagnostics_csv(std::ostream& os, const EpisodeDiagnostics& d);

struct SummaryRow {
  std::string method;
  std::string dataset;
  std::size_t n_instances = 0;
  std::size_t n_skipped = 0;
  double mean_ratio = 0.0;
  double std_ratio = 0.0;

  bool operator==(const SummaryRow&) const = default;
};
std::vector<SummaryRow> summary_rows(const BenchmarkReport& report);
std::vector<SummaryRow> read_summary_csv(std::istream& is);

}  // namespace jap
