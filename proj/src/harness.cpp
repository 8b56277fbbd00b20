#include "jap/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "jap/text.hpp"

namespace jap {

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  double m2 = 0.0;
  for (double x : values) {
    ++r.n;
    const double d = x - r.mean;
    r.mean += d / static_cast<double>(r.n);
    m2 += d * (x - r.mean);
  }
  if (r.n > 0) r.std = std::sqrt(std::max(0.0, m2 / static_cast<double>(r.n)));
  return r;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean_std(rx).mean;
  const double my = mean_std(ry).mean;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// -- Methods and datasets -----------------------------------------------------

MethodSpec make_method(const PolicyKind& kind, std::string name) {
  MethodSpec m;
  m.kind = kind;
  m.greedy_degree = kind.greedy_degree;
  if (kind.tag == PolicyKind::Tag::kGnn) {
    m.params = std::make_shared<const QNetworkParams>(load_checkpoint(kind.checkpoint).params);
    m.name = name.empty() ? kind.checkpoint : std::move(name);
  } else {
    m.name = name.empty() ? kind.label() : std::move(name);
  }
  return m;
}

MethodSpec gnn_method(std::string name, std::shared_ptr<const QNetworkParams> params) {
  MethodSpec m;
  m.name = std::move(name);
  m.kind.tag = PolicyKind::Tag::kGnn;
  m.params = std::move(params);
  return m;
}

DatasetRef dataset_ref(const std::string& name, const Dataset& dataset) {
  DatasetRef d;
  d.name = name;
  d.graphs = dataset.graphs;
  for (const auto& e : dataset.entries) d.instance_ids.push_back(e.path);
  if (!dataset.entries.empty()) {
    GeneratorConfig c = dataset.entries.front().config;
    c.seed = 0;
    d.provenance = describe(c);
    d.provenance.erase(d.provenance.rfind(" seed="));
  }
  return d;
}

DatasetRef dataset_ref(const std::string& name, std::vector<JobAllocationGraph> graphs,
                       std::string provenance) {
  DatasetRef d;
  d.name = name;
  for (std::size_t i = 0; i < graphs.size(); ++i) d.instance_ids.push_back(std::to_string(i));
  d.graphs = std::move(graphs);
  d.provenance = std::move(provenance);
  return d;
}

std::string describe(const GeneratorConfig& c) {
  return std::string("family=") + to_string(c.family) + " jobs=" + std::to_string(c.n_jobs) +
         " people=" + std::to_string(c.n_people) + " p_conflict=" + format_number(c.p_conflict) +
         " p_select=" + format_number(c.p_select) + " ba_m=" + std::to_string(c.ba_m) +
         " seed=" + std::to_string(c.seed);
}

// -- Benchmarks ---------------------------------------------------------------

const BenchmarkCell* BenchmarkReport::find(const std::string& method, const std::string& dataset) const {
  for (const auto& c : cells)
    if (c.method == method && c.dataset == dataset) return &c;
  return nullptr;
}

namespace {

const char* tag_name(PolicyKind::Tag tag) {
  switch (tag) {
    case PolicyKind::Tag::kGnn: return "gnn";
    case PolicyKind::Tag::kUntrainedGnn: return "untrained-gnn";
    case PolicyKind::Tag::kGreedy: return "greedy";
    case PolicyKind::Tag::kRandom: return "random";
  }
  return "unknown";
}

const char* mode_name(ConflictRemovalMode mode) {
  return mode == ConflictRemovalMode::kBidirectional ? "bidirectional" : "outgoing-only";
}

}  // namespace

std::uint64_t rollout_seed(std::uint64_t base, PolicyKind::Tag tag, std::uint64_t fingerprint,
                           std::size_t repeat) {
  return Rng::derive_seed(Rng::derive_seed(base, tag_name(tag), fingerprint), "repeat", repeat);
}

QNetworkParams untrained_params(std::uint64_t base, std::size_t repeat, const QNetConfig& net) {
  return init_params(Rng::derive_seed(base, "untrained-gnn", repeat), net);
}

double evaluate(const MethodSpec& method, const JobAllocationGraph& g, const OptimumResult& optimum,
                const BenchmarkOptions& opts) {
  switch (method.kind.tag) {
    case PolicyKind::Tag::kGreedy:
      return approximation_ratio(make_greedy_policy(method.greedy_degree), g, optimum, opts.mode);
    case PolicyKind::Tag::kGnn:
      if (!method.params) throw std::invalid_argument("gnn method '" + method.name + "' has no parameters");
      return approximation_ratio(make_gnn_policy(method.params), g, optimum, opts.mode);
    case PolicyKind::Tag::kRandom: {
      if (opts.seeds == 0) throw std::invalid_argument("seeds must be >= 1");
      double sum = 0.0;
      for (std::size_t r = 0; r < opts.seeds; ++r)
        sum += approximation_ratio(
            make_random_policy(rollout_seed(opts.seed, method.kind.tag, g.fingerprint(), r)), g,
            optimum, opts.mode);
      return sum / static_cast<double>(opts.seeds);
    }
    case PolicyKind::Tag::kUntrainedGnn: {
      if (opts.seeds == 0) throw std::invalid_argument("seeds must be >= 1");
      double sum = 0.0;
      for (std::size_t r = 0; r < opts.seeds; ++r) {
        auto params = std::make_shared<const QNetworkParams>(untrained_params(opts.seed, r));
        sum += approximation_ratio(make_gnn_policy(std::move(params)), g, optimum, opts.mode);
      }
      return sum / static_cast<double>(opts.seeds);
    }
  }
  throw std::logic_error("unknown policy tag");
}

BenchmarkReport run_benchmark(std::span<const DatasetRef> datasets, std::span<const MethodSpec> methods,
                              const BenchmarkOptions& opts) {
  BenchmarkReport report;
  report.metadata["code_version"] = kCodeVersion;
  report.metadata["rng"] = std::string(Rng::kAlgorithm);
  report.metadata["seed"] = std::to_string(opts.seed);
  report.metadata["seeds_per_instance"] = std::to_string(opts.seeds);
  report.metadata["oracle_budget"] = std::to_string(opts.oracle_budget);
  report.metadata["removal_mode"] = mode_name(opts.mode);
  report.metadata["std_estimator"] = "population";
  for (const auto& m : methods) report.metadata["method." + m.name] = m.kind.label();
  for (const auto& d : datasets) {
    report.metadata["dataset." + d.name + ".instances"] = std::to_string(d.graphs.size());
    if (!d.provenance.empty()) report.metadata["dataset." + d.name + ".generator"] = d.provenance;
  }

  // ratios[m][d] per instance, in dataset order.
  std::vector<std::vector<BenchmarkCell>> grid(methods.size(), std::vector<BenchmarkCell>(datasets.size()));
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    const DatasetRef& d = datasets[di];
    if (d.instance_ids.size() != d.graphs.size())
      throw std::invalid_argument("dataset '" + d.name + "': instance ids do not match graphs");
    for (std::size_t i = 0; i < d.graphs.size(); ++i) {
      const auto& g = d.graphs[i];
      const OptimumResult opt = exact_optimum(g, opts.oracle_budget);
      if (!opt.optimal) {
        report.skipped.push_back({d.name, d.instance_ids[i],
                                  "OracleBudgetExceeded: " + std::to_string(opt.node_count) +
                                      " nodes, best lower bound " + std::to_string(opt.size)});
        continue;
      }
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        auto& cell = grid[mi][di];
        cell.ratios.push_back(evaluate(methods[mi], g, opt, opts));
        cell.instance_ids.push_back(d.instance_ids[i]);
      }
    }
  }
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t di = 0; di < datasets.size(); ++di) {
      BenchmarkCell cell = std::move(grid[mi][di]);
      cell.method = methods[mi].name;
      cell.dataset = datasets[di].name;
      const auto ms = mean_std(cell.ratios);
      cell.mean = ms.mean;
      cell.std = ms.std;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

BenchmarkReport run_ood(std::span<const NamedCheckpoint> checkpoints, std::span<const DatasetRef> datasets,
                        const BenchmarkOptions& opts) {
  std::vector<MethodSpec> methods;
  for (const auto& c : checkpoints)
    methods.push_back(gnn_method(c.name, std::make_shared<const QNetworkParams>(c.checkpoint.params)));
  BenchmarkReport report = run_benchmark(datasets, methods, opts);
  for (const auto& c : checkpoints) {
    const auto& td = c.checkpoint.train_distribution;
    report.metadata["method." + c.name + ".train_distribution"] = td ? describe(*td) : "unknown";
  }
  return report;
}

// -- Sweeps -------------------------------------------------------------------

const char* to_string(SweepParameter p) {
  return p == SweepParameter::kConflictProbability ? "p_conflict" : "jobs";
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "p_conflict" || name == "p" || name == "p-conflict") return SweepParameter::kConflictProbability;
  if (name == "jobs" || name == "n_jobs") return SweepParameter::kJobs;
  throw std::invalid_argument("unknown sweep parameter '" + name + "' (p_conflict|jobs)");
}

GeneratorConfig sweep_point_config(const SweepSpec& spec, double value) {
  GeneratorConfig c = spec.base;
  if (spec.parameter == SweepParameter::kConflictProbability) {
    c.p_conflict = value;
  } else {
    if (value < 1.0 || value != std::floor(value))
      throw InvalidConfig("jobs grid values must be positive integers");
    c.n_jobs = static_cast<std::int32_t>(value);
  }
  validate(c);
  return c;
}

SweepResult run_er_sweep(std::shared_ptr<const QNetworkParams> gnn, const SweepSpec& spec,
                         const BenchmarkOptions& opts) {
  if (spec.grid.empty()) throw std::invalid_argument("sweep grid is empty");
  for (std::size_t i = 1; i < spec.grid.size(); ++i)
    if (!(spec.grid[i] > spec.grid[i - 1])) throw std::invalid_argument("sweep grid must be strictly increasing");

  std::vector<MethodSpec> methods;
  if (gnn) methods.push_back(gnn_method("gnn", gnn));
  methods.push_back(make_method(PolicyKind::parse("greedy")));
  methods.push_back(make_method(PolicyKind::parse("random")));

  SweepResult result;
  result.parameter = to_string(spec.parameter);
  result.grid = spec.grid;
  for (const auto& m : methods) result.methods.push_back(m.name);
  result.metadata["code_version"] = kCodeVersion;
  result.metadata["rng"] = std::string(Rng::kAlgorithm);
  result.metadata["seed"] = std::to_string(opts.seed);
  result.metadata["seeds_per_instance"] = std::to_string(opts.seeds);
  result.metadata["instances_per_point"] = std::to_string(spec.instances);
  result.metadata["base_generator"] = describe(spec.base);
  result.metadata["grid_source"] = "user-chosen grid";

  for (double v : spec.grid) {
    const GeneratorConfig c = sweep_point_config(spec, v);
    const DatasetRef d = dataset_ref(std::string(result.parameter) + "=" + format_number(v),
                                     generate_graphs(c, spec.instances), describe(c));
    const BenchmarkReport r = run_benchmark(std::span(&d, 1), methods, opts);
    std::vector<SweepCell> point;
    for (const auto& cell : r.cells)
      point.push_back({cell.method, cell.mean, cell.std, cell.ratios.size(), r.skipped.size()});
    result.points.push_back(std::move(point));
  }
  return result;
}

// -- Diagnostics --------------------------------------------------------------

EpisodeDiagnostics run_diagnostics(const QNetworkParams& params, const JobAllocationGraph& g,
                                   const TrainingLog* log, ConflictRemovalMode mode) {
  EpisodeDiagnostics d;
  JobAllocationGraph s = g;
  while (!s.terminal()) {
    const auto q = q_values(s, params);
    const std::size_t best = argmax_index(q);
    d.max_q.push_back(q[best]);
    s = apply_assignment(s, s.selection()[best], mode);
  }
  d.episode_length = d.max_q.size();
  if (!d.max_q.empty()) {
    const auto [lo, hi] = std::minmax_element(d.max_q.begin(), d.max_q.end());
    const double min = *lo, max = *hi;
    if (min > 0.0) {
      for (double v : d.max_q) d.normalized_q.push_back(v == max ? 1.0 : v / max);
    } else {
      d.normalization = "min-max";
      for (double v : d.max_q) d.normalized_q.push_back(max == min ? 1.0 : (v - min) / (max - min));
    }
    std::vector<double> t(d.max_q.size());
    std::iota(t.begin(), t.end(), 0.0);
    d.spearman_vs_step = spearman(d.normalized_q, t);
  }
  if (log)
    for (const auto& row : log->rows) d.loss.push_back(row.loss);
  return d;
}

// -- Output -------------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

constexpr const char* kSummaryHeader = "method,dataset,n_instances,n_skipped,mean_ratio,std_ratio";

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::vector<SummaryRow> summary_rows(const BenchmarkReport& report) {
  std::map<std::string, std::size_t> skipped;
  for (const auto& s : report.skipped) ++skipped[s.dataset];
  std::vector<SummaryRow> rows;
  for (const auto& c : report.cells)
    rows.push_back({c.method, c.dataset, c.ratios.size(), skipped[c.dataset], c.mean, c.std});
  return rows;
}

void write_summary_csv(std::ostream& os, const BenchmarkReport& report) {
  os << kSummaryHeader << '\n';
  for (const auto& r : summary_rows(report))
    os << csv_field(r.method) << ',' << csv_field(r.dataset) << ',' << r.n_instances << ','
       << r.n_skipped << ',' << format_number(r.mean_ratio) << ',' << format_number(r.std_ratio) << '\n';
}

std::vector<SummaryRow> read_summary_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSummaryHeader)
    throw std::runtime_error("summary csv: unexpected header");
  std::vector<SummaryRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 6) throw std::runtime_error("summary csv: expected 6 columns: " + line);
    rows.push_back({f[0], f[1], static_cast<std::size_t>(std::stoull(f[2])),
                    static_cast<std::size_t>(std::stoull(f[3])), parse_double(f[4]), parse_double(f[5])});
  }
  return rows;
}

void write_instances_csv(std::ostream& os, const BenchmarkReport& report) {
  os << "method,dataset,instance,ratio\n";
  for (const auto& c : report.cells)
    for (std::size_t i = 0; i < c.ratios.size(); ++i)
      os << csv_field(c.method) << ',' << csv_field(c.dataset) << ',' << csv_field(c.instance_ids[i]) << ','
         << format_number(c.ratios[i]) << '\n';
}

void write_skipped_csv(std::ostream& os, const BenchmarkReport& report) {
  os << "dataset,instance,reason\n";
  for (const auto& s : report.skipped)
    os << csv_field(s.dataset) << ',' << csv_field(s.instance) << ',' << csv_field(s.reason) << '\n';
}

void write_metadata_csv(std::ostream& os, const std::map<std::string, std::string>& metadata) {
  os << "key,value\n";
  for (const auto& [k, v] : metadata) os << csv_field(k) << ',' << csv_field(v) << '\n';
}

void write_report_table(std::ostream& os, const BenchmarkReport& report) {
  std::vector<std::string> methods, datasets;
  for (const auto& c : report.cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(datasets.begin(), datasets.end(), c.dataset) == datasets.end()) datasets.push_back(c.dataset);
  }
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"method"});
  for (const auto& d : datasets) rows.back().push_back(d);
  for (const auto& m : methods) {
    rows.push_back({m});
    for (const auto& d : datasets) {
      const auto* c = report.find(m, d);
      rows.back().push_back(c && !c->ratios.empty() ? fixed3(c->mean) + " +/- " + fixed3(c->std) : "-");
    }
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    for (std::size_t i = 0; i < rows[ri].size(); ++i) {
      if (i) os << " | ";
      os << rows[ri][i] << std::string(width[i] - rows[ri][i].size(), ' ');
    }
    os << '\n';
    if (ri == 0) {
      for (std::size_t i = 0; i < width.size(); ++i) {
        if (i) os << "-+-";
        os << std::string(width[i], '-');
      }
      os << '\n';
    }
  }
  if (!report.skipped.empty()) os << report.skipped.size() << " instance(s) skipped\n";
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
  os << "parameter,value,method,mean_ratio,std_ratio,n_instances\n";
  for (std::size_t i = 0; i < sweep.points.size(); ++i)
    for (const auto& c : sweep.points[i])
      os << sweep.parameter << ',' << format_number(sweep.grid[i]) << ',' << csv_field(c.method) << ','
         << format_number(c.mean) << ',' << format_number(c.std) << ',' << c.n_instances << '\n';
}

void write_diagnostics_csv(std::ostream& os, const EpisodeDiagnostics& d) {
  os << "step,max_q,normalized_q\n";
  for (std::size_t t = 0; t < d.max_q.size(); ++t)
    os << t << ',' << format_number(d.max_q[t]) << ',' << format_number(d.normalized_q[t]) << '\n';
}

}  // namespace jap
