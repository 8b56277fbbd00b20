#include "jap/generator.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "jap/graph_io.hpp"
#include "jap/rng.hpp"
#include "jap/text.hpp"

namespace jap {

const char* to_string(GraphFamily family) {
  return family == GraphFamily::kErdosRenyi ? "er" : "ba";
}

GraphFamily parse_family(const std::string& name) {
  if (name == "er" || name == "erdos-renyi") return GraphFamily::kErdosRenyi;
  if (name == "ba" || name == "barabasi-albert") return GraphFamily::kBarabasiAlbert;
  throw InvalidConfig("unknown graph family '" + name + "'");
}

void validate(const GeneratorConfig& c) {
  if (c.n_jobs < 1) throw InvalidConfig("n_jobs must be >= 1");
  if (c.n_people < 1) throw InvalidConfig("n_people must be >= 1");
  if (!(c.p_conflict >= 0.0 && c.p_conflict <= 1.0))
    throw InvalidConfig("p_conflict must lie in [0, 1]");
  if (!(c.p_select >= 0.0 && c.p_select <= 1.0)) throw InvalidConfig("p_select must lie in [0, 1]");
  if (c.family == GraphFamily::kBarabasiAlbert && (c.ba_m < 1 || c.ba_m >= c.n_jobs))
    throw InvalidConfig("ba_m must satisfy 1 <= ba_m < n_jobs");
}

GeneratorConfig preset(const std::string& name) {
  GeneratorConfig c;
  if (name == "er") {
    c.n_jobs = 300;
    c.n_people = 15;
  } else if (name == "ba") {
    c.family = GraphFamily::kBarabasiAlbert;
    c.n_jobs = 300;
    c.n_people = 15;
    c.p_select = 0.697;
  } else if (name == "planny") {
    c.n_jobs = 507;
    c.n_people = 25;
    c.p_conflict = 0.0559;
    c.p_select = 0.456;
  } else if (name == "er-small") {
    // defaults
  } else if (name == "ba-small") {
    c.family = GraphFamily::kBarabasiAlbert;
    c.p_select = 0.697;
  } else {
    throw InvalidConfig("unknown preset '" + name + "'");
  }
  return c;
}

namespace {

// Undirected preferential attachment: the first new job links to all of the
// m seed jobs, every later job links to m distinct targets drawn from the
// degree-weighted pool. Produces exactly m * (n - m) edges.
std::vector<std::pair<JobIndex, JobIndex>> barabasi_albert_edges(std::int32_t n, std::int32_t m,
                                                                 Rng& rng) {
  std::vector<std::pair<JobIndex, JobIndex>> edges;
  std::vector<JobIndex> pool;
  std::vector<JobIndex> targets(m);
  for (JobIndex i = 0; i < m; ++i) targets[i] = i;
  for (JobIndex source = m; source < n; ++source) {
    for (JobIndex t : targets) {
      edges.emplace_back(source, t);
      pool.push_back(t);
      pool.push_back(source);
    }
    targets.clear();
    while (static_cast<std::int32_t>(targets.size()) < m) {
      const JobIndex pick = pool[rng.index(pool.size())];
      if (std::find(targets.begin(), targets.end(), pick) == targets.end()) targets.push_back(pick);
    }
    std::sort(targets.begin(), targets.end());
  }
  return edges;
}

}  // namespace

JobAllocationGraph generate(const GeneratorConfig& config) {
  validate(config);
  Rng rng(config.seed);

  std::vector<ConflictArc> conflicts;
  if (config.family == GraphFamily::kErdosRenyi) {
    for (JobIndex u = 0; u < config.n_jobs; ++u)
      for (JobIndex v = 0; v < config.n_jobs; ++v)
        if (u != v && rng.bernoulli(config.p_conflict)) conflicts.push_back({u, v});
  } else {
    for (const auto& [u, v] : barabasi_albert_edges(config.n_jobs, config.ba_m, rng)) {
      conflicts.push_back({u, v});
      conflicts.push_back({v, u});
    }
  }

  std::vector<Assignment> selection;
  for (PersonIndex p = 0; p < config.n_people; ++p)
    for (JobIndex j = 0; j < config.n_jobs; ++j)
      if (rng.bernoulli(config.p_select)) selection.push_back({p, j});

  return JobAllocationGraph(config.n_people, config.n_jobs, std::move(selection),
                            std::move(conflicts));
}

std::uint64_t instance_seed(std::uint64_t base_seed, std::size_t i) {
  return Rng::derive_seed(base_seed, "instance", i);
}

std::vector<JobAllocationGraph> generate_graphs(const GeneratorConfig& base, std::size_t count) {
  std::vector<JobAllocationGraph> graphs;
  graphs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    GeneratorConfig c = base;
    c.seed = instance_seed(base.seed, i);
    graphs.push_back(generate(c));
  }
  return graphs;
}

DatasetStats dataset_stats(std::span<const JobAllocationGraph> graphs) {
  if (graphs.empty()) throw std::invalid_argument("EmptyDataset: no graphs to summarize");
  DatasetStats s;
  s.n_graphs = graphs.size();
  for (const auto& g : graphs) {
    s.mean_jobs += g.n_jobs();
    s.mean_people += g.n_people();
    s.mean_conflict_arcs += static_cast<double>(g.conflicts().size());
    s.mean_selection_edges += static_cast<double>(g.selection().size());
    s.mean_density += graph_density(g);
    s.mean_digraph_density += digraph_density(g);
  }
  const double n = static_cast<double>(graphs.size());
  s.mean_jobs /= n;
  s.mean_people /= n;
  s.mean_conflict_arcs /= n;
  s.mean_selection_edges /= n;
  s.mean_density /= n;
  s.mean_digraph_density /= n;
  return s;
}

// -- Manifest -----------------------------------------------------------------

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw std::runtime_error("manifest: bad value for '" + key + "': " + text);
  return value;
}

}  // namespace

std::string format_manifest_line(const ManifestEntry& e) {
  const auto& c = e.config;
  std::ostringstream os;
  os << "family=" << to_string(c.family) << " jobs=" << c.n_jobs << " people=" << c.n_people
     << " p_conflict=" << format_number(c.p_conflict) << " p_select=" << format_number(c.p_select)
     << " ba_m=" << c.ba_m << " seed=" << c.seed << " path=" << e.path;
  return os.str();
}

ManifestEntry parse_manifest_line(const std::string& line) {
  std::map<std::string, std::string> fields;
  std::istringstream is(line);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw std::runtime_error("manifest: expected key=value: " + token);
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::runtime_error(std::string("manifest: missing '") + key + "'");
    return it->second;
  };
  ManifestEntry e;
  e.config.family = parse_family(get("family"));
  e.config.n_jobs = parse_number<std::int32_t>("jobs", get("jobs"));
  e.config.n_people = parse_number<std::int32_t>("people", get("people"));
  e.config.p_conflict = parse_number<double>("p_conflict", get("p_conflict"));
  e.config.p_select = parse_number<double>("p_select", get("p_select"));
  e.config.ba_m = parse_number<std::int32_t>("ba_m", get("ba_m"));
  e.config.seed = parse_number<std::uint64_t>("seed", get("seed"));
  e.path = get("path");
  return e;
}

Dataset generate_dataset(const GeneratorConfig& base, std::size_t count,
                         const std::filesystem::path& dir) {
  validate(base);
  std::filesystem::create_directories(dir);
  Dataset ds;
  ds.name = dir.filename().string();
  std::ofstream manifest(dir / kManifestFile, std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  manifest << "# jap-manifest 1 rng=" << Rng::kAlgorithm << '\n';
  for (std::size_t i = 0; i < count; ++i) {
    ManifestEntry e;
    e.config = base;
    e.config.seed = instance_seed(base.seed, i);
    std::ostringstream name;
    name << "instance_" << std::setw(4) << std::setfill('0') << i << ".jap";
    e.path = name.str();
    auto g = generate(e.config);
    write_instance_file(dir / e.path, g);
    manifest << format_manifest_line(e) << '\n';
    ds.entries.push_back(std::move(e));
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / kManifestFile, std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot read " + (dir / kManifestFile).string());
  Dataset ds;
  ds.name = dir.filename().string();
  if (ds.name.empty()) ds.name = dir.parent_path().filename().string();
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto e = parse_manifest_line(line);
    ds.graphs.push_back(read_instance_file(dir / e.path));
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

}  // namespace jap
