#pragma once

#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jap/graph.hpp"

namespace jap {

enum class GraphFamily { kErdosRenyi, kBarabasiAlbert };

const char* to_string(GraphFamily family);
GraphFamily parse_family(const std::string& name);

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GeneratorConfig {
  GraphFamily family = GraphFamily::kErdosRenyi;
  std::int32_t n_jobs = 30;
  std::int32_t n_people = 5;
  double p_conflict = 0.10;  // ER only: probability of each ordered job pair
  double p_select = 0.666;   // probability of each (person, job) pair
  std::int32_t ba_m = 3;     // BA only: edges added per new job
  std::uint64_t seed = 0;

  bool operator==(const GeneratorConfig&) const = default;
};

/// Throws InvalidConfig with the offending field.
void validate(const GeneratorConfig& config);

/// Named presets: "er" (300 jobs, 15 people, p=0.10), "ba" (300 jobs, 15
/// people, m=3), "planny" (ER surrogate at 507 jobs, 25 people), and the
/// desk-scale "er-small" / "ba-small" (30 jobs, 5 people).
GeneratorConfig preset(const std::string& name);

/// Deterministic in the config (including its seed). Conflicts are drawn
/// first, then selection edges, person-major.
JobAllocationGraph generate(const GeneratorConfig& config);

/// `count` graphs with seeds instance_seed(base.seed, i).
std::vector<JobAllocationGraph> generate_graphs(const GeneratorConfig& base, std::size_t count);

/// Seed of the i-th instance of a dataset generated from `base_seed`.
std::uint64_t instance_seed(std::uint64_t base_seed, std::size_t i);

struct DatasetStats {
  std::size_t n_graphs = 0;
  double mean_jobs = 0;
  double mean_people = 0;
  double mean_conflict_arcs = 0;
  double mean_selection_edges = 0;
  double mean_density = 0;          // graph_density
  double mean_digraph_density = 0;  // digraph_density
};

/// Throws std::invalid_argument (EmptyDataset) on an empty list.
DatasetStats dataset_stats(std::span<const JobAllocationGraph> graphs);

// -- On-disk datasets ---------------------------------------------------------

struct ManifestEntry {
  GeneratorConfig config;
  std::string path;  // relative to the manifest's directory
};

struct Dataset {
  std::string name;
  std::vector<ManifestEntry> entries;
  std::vector<JobAllocationGraph> graphs;
};

inline constexpr const char* kManifestFile = "manifest.txt";

/// Generates `count` instances into `dir` plus a manifest line per instance.
Dataset generate_dataset(const GeneratorConfig& base, std::size_t count,
                         const std::filesystem::path& dir);

/// Reads `dir/manifest.txt` and every instance it names.
Dataset load_dataset(const std::filesystem::path& dir);

std::string format_manifest_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(const std::string& line);

}  // namespace jap
