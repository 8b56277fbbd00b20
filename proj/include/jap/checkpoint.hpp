#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "jap/generator.hpp"
#include "jap/qnet.hpp"

namespace jap {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trained parameters plus where they came from. The generator config of the
/// training distribution travels with the weights so out-of-distribution
/// tables can name it without extra bookkeeping.
struct Checkpoint {
  QNetworkParams params;
  std::optional<GeneratorConfig> train_distribution;
  std::map<std::string, std::string> metadata;  // training settings, status, ...
};

// JSON container:
//   {"format": "jap-checkpoint", "version": 1, "dims": [...], "k": K,
//    "conflict_direction": "in"|"out", "leaky_slope": .., "layer_norm_eps": ..,
//    "init_seed": .., "blocks": {name: [values]}, "train_distribution": {...},
//    "metadata": {...}}
// Doubles are written with round-trip precision, so save/load is exact.
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace jap
