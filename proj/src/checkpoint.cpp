#include "jap/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace jap {

using nlohmann::json;

namespace {

json generator_to_json(const GeneratorConfig& c) {
  return {{"family", to_string(c.family)}, {"jobs", c.n_jobs},         {"people", c.n_people},
          {"p_conflict", c.p_conflict},    {"p_select", c.p_select},   {"ba_m", c.ba_m},
          {"seed", c.seed}};
}

GeneratorConfig generator_from_json(const json& j) {
  GeneratorConfig c;
  c.family = parse_family(j.at("family").get<std::string>());
  c.n_jobs = j.at("jobs").get<std::int32_t>();
  c.n_people = j.at("people").get<std::int32_t>();
  c.p_conflict = j.at("p_conflict").get<double>();
  c.p_select = j.at("p_select").get<double>();
  c.ba_m = j.at("ba_m").get<std::int32_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  json j;
  j["format"] = "jap-checkpoint";
  j["version"] = 1;
  j["dims"] = p.dims();
  j["k"] = p.modules.size();
  j["conflict_direction"] = to_string(p.conflict_direction);
  j["leaky_slope"] = p.modules.empty() ? kLeakySlope : p.modules.front().selection.leaky_slope;
  j["layer_norm_eps"] = kLayerNormEps;
  j["init_seed"] = p.init_seed;
  json blocks_json = json::object();
  const auto names = block_names(p);
  const auto values = blocks(p);
  for (std::size_t b = 0; b < names.size(); ++b)
    blocks_json[names[b]] = std::vector<double>(values[b].begin(), values[b].end());
  j["blocks"] = std::move(blocks_json);
  if (ckpt.train_distribution) j["train_distribution"] = generator_to_json(*ckpt.train_distribution);
  j["metadata"] = ckpt.metadata;
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "jap-checkpoint") throw CheckpointError("not a jap checkpoint");
    if (j.at("version") != 1) throw CheckpointError("unsupported checkpoint version");
    QNetConfig config;
    config.dims = j.at("dims").get<std::vector<std::size_t>>();
    config.conflict_direction = parse_conflict_direction(j.at("conflict_direction").get<std::string>());
    if (j.at("k").get<std::size_t>() + 1 != config.dims.size())
      throw CheckpointError("k does not match dims");

    Checkpoint ckpt;
    ckpt.params = init_params(j.at("init_seed").get<std::uint64_t>(), config);
    const double slope = j.at("leaky_slope").get<double>();
    for (auto& m : ckpt.params.modules) m.selection.leaky_slope = m.conflict.leaky_slope = slope;

    const auto names = block_names(ckpt.params);
    auto values = blocks(ckpt.params);
    const auto& stored = j.at("blocks");
    if (stored.size() != names.size()) throw CheckpointError("unexpected number of parameter blocks");
    for (std::size_t b = 0; b < names.size(); ++b) {
      const auto v = stored.at(names[b]).get<std::vector<double>>();
      if (v.size() != values[b].size())
        throw CheckpointError("block '" + names[b] + "' has the wrong size");
      std::copy(v.begin(), v.end(), values[b].begin());
    }
    if (j.contains("train_distribution"))
      ckpt.train_distribution = generator_from_json(j.at("train_distribution"));
    if (j.contains("metadata"))
      ckpt.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << checkpoint_to_string(ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_string(buffer.str());
}

}  // namespace jap
