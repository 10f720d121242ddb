#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicer/nn.hpp"

namespace slicer {

// Checkpoint container, version 1 (JSON text):
//   {"format": "slicer-policy", "version": 1,
//    "arch": {"input_dim": I, "hidden": [...], "output_dim": O},
//    "params": [...],   // flat, canonical layer order
//    "meta": {"seed": S, "env_id": "...", "reward_config_hash": "...",
//             "algorithm": "...", "steps": N}}
// Parameters are written in shortest round-trip form, so load(save(m)) is exact.

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string env_id;
  std::string reward_config_hash;
  std::string algorithm;
  std::int64_t steps = 0;
  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  PolicyModel model;
  CheckpointMeta meta;
};

inline nlohmann::json checkpoint_to_json(const PolicyModel& m, const CheckpointMeta& meta) {
  nlohmann::json j;
  j["format"] = "slicer-policy";
  j["version"] = kCheckpointVersion;
  j["arch"] = {{"input_dim", m.arch().input_dim}, {"hidden", m.arch().hidden}, {"output_dim", m.arch().output_dim}};
  j["params"] = m.export_params();
  j["meta"] = {{"seed", meta.seed},
               {"env_id", meta.env_id},
               {"reward_config_hash", meta.reward_config_hash},
               {"algorithm", meta.algorithm},
               {"steps", meta.steps}};
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "slicer-policy")
      throw std::runtime_error("checkpoint: not a policy checkpoint");
    const int v = j.at("version").get<int>();
    if (v != kCheckpointVersion)
      throw std::runtime_error("checkpoint: unsupported version " + std::to_string(v));
    MlpArchitecture a;
    a.input_dim = j.at("arch").at("input_dim").get<std::size_t>();
    a.hidden = j.at("arch").at("hidden").get<std::vector<std::size_t>>();
    a.output_dim = j.at("arch").at("output_dim").get<std::size_t>();
    Checkpoint c{PolicyModel(a), {}};
    c.model.import_params(j.at("params").get<std::vector<double>>());
    const auto& m = j.at("meta");
    c.meta.seed = m.at("seed").get<std::uint64_t>();
    c.meta.env_id = m.at("env_id").get<std::string>();
    c.meta.reward_config_hash = m.at("reward_config_hash").get<std::string>();
    c.meta.algorithm = m.at("algorithm").get<std::string>();
    c.meta.steps = m.at("steps").get<std::int64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed file: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const PolicyModel& m,
                            const CheckpointMeta& meta) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out << checkpoint_to_json(m, meta).dump() << "\n";
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace slicer
