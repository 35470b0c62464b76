#pragma once

// Checkpoint directory: manifest.json (format, version, system spec, seed,
// stage, parameter table) plus one little-endian f64 file per parameter,
// listed in lexicographic name order.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "semcom/ad.hpp"
#include "semcom/model.hpp"

namespace semcom {

inline constexpr int kCheckpointVersion = 1;

enum class Stage { None, T1, T2, T3, Digital };
std::string to_string(Stage s);
Stage parse_stage(const std::string& text);

struct Checkpoint {
  model::SystemSpec spec;
  std::uint64_t seed = 0;
  Stage stage = Stage::None;
  ad::ParamStore store;
};

nlohmann::json spec_to_json(const model::SystemSpec& spec);
model::SystemSpec spec_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace semcom
