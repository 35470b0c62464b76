#include "semcom/checkpoint.hpp"

#include "semcom/error.hpp"
#include "semcom/io.hpp"

namespace semcom {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::None: return "none";
    case Stage::T1: return "t1";
    case Stage::T2: return "t2";
    case Stage::T3: return "t3";
    case Stage::Digital: return "digital";
  }
  return "none";
}

Stage parse_stage(const std::string& text) {
  for (Stage s : {Stage::None, Stage::T1, Stage::T2, Stage::T3, Stage::Digital}) {
    if (to_string(s) == text) return s;
  }
  throw FormatError("unknown stage '" + text + "'");
}

json spec_to_json(const model::SystemSpec& spec) {
  const auto& d = spec.dims;
  return json{{"scheme", model::to_string(spec.scheme)},
              {"variant", nets::to_string(spec.variant)},
              {"p", d.p},
              {"r", d.r},
              {"classes", d.classes},
              {"feature_hidden", d.feature_hidden},
              {"encoder_hidden", d.encoder_hidden},
              {"decoder_hidden", d.decoder_hidden},
              {"af_hidden", d.af_hidden},
              {"leaky_slope", d.slope},
              {"q_total", spec.q_total},
              {"power", spec.power},
              {"decoder_both_gains", spec.decoder_both_gains}};
}

model::SystemSpec spec_from_json(const json& j) {
  model::SystemSpec s;
  try {
    s.scheme = model::parse_scheme(j.at("scheme").get<std::string>());
    s.variant = nets::parse_variant(j.at("variant").get<std::string>());
    s.dims.p = j.at("p").get<std::size_t>();
    s.dims.r = j.at("r").get<std::size_t>();
    s.dims.classes = j.at("classes").get<std::size_t>();
    s.dims.feature_hidden = j.at("feature_hidden").get<std::vector<std::size_t>>();
    s.dims.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
    s.dims.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
    s.dims.af_hidden = j.at("af_hidden").get<std::size_t>();
    s.dims.slope = j.at("leaky_slope").get<double>();
    s.q_total = j.at("q_total").get<std::size_t>();
    s.power = j.at("power").get<double>();
    s.decoder_both_gains = j.at("decoder_both_gains").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint spec: ") + e.what());
  }
  return s;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  fs::create_directories(dir);
  json params = json::array();
  for (const auto& name : ckpt.store.names()) {
    const auto& e = ckpt.store.at(name);
    const auto bytes = io::encode_f64(e.value.values);
    const std::string file = name + ".f64";
    io::write_bytes_atomic(dir / file, bytes);
    params.push_back({{"name", name},
                      {"shape", e.value.shape},
                      {"trainable", e.trainable},
                      {"file", file},
                      {"bytes", bytes.size()},
                      {"crc32", io::hex32(io::crc32(bytes))}});
  }
  json m{{"format", "semcom-checkpoint"},
         {"version", kCheckpointVersion},
         {"seed", ckpt.seed},
         {"stage", to_string(ckpt.stage)},
         {"spec", spec_to_json(ckpt.spec)},
         {"params", params}};
  io::write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw FormatError("no checkpoint manifest in " + dir.string());
  json m;
  try {
    m = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest unreadable: " + std::string(e.what()));
  }
  if (m.value("format", "") != "semcom-checkpoint") throw FormatError("not a checkpoint: " + dir.string());
  if (m.value("version", -1) != kCheckpointVersion) {
    throw FormatError("checkpoint version mismatch: expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  c.spec = spec_from_json(m.at("spec"));
  c.seed = m.at("seed").get<std::uint64_t>();
  c.stage = parse_stage(m.at("stage").get<std::string>());
  for (const auto& p : m.at("params")) {
    const std::string name = p.at("name");
    const auto bytes = io::read_bytes(dir / p.at("file").get<std::string>());
    if (bytes.size() != p.at("bytes").get<std::size_t>()) throw FormatError("truncated parameter file: " + name);
    if (io::hex32(io::crc32(bytes)) != p.at("crc32").get<std::string>()) {
      throw FormatError("checksum mismatch for parameter " + name);
    }
    const auto shape = p.at("shape").get<std::vector<std::size_t>>();
    c.store.add(name, Tensor(shape, io::decode_f64(bytes)), p.at("trainable").get<bool>());
  }
  return c;
}

}  // namespace semcom
