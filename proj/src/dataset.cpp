#include "semcom/dataset.hpp"

#include <cmath>
#include <type_traits>

#include "json.hpp"
#include "semcom/error.hpp"
#include "semcom/io.hpp"
#include "semcom/rng.hpp"

namespace semcom::data {

using nlohmann::json;
namespace fs = std::filesystem;

void SyntheticConfig::validate() const {
  if (p < 1 || d < 1) throw ValidationError("dataset.p and dataset.d must be >= 1");
  if (d > p) throw ValidationError("dataset.d must not exceed dataset.p");
  if (n_train_ids < 1 || n_test_ids < 1) throw ValidationError("dataset identity counts must be >= 1");
  if (obs_per_view < 2 || obs_per_view % 2 != 0) {
    throw ValidationError("dataset.obs_per_view must be even and >= 2");
  }
  if (!(sigma_obs >= 0) || !std::isfinite(sigma_obs)) throw ValidationError("dataset.sigma_obs must be >= 0");
}

Tensor PairSet::view(int which) const {
  const auto& src = which == 1 ? s1 : s2;
  Tensor t({n, p});
  for (std::size_t i = 0; i < src.size(); ++i) t[i] = src[i];
  return t;
}

Tensor PairSet::view_rows(int which, const std::vector<std::size_t>& rows) const {
  const auto& src = which == 1 ? s1 : s2;
  Tensor t({rows.size(), p});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < p; ++c) t.at(r, c) = src[rows[r] * p + c];
  }
  return t;
}

Tensor PairSet::label_rows(const std::vector<std::size_t>& rows) const {
  Tensor t({rows.size(), 1});
  for (std::size_t r = 0; r < rows.size(); ++r) t[r] = labels[rows[r]];
  return t;
}

namespace {

void observe(const std::vector<float>& cam, const float* u, std::size_t p, std::size_t d,
             double sigma, Rng& rng, std::vector<float>& out) {
  for (std::size_t i = 0; i < p; ++i) {
    double acc = 0;
    for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(cam[i * d + k]) * u[k];
    out.push_back(static_cast<float>(acc + sigma * rng.normal()));
  }
}

}  // namespace

Dataset generate(const SyntheticConfig& config) {
  config.validate();
  const std::size_t p = config.p, d = config.d;
  Rng rng(config.seed, Stream::Dataset);
  Dataset ds;
  ds.config = config;
  const double cam_sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto* cam : {&ds.camera1, &ds.camera2}) {
    cam->resize(p * d);
    for (float& v : *cam) v = static_cast<float>(cam_sd * rng.normal());
  }
  const std::size_t ids = config.n_train_ids + config.n_test_ids;
  ds.latents.resize(ids * d);
  for (float& v : ds.latents) v = static_cast<float>(rng.normal());

  for (PairSet* set : {&ds.train, &ds.query, &ds.gallery}) set->p = p;
  const std::size_t half = config.obs_per_view / 2;
  for (std::size_t id = 0; id < ids; ++id) {
    const float* u = ds.latents.data() + id * d;
    const bool test = id >= config.n_train_ids;
    for (std::size_t k = 0; k < config.obs_per_view; ++k) {
      PairSet& set = !test ? ds.train : (k < half ? ds.query : ds.gallery);
      observe(ds.camera1, u, p, d, config.sigma_obs, rng, set.s1);
      observe(ds.camera2, u, p, d, config.sigma_obs, rng, set.s2);
      set.labels.push_back(static_cast<float>(id));
      ++set.n;
    }
  }
  return ds;
}

namespace {

template <class V>
struct ArrayRef {
  const char* name;
  V* data;
};

template <class D, class V = std::conditional_t<std::is_const_v<D>, const std::vector<float>, std::vector<float>>>
std::vector<ArrayRef<V>> arrays(D& ds) {
  return {{"camera1", &ds.camera1},     {"camera2", &ds.camera2},
          {"latents", &ds.latents},     {"train_s1", &ds.train.s1},
          {"train_s2", &ds.train.s2},   {"train_labels", &ds.train.labels},
          {"query_s1", &ds.query.s1},   {"query_s2", &ds.query.s2},
          {"query_labels", &ds.query.labels}, {"gallery_s1", &ds.gallery.s1},
          {"gallery_s2", &ds.gallery.s2}, {"gallery_labels", &ds.gallery.labels}};
}

json config_json(const SyntheticConfig& c) {
  return {{"p", c.p},
          {"d", c.d},
          {"n_train_ids", c.n_train_ids},
          {"n_test_ids", c.n_test_ids},
          {"obs_per_view", c.obs_per_view},
          {"sigma_obs", c.sigma_obs},
          {"seed", c.seed}};
}

}  // namespace

void save(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  json files = json::object();
  for (const auto& a : arrays(ds)) {
    const auto bytes = io::encode_f32(*a.data);
    const std::string file = std::string(a.name) + ".f32";
    io::write_bytes_atomic(dir / file, bytes);
    files[a.name] = {{"file", file},
                     {"count", a.data->size()},
                     {"bytes", bytes.size()},
                     {"crc32", io::hex32(io::crc32(bytes))}};
  }
  json m{{"format", "semcom-dataset"},
         {"version", kDatasetVersion},
         {"config", config_json(ds.config)},
         {"counts", {{"train", ds.train.n}, {"query", ds.query.n}, {"gallery", ds.gallery.n}}},
         {"arrays", files}};
  io::write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

Dataset load(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw FormatError("no dataset manifest in " + dir.string());
  json m;
  try {
    m = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError("dataset manifest unreadable: " + std::string(e.what()));
  }
  if (!m.is_object() || m.value("format", "") != "semcom-dataset") {
    throw FormatError("not a dataset manifest: " + dir.string());
  }
  if (m.value("version", -1) != kDatasetVersion) {
    throw FormatError("dataset version mismatch: expected " + std::to_string(kDatasetVersion));
  }
  Dataset ds;
  try {
    const auto& c = m.at("config");
    ds.config.p = c.at("p");
    ds.config.d = c.at("d");
    ds.config.n_train_ids = c.at("n_train_ids");
    ds.config.n_test_ids = c.at("n_test_ids");
    ds.config.obs_per_view = c.at("obs_per_view");
    ds.config.sigma_obs = c.at("sigma_obs");
    ds.config.seed = c.at("seed");
    ds.train.n = m.at("counts").at("train");
    ds.query.n = m.at("counts").at("query");
    ds.gallery.n = m.at("counts").at("gallery");
  } catch (const json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  ds.config.validate();
  for (PairSet* set : {&ds.train, &ds.query, &ds.gallery}) set->p = ds.config.p;
  const std::size_t p = ds.config.p, d = ds.config.d;
  const std::size_t ids = ds.config.n_train_ids + ds.config.n_test_ids;
  auto expected = [&](const std::string& name) -> std::size_t {
    if (name.rfind("camera", 0) == 0) return p * d;
    if (name == "latents") return ids * d;
    const std::size_t n = name.rfind("train", 0) == 0 ? ds.train.n
                          : name.rfind("query", 0) == 0 ? ds.query.n
                                                        : ds.gallery.n;
    return name.ends_with("labels") ? n : n * p;
  };
  for (const auto& a : arrays(ds)) {
    if (!m.at("arrays").contains(a.name)) throw FormatError(std::string("dataset array missing: ") + a.name);
    const auto& e = m["arrays"][a.name];
    const auto bytes = io::read_bytes(dir / e.at("file").get<std::string>());
    if (bytes.size() != e.at("bytes").get<std::size_t>() || bytes.size() != 4 * expected(a.name)) {
      throw FormatError(std::string("dataset array truncated or mis-sized: ") + a.name);
    }
    if (io::hex32(io::crc32(bytes)) != e.at("crc32").get<std::string>()) {
      throw FormatError(std::string("dataset checksum mismatch: ") + a.name);
    }
    *a.data = io::decode_f32(bytes);
  }
  return ds;
}

}  // namespace semcom::data
