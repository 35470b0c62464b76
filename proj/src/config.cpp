#include "semcom/config.hpp"

#include <algorithm>
#include <set>

#include "semcom/error.hpp"
#include "semcom/io.hpp"

namespace semcom::config {

using nlohmann::json;

double PowerTable::of(model::Scheme s) const {
  switch (s) {
    case model::Scheme::Single: return single;
    case model::Scheme::Oma: return oma;
    case model::Scheme::Noma: return noma;
    case model::Scheme::Digital: return digital;
  }
  return 1.0;
}

namespace {

// Reads known keys from one object and rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(name(key) + ": " + e.what());
    }
  }

  template <class T, class Parse>
  void get_parsed(const std::string& key, T& out, Parse parse) {
    std::string text;
    get(key, text);
    if (j_.contains(key)) out = parse(text);
  }

  template <class Fn>
  void sub(const std::string& key, Fn fn) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Section s(j_.at(key), name(key));
    fn(s);
    s.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ValidationError("unknown config key: " + name(k));
    }
  }

  std::string name(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_schedule(Section& s, std::size_t& epochs, training::LrSchedule& lr) {
  s.get("epochs", epochs);
  s.get("lr", lr.initial);
  s.get("lr_final", lr.final_lr);
  s.get("drop_epoch", lr.drop_epoch);
}

void read_lr(Section& s, training::LrSchedule& lr) {
  s.get("lr", lr.initial);
  s.get("lr_final", lr.final_lr);
  s.get("drop_epoch", lr.drop_epoch);
}

json schedule_json(const training::LrSchedule& lr) {
  return {{"lr", lr.initial}, {"lr_final", lr.final_lr}, {"drop_epoch", lr.drop_epoch}};
}

std::vector<model::Scheme> parse_schemes(const std::vector<std::string>& names) {
  std::vector<model::Scheme> out;
  for (const auto& n : names) out.push_back(model::parse_scheme(n));
  return out;
}

std::vector<std::string> scheme_names(const std::vector<model::Scheme>& schemes) {
  std::vector<std::string> out;
  for (auto s : schemes) out.push_back(model::to_string(s));
  return out;
}

}  // namespace

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  Section root(j, "config");
  root.sub("dataset", [&](Section& s) {
    auto& d = c.dataset;
    s.get("p", d.p);
    s.get("d", d.d);
    s.get("n_train_ids", d.n_train_ids);
    s.get("n_test_ids", d.n_test_ids);
    s.get("obs_per_view", d.obs_per_view);
    s.get("sigma_obs", d.sigma_obs);
    s.get("seed", d.seed);
  });
  root.sub("model", [&](Section& s) {
    auto& m = c.model;
    s.get("r", m.dims.r);
    s.get("feature_hidden", m.dims.feature_hidden);
    s.get("encoder_hidden", m.dims.encoder_hidden);
    s.get("decoder_hidden", m.dims.decoder_hidden);
    s.get("af_hidden", m.dims.af_hidden);
    s.get("slope", m.dims.slope);
    s.get_parsed("variant", m.variant, nets::parse_variant);
    s.get("decoder_both_gains", m.decoder_both_gains);
  });
  root.sub("channel", [&](Section& s) {
    auto& ch = c.channel;
    s.get_parsed("kind", ch.kind, channel::parse_kind);
    s.get_parsed("csi_mode", ch.csi_mode, channel::parse_csi_mode);
    s.get("sigma_h2", ch.sigma_h2);
    s.get("q_total", ch.q_total);
    s.get("snr_train_db", ch.snr_train_db);
    s.sub("power", [&](Section& p) {
      p.get("single", ch.power.single);
      p.get("oma", ch.power.oma);
      p.get("noma", ch.power.noma);
      p.get("digital", ch.power.digital);
    });
  });
  root.sub("training", [&](Section& s) {
    auto& t = c.training;
    s.get("batch", t.batch);
    s.get("momentum", t.momentum);
    s.get("weight_decay", t.weight_decay);
    s.get("lambda_cos", t.lambda_cos);
    s.get("lambda_rate", t.lambda_rate);
    s.get("divergence_limit", t.divergence_limit);
    s.sub("t1", [&](Section& x) { read_schedule(x, t.t1_epochs, t.t1_lr); });
    s.sub("t2", [&](Section& x) { read_schedule(x, t.t2_epochs, t.t2_lr); });
    s.sub("t3", [&](Section& x) {
      x.get("epochs", t.t3_epochs);
      x.sub("front", [&](Section& y) { read_lr(y, t.t3_front_lr); });
      x.sub("jscc", [&](Section& y) { read_lr(y, t.t3_jscc_lr); });
    });
    s.sub("digital", [&](Section& x) { read_schedule(x, t.digital_epochs, t.digital_lr); });
    s.sub("snr_range", [&](Section& x) {
      x.get("lo_db", t.snr.lo_db);
      x.get("hi_db", t.snr.hi_db);
    });
  });
  root.sub("eval", [&](Section& s) {
    auto& e = c.eval;
    std::vector<std::string> names = scheme_names(e.schemes);
    s.get("schemes", names);
    e.schemes = parse_schemes(names);
    s.get("snr_test_db", e.snr_test_db);
    s.get("seeds", e.seeds);
    s.get("repeats", e.repeats);
    s.get("bandwidths", e.bandwidths);
    s.get("bandwidth_snr_db", e.bandwidth_snr_db);
    s.get("lambda_cos", e.lambda_cos);
    s.get("lambda_cos_snr_db", e.lambda_cos_snr_db);
    s.get("mismatch_train_db", e.mismatch_train_db);
    s.get("mismatch_test_db", e.mismatch_test_db);
    names = scheme_names(e.mismatch_schemes);
    s.get("mismatch_schemes", names);
    e.mismatch_schemes = parse_schemes(names);
    s.get("lambda_rate", e.lambda_rate);
    s.get("out", e.out);
  });
  root.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  const auto& m = c.model;
  const auto& ch = c.channel;
  const auto& t = c.training;
  const auto& e = c.eval;
  return {
      {"dataset",
       {{"p", d.p},
        {"d", d.d},
        {"n_train_ids", d.n_train_ids},
        {"n_test_ids", d.n_test_ids},
        {"obs_per_view", d.obs_per_view},
        {"sigma_obs", d.sigma_obs},
        {"seed", d.seed}}},
      {"model",
       {{"r", m.dims.r},
        {"feature_hidden", m.dims.feature_hidden},
        {"encoder_hidden", m.dims.encoder_hidden},
        {"decoder_hidden", m.dims.decoder_hidden},
        {"af_hidden", m.dims.af_hidden},
        {"slope", m.dims.slope},
        {"variant", nets::to_string(m.variant)},
        {"decoder_both_gains", m.decoder_both_gains}}},
      {"channel",
       {{"kind", channel::to_string(ch.kind)},
        {"csi_mode", channel::to_string(ch.csi_mode)},
        {"sigma_h2", ch.sigma_h2},
        {"q_total", ch.q_total},
        {"snr_train_db", ch.snr_train_db},
        {"power",
         {{"single", ch.power.single},
          {"oma", ch.power.oma},
          {"noma", ch.power.noma},
          {"digital", ch.power.digital}}}}},
      {"training",
       {{"batch", t.batch},
        {"momentum", t.momentum},
        {"weight_decay", t.weight_decay},
        {"lambda_cos", t.lambda_cos},
        {"lambda_rate", t.lambda_rate},
        {"divergence_limit", t.divergence_limit},
        {"t1", [&] { auto s = schedule_json(t.t1_lr); s["epochs"] = t.t1_epochs; return s; }()},
        {"t2", [&] { auto s = schedule_json(t.t2_lr); s["epochs"] = t.t2_epochs; return s; }()},
        {"t3",
         {{"epochs", t.t3_epochs}, {"front", schedule_json(t.t3_front_lr)}, {"jscc", schedule_json(t.t3_jscc_lr)}}},
        {"digital",
         [&] { auto s = schedule_json(t.digital_lr); s["epochs"] = t.digital_epochs; return s; }()},
        {"snr_range", {{"lo_db", t.snr.lo_db}, {"hi_db", t.snr.hi_db}}}}},
      {"eval",
       {{"schemes", scheme_names(e.schemes)},
        {"snr_test_db", e.snr_test_db},
        {"seeds", e.seeds},
        {"repeats", e.repeats},
        {"bandwidths", e.bandwidths},
        {"bandwidth_snr_db", e.bandwidth_snr_db},
        {"lambda_cos", e.lambda_cos},
        {"lambda_cos_snr_db", e.lambda_cos_snr_db},
        {"mismatch_train_db", e.mismatch_train_db},
        {"mismatch_test_db", e.mismatch_test_db},
        {"mismatch_schemes", scheme_names(e.mismatch_schemes)},
        {"lambda_rate", e.lambda_rate},
        {"out", e.out}}}};
}

ExperimentConfig load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError("config is not valid JSON: " + std::string(e.what()));
  }
  return from_json(j);
}

void ExperimentConfig::validate() const {
  dataset.validate();
  training.validate();
  channel::ChannelConfig{channel.kind, channel.snr_train_db, channel.sigma_h2, channel.csi_mode}.validate();
  if (!(channel.sigma_h2 > 0)) throw ValidationError("channel.sigma_h2 must be positive");
  for (double p : {channel.power.single, channel.power.oma, channel.power.noma, channel.power.digital}) {
    if (!(p > 0)) throw ValidationError("channel.power entries must be positive");
  }
  if (eval.seeds.empty()) throw ValidationError("eval.seeds must not be empty");
  if (std::set<std::uint64_t>(eval.seeds.begin(), eval.seeds.end()).size() != eval.seeds.size()) {
    throw ValidationError("eval.seeds must be distinct");
  }
  if (eval.repeats < 1) throw ValidationError("eval.repeats must be >= 1");
  if (eval.schemes.empty()) throw ValidationError("eval.schemes must not be empty");
  if (eval.lambda_rate.empty()) throw ValidationError("eval.lambda_rate must not be empty");
  for (double l : eval.lambda_cos) {
    if (l < 0) throw ValidationError("eval.lambda_cos entries must be >= 0");
  }
  for (double l : eval.lambda_rate) {
    if (l < 0) throw ValidationError("eval.lambda_rate entries must be >= 0");
  }
  if (model.variant == nets::Variant::FadingAware && channel.csi_mode != channel::CsiMode::Receiver) {
    throw ValidationError("model.variant fading_aware needs channel.csi_mode receiver");
  }
  std::vector<std::size_t> qs = eval.bandwidths;
  qs.push_back(channel.q_total);
  const auto is_oma = [](model::Scheme s) { return s == model::Scheme::Oma; };
  const bool two_device = std::any_of(eval.schemes.begin(), eval.schemes.end(), is_oma) ||
                          std::any_of(eval.mismatch_schemes.begin(), eval.mismatch_schemes.end(), is_oma);
  for (std::size_t q : qs) {
    if (q < 1) throw ValidationError("bandwidth must be >= 1");
    if (two_device && q % 2 != 0) throw ValidationError("q_total must be even for oma");
  }
  for (auto s : eval.schemes) system_spec(s).validate();
}

model::SystemSpec ExperimentConfig::system_spec(model::Scheme scheme, nets::Variant variant,
                                                std::size_t q_total) const {
  model::SystemSpec s;
  s.scheme = scheme;
  s.variant = variant;
  s.dims = model.dims;
  s.dims.p = dataset.p;
  s.dims.classes = dataset.n_train_ids;
  s.q_total = q_total;
  s.power = channel.power.of(scheme);
  s.decoder_both_gains = model.decoder_both_gains;
  return s;
}

model::SystemSpec ExperimentConfig::system_spec(model::Scheme scheme) const {
  return system_spec(scheme, scheme == model::Scheme::Digital ? nets::Variant::Plain : model.variant,
                     channel.q_total);
}

training::TrainConfig ExperimentConfig::train_config(double snr_train_db) const {
  training::TrainConfig t = training;
  t.channel = channel.kind;
  t.sigma_h2 = channel.sigma_h2;
  t.snr.fixed_db = snr_train_db;
  return t;
}

}  // namespace semcom::config
