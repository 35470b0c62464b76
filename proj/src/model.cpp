#include "semcom/model.hpp"

#include "semcom/error.hpp"
#include "semcom/rng.hpp"

namespace semcom::model {

using ad::NodeId;

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Single: return "single";
    case Scheme::Oma: return "oma";
    case Scheme::Noma: return "noma";
    case Scheme::Digital: return "digital";
  }
  return "noma";
}

Scheme parse_scheme(const std::string& text) {
  if (text == "single") return Scheme::Single;
  if (text == "oma") return Scheme::Oma;
  if (text == "noma") return Scheme::Noma;
  if (text == "digital") return Scheme::Digital;
  throw ValidationError("scheme must be single, oma, noma or digital, got '" + text + "'");
}

std::size_t SystemSpec::symbols_per_device() const {
  return scheme == Scheme::Oma ? q_total / 2 : q_total;
}

std::size_t SystemSpec::decoder_csi_width() const {
  switch (variant) {
    case Variant::Plain: return 0;
    case Variant::SnrAware: return 1;
    case Variant::FadingAware:
      if (scheme == Scheme::Single) return 2;
      if (scheme == Scheme::Oma && !decoder_both_gains) return 2;
      return 4;
  }
  return 0;
}

namespace {

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden,
                               std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

nets::MLPSpec SystemSpec::feature_spec() const {
  return nets::MLPSpec::hidden(chain(dims.p, dims.feature_hidden, dims.r), dims.slope);
}

nets::MLPSpec SystemSpec::encoder_spec() const {
  return nets::MLPSpec::hidden(chain(dims.r, dims.encoder_hidden, 2 * symbols_per_device()),
                               dims.slope);
}

nets::MLPSpec SystemSpec::decoder_spec() const {
  return nets::MLPSpec::hidden(chain(2 * q_total, dims.decoder_hidden, dims.r), dims.slope);
}

void SystemSpec::validate() const {
  if (dims.p < 1 || dims.r < 1 || dims.classes < 2) {
    throw ValidationError("model dims: p, r >= 1 and classes >= 2 required");
  }
  if (q_total < 1) throw ValidationError("channel.q_total must be >= 1");
  if (scheme == Scheme::Oma && q_total % 2 != 0) {
    throw ValidationError("channel.q_total must be even for OMA");
  }
  if (!(power > 0)) throw ValidationError("transmit power must be positive");
  if (dims.af_hidden < 1) throw ValidationError("model.af_hidden must be >= 1");
  if (scheme == Scheme::Digital && variant != Variant::Plain) {
    throw ValidationError("the digital scheme has no CSI-aware variant");
  }
  feature_spec().validate();
  if (jscc()) {
    encoder_spec().validate();
    decoder_spec().validate();
  }
}

void init_front(ParamStore& store, const SystemSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto fs = spec.feature_spec();
  for (int d = 1; d <= spec.devices(); ++d) {
    Rng rng(seed, Stream::Init, 10 + d);
    nets::init_mlp(store, nets::feature_prefix(d), fs, rng);
  }
  Rng rng(seed, Stream::Init, 20 + spec.devices());
  nets::init_linear(store, nets::kAux1, spec.dims.r, spec.dims.classes, 1.0, rng);
  if (spec.devices() == 2) nets::init_linear(store, nets::kAux2, spec.dims.r, spec.dims.classes, 1.0, rng);
  nets::init_linear(store, nets::kMain, spec.main_width(), spec.dims.classes, 1.0, rng);
}

void init_jscc(ParamStore& store, const SystemSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (!spec.jscc()) throw ValidationError("the digital scheme has no JSCC autoencoder");
  const auto es = spec.encoder_spec();
  const auto ds = spec.decoder_spec();
  for (int d = 1; d <= spec.devices(); ++d) {
    Rng erng(seed, Stream::Init, 100 + d);
    if (spec.variant == Variant::SnrAware) {
      nets::init_mlp_af(store, nets::encoder_prefix(d), es, {1, spec.dims.af_hidden}, erng);
    } else {
      nets::init_mlp(store, nets::encoder_prefix(d), es, erng);
    }
    Rng drng(seed, Stream::Init, 200 + d);
    if (spec.variant == Variant::Plain) {
      nets::init_mlp(store, nets::decoder_prefix(d), ds, drng);
    } else {
      nets::init_mlp_af(store, nets::decoder_prefix(d), ds,
                        {spec.decoder_csi_width(), spec.dims.af_hidden}, drng);
    }
  }
}

void init_entropy(ParamStore& store, const SystemSpec& spec) {
  store.add("ent.mean", Tensor({spec.dims.r}, 0.0));
  store.add("ent.scale", Tensor({spec.dims.r}, 1.0));
}

bool is_front_param(const std::string& name) {
  return name.rfind("fe", 0) == 0 || name.rfind("cls.", 0) == 0;
}
bool is_jscc_param(const std::string& name) {
  return name.rfind("jenc", 0) == 0 || name.rfind("jdec", 0) == 0;
}
bool is_entropy_param(const std::string& name) { return name.rfind("ent.", 0) == 0; }

namespace {

struct Features {
  NodeId v1 = 0;
  NodeId v2 = 0;
};

Features add_features(Graph& g, const SystemSpec& spec) {
  const auto fs = spec.feature_spec();
  Features f;
  f.v1 = nets::mlp(g, g.input("s1", spec.dims.p), nets::feature_prefix(1), fs);
  if (spec.devices() == 2) f.v2 = nets::mlp(g, g.input("s2", spec.dims.p), nets::feature_prefix(2), fs);
  return f;
}

NodeId add_cls_loss(Graph& g, const SystemSpec& spec, NodeId a, NodeId b, NodeId labels) {
  const NodeId ce1 = g.softmax_cross_entropy(nets::linear(g, a, nets::kAux1), labels);
  if (spec.devices() == 1) {
    const NodeId cem = g.softmax_cross_entropy(nets::linear(g, a, nets::kMain), labels);
    return g.weighted_sum({ce1, cem}, {0.5, 0.5});
  }
  const NodeId pooled = g.concat({a, b});
  const NodeId cem = g.softmax_cross_entropy(nets::linear(g, pooled, nets::kMain), labels);
  const NodeId ce2 = g.softmax_cross_entropy(nets::linear(g, b, nets::kAux2), labels);
  return g.weighted_sum({ce1, cem, ce2}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
}

struct Tx {
  NodeId x1 = 0;
  NodeId x2 = 0;
};

Tx add_transmitters(Graph& g, const SystemSpec& spec, const Features& f) {
  const auto es = spec.encoder_spec();
  std::optional<NodeId> csi;
  if (spec.variant == Variant::SnrAware) csi = g.input("csi_enc", 1);
  Tx t;
  t.x1 = g.power_normalize(nets::mlp(g, f.v1, nets::encoder_prefix(1), es, csi), spec.power);
  if (spec.devices() == 2) {
    t.x2 = g.power_normalize(nets::mlp(g, f.v2, nets::encoder_prefix(2), es, csi), spec.power);
  }
  return t;
}

Features add_receivers(Graph& g, const SystemSpec& spec, NodeId y) {
  const auto ds = spec.decoder_spec();
  Features out;
  const std::size_t k = spec.decoder_csi_width();
  std::optional<NodeId> c1, c2;
  if (k > 0) {
    c1 = g.input("csi_dec1", k);
    if (spec.devices() == 2) c2 = g.input("csi_dec2", k);
  }
  out.v1 = nets::mlp(g, y, nets::decoder_prefix(1), ds, c1);
  if (spec.devices() == 2) out.v2 = nets::mlp(g, y, nets::decoder_prefix(2), ds, c2);
  return out;
}

}  // namespace

Graph build_stage1(const SystemSpec& spec) {
  spec.validate();
  Graph g;
  const Features f = add_features(g, spec);
  const NodeId labels = g.input("labels", 1);
  g.set_output("v1", f.v1);
  if (spec.devices() == 2) g.set_output("v2", f.v2);
  g.set_output("loss", add_cls_loss(g, spec, f.v1, f.v2, labels));
  return g;
}

Graph build_features(const SystemSpec& spec) {
  spec.validate();
  Graph g;
  const Features f = add_features(g, spec);
  g.set_output("v1", f.v1);
  if (spec.devices() == 2) g.set_output("v2", f.v2);
  return g;
}

Graph build_jscc(const SystemSpec& spec, const JsccGraphOptions& options) {
  spec.validate();
  if (!spec.jscc()) throw ValidationError("build_jscc: digital scheme has no JSCC path");
  if (options.lambda_cos < 0) throw ValidationError("lambda_cos must be non-negative");
  Graph g;
  Features f;
  if (options.features_from_input) {
    f.v1 = g.input("v1", spec.dims.r);
    if (spec.devices() == 2) f.v2 = g.input("v2", spec.dims.r);
  } else {
    f = add_features(g, spec);
  }
  const Tx t = add_transmitters(g, spec, f);
  const NodeId noise = g.input("noise", 2 * spec.q_total);
  const NodeId h1 = g.input("h1", 2);
  NodeId y = 0;
  switch (spec.scheme) {
    case Scheme::Single:
      y = g.complex_gain(t.x1, h1);
      break;
    case Scheme::Oma:
      y = g.concat({g.complex_gain(t.x1, h1), g.complex_gain(t.x2, g.input("h2", 2))});
      break;
    case Scheme::Noma:
      y = g.add(g.complex_gain(t.x1, h1), g.complex_gain(t.x2, g.input("h2", 2)));
      break;
    case Scheme::Digital: break;
  }
  y = g.add(y, noise);
  const Features r = add_receivers(g, spec, y);
  const NodeId labels = g.input("labels", 1);

  NodeId loss_jscc = g.mse(f.v1, r.v1);
  if (spec.devices() == 2) loss_jscc = g.weighted_sum({loss_jscc, g.mse(f.v2, r.v2)}, {0.5, 0.5});
  const NodeId loss_cls = add_cls_loss(g, spec, r.v1, r.v2, labels);
  NodeId loss = loss_cls;
  if (spec.devices() == 2) {
    const NodeId cos = g.cosine_squared(t.x1, t.x2);
    g.set_output("cos_sq", cos);
    loss = g.weighted_sum({loss_cls, cos}, {1.0, options.lambda_cos});
    g.set_output("x2", t.x2);
    g.set_output("vhat2", r.v2);
    g.set_output("v2", f.v2);
  }
  g.set_output("v1", f.v1);
  g.set_output("x1", t.x1);
  g.set_output("y", y);
  g.set_output("vhat1", r.v1);
  g.set_output("loss_jscc", loss_jscc);
  g.set_output("loss_cls", loss_cls);
  g.set_output("loss", loss);
  return g;
}

Graph build_transmitter(const SystemSpec& spec) {
  spec.validate();
  if (!spec.jscc()) throw ValidationError("build_transmitter: digital scheme has no JSCC path");
  Graph g;
  const Features f = add_features(g, spec);
  const Tx t = add_transmitters(g, spec, f);
  g.set_output("v1", f.v1);
  g.set_output("x1", t.x1);
  if (spec.devices() == 2) {
    g.set_output("v2", f.v2);
    g.set_output("x2", t.x2);
  }
  return g;
}

Graph build_receiver(const SystemSpec& spec) {
  spec.validate();
  if (!spec.jscc()) throw ValidationError("build_receiver: digital scheme has no JSCC path");
  Graph g;
  const Features r = add_receivers(g, spec, g.input("y", 2 * spec.q_total));
  g.set_output("vhat1", r.v1);
  if (spec.devices() == 2) {
    g.set_output("vhat2", r.v2);
    g.set_output("pooled", g.concat({r.v1, r.v2}));
  } else {
    g.set_output("pooled", r.v1);
  }
  return g;
}

Graph build_digital(const SystemSpec& spec, double lambda_rate) {
  spec.validate();
  if (spec.scheme != Scheme::Digital) throw ValidationError("build_digital needs the digital scheme");
  if (lambda_rate < 0) throw ValidationError("lambda_rate must be non-negative");
  Graph g;
  const Features f = add_features(g, spec);
  const NodeId mean = g.param("ent.mean");
  const NodeId scale = g.param("ent.scale");
  const NodeId q1 = g.uniform_noise_add(f.v1, g.input("u1", spec.dims.r));
  const NodeId q2 = g.uniform_noise_add(f.v2, g.input("u2", spec.dims.r));
  const NodeId b1 = g.gaussian_code_length(q1, mean, scale);
  const NodeId b2 = g.gaussian_code_length(q2, mean, scale);
  const NodeId loss_cls = add_cls_loss(g, spec, q1, q2, g.input("labels", 1));
  g.set_output("bits1", b1);
  g.set_output("bits2", b2);
  g.set_output("loss_cls", loss_cls);
  g.set_output("loss", g.weighted_sum({loss_cls, b1, b2}, {1.0, lambda_rate, lambda_rate}));
  return g;
}

}  // namespace semcom::model
