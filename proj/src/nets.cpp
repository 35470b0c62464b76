#include "semcom/nets.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom::nets {

MLPSpec MLPSpec::hidden(std::vector<std::size_t> widths, double slope) {
  MLPSpec s;
  s.widths = std::move(widths);
  s.slope = slope;
  const std::size_t n = s.widths.size() > 0 ? s.widths.size() - 1 : 0;
  s.batch_norm.assign(n, true);
  if (n > 0) s.batch_norm.back() = false;
  return s;
}

void MLPSpec::validate() const {
  if (widths.size() < 2) throw ValidationError("MLP needs at least one layer");
  for (std::size_t w : widths) {
    if (w < 1) throw ValidationError("MLP widths must be >= 1");
  }
  if (batch_norm.size() != layers()) throw ValidationError("MLP batch-norm flags must match layer count");
  if (!(slope >= 0)) throw ValidationError("leaky-ReLU slope must be non-negative");
}

void init_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                 double gain, Rng& rng) {
  Tensor w({in, out});
  const double sd = std::sqrt(gain / static_cast<double>(in));
  for (double& v : w.values) v = sd * rng.normal();
  store.add(prefix + ".w", std::move(w));
  store.add(prefix + ".b", Tensor({out}, 0.0));
}

namespace {

std::string layer_name(const std::string& prefix, const char* kind, std::size_t k) {
  return prefix + "." + kind + std::to_string(k);
}

}  // namespace

void init_mlp(ParamStore& store, const std::string& prefix, const MLPSpec& spec, Rng& rng) {
  spec.validate();
  for (std::size_t k = 0; k < spec.layers(); ++k) {
    const std::size_t out = spec.widths[k + 1];
    const double gain = spec.batch_norm[k] ? 2.0 : 1.0;
    init_linear(store, layer_name(prefix, "fc", k), spec.widths[k], out, gain, rng);
    if (spec.batch_norm[k]) {
      const std::string bn = layer_name(prefix, "bn", k);
      store.add(bn + ".gamma", Tensor({out}, 1.0));
      store.add(bn + ".beta", Tensor({out}, 0.0));
      store.add(bn + ".mean", Tensor({out}, 0.0), false);
      store.add(bn + ".var", Tensor({out}, 1.0), false);
    }
  }
}

void init_af(ParamStore& store, const std::string& prefix, std::size_t width, const AFSpec& spec,
             Rng& rng) {
  if (spec.csi_width < 1 || spec.hidden < 1) throw ValidationError("AF widths must be >= 1");
  init_linear(store, prefix + ".fc1", width + spec.csi_width, spec.hidden, 2.0, rng);
  init_linear(store, prefix + ".fc2", spec.hidden, width, 1.0, rng);
}

void init_mlp_af(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                 const AFSpec& af, Rng& rng) {
  init_mlp(store, prefix, spec, rng);
  for (std::size_t k = 0; k <= spec.layers(); ++k) {
    init_af(store, layer_name(prefix, "af", k), spec.widths[k], af, rng);
  }
}

NodeId linear(Graph& g, NodeId x, const std::string& prefix) {
  return g.bias_add(g.matmul(x, g.param(prefix + ".w")), g.param(prefix + ".b"));
}

NodeId af_module(Graph& g, NodeId f, NodeId csi, const std::string& prefix) {
  const NodeId ctx = g.concat({f, csi});
  const NodeId hidden = g.relu(linear(g, ctx, prefix + ".fc1"));
  const NodeId mask = g.sigmoid(linear(g, hidden, prefix + ".fc2"));
  return g.mul(f, mask);
}

NodeId mlp(Graph& g, NodeId x, const std::string& prefix, const MLPSpec& spec,
           std::optional<NodeId> csi) {
  spec.validate();
  if (csi) x = af_module(g, x, *csi, layer_name(prefix, "af", 0));
  for (std::size_t k = 0; k < spec.layers(); ++k) {
    x = linear(g, x, layer_name(prefix, "fc", k));
    if (spec.batch_norm[k]) {
      const std::string bn = layer_name(prefix, "bn", k);
      x = g.batch_norm(x, g.param(bn + ".gamma"), g.param(bn + ".beta"), bn + ".mean", bn + ".var");
      x = g.leaky_relu(x, spec.slope);
    }
    if (csi) x = af_module(g, x, *csi, layer_name(prefix, "af", k + 1));
  }
  return x;
}

std::string feature_prefix(int device) { return "fe" + std::to_string(device); }
std::string encoder_prefix(int device) { return "jenc" + std::to_string(device); }
std::string decoder_prefix(int device) { return "jdec" + std::to_string(device); }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Plain: return "plain";
    case Variant::SnrAware: return "snr_aware";
    case Variant::FadingAware: return "fading_aware";
  }
  return "plain";
}

Variant parse_variant(const std::string& text) {
  if (text == "plain") return Variant::Plain;
  if (text == "snr_aware") return Variant::SnrAware;
  if (text == "fading_aware") return Variant::FadingAware;
  throw ValidationError("model.variant must be plain, snr_aware or fading_aware, got '" + text + "'");
}

double snr_feature(double snr_db) { return snr_db / 10.0; }

namespace {

void check_width(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected width " + std::to_string(want) + ", got " +
                     std::to_string(got));
  }
}

std::vector<double> run_row(const Graph& g, ParamStore& store, const ad::TensorMap& inputs) {
  const auto ev = ad::eval_graph(g, store, inputs, ad::Mode::Infer);
  return ev.value(g.require_output("out")).values;
}

}  // namespace

FeatureVec feature_encode(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                          std::span<const double> s) {
  check_width(s.size(), spec.in_width(), "feature_encode");
  Graph g;
  g.set_output("out", mlp(g, g.input("s", s.size()), prefix, spec));
  return run_row(g, store, {{"s", Tensor::row(s)}});
}

std::vector<double> jscc_encode(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                                Variant variant, std::span<const double> v,
                                std::optional<double> snr_db) {
  check_width(v.size(), spec.in_width(), "jscc_encode");
  if (variant == Variant::SnrAware && !snr_db) throw ValidationError("snr_aware encoder requires csi");
  Graph g;
  ad::TensorMap in{{"v", Tensor::row(v)}};
  const NodeId x = g.input("v", v.size());
  std::optional<NodeId> csi;
  if (variant == Variant::SnrAware) {
    csi = g.input("csi", 1);
    in["csi"] = Tensor({1, 1}, snr_feature(*snr_db));
  }
  g.set_output("out", mlp(g, x, prefix, spec, csi));
  return run_row(g, store, in);
}

FeatureVec jscc_decode(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                       Variant variant, std::size_t csi_width, std::span<const double> y,
                       std::span<const double> csi) {
  check_width(y.size(), spec.in_width(), "jscc_decode");
  Graph g;
  ad::TensorMap in{{"y", Tensor::row(y)}};
  const NodeId x = g.input("y", y.size());
  std::optional<NodeId> c;
  if (variant != Variant::Plain) {
    check_width(csi.size(), csi_width, "jscc_decode csi");
    c = g.input("csi", csi_width);
    in["csi"] = Tensor::row(csi);
  }
  g.set_output("out", mlp(g, x, prefix, spec, c));
  return run_row(g, store, in);
}

std::vector<double> af_apply(ParamStore& store, const std::string& prefix,
                             std::span<const double> f, std::span<const double> csi) {
  const auto& w1 = store.at(prefix + ".fc1.w").value;
  check_width(f.size() + csi.size(), w1.rows(), "af_apply");
  check_width(f.size(), store.at(prefix + ".fc2.w").value.cols(), "af_apply output");
  Graph g;
  g.set_output("out", af_module(g, g.input("f", f.size()), g.input("csi", csi.size()), prefix));
  return run_row(g, store, {{"f", Tensor::row(f)}, {"csi", Tensor::row(csi)}});
}

std::vector<double> classify(ParamStore& store, const std::string& prefix,
                             std::span<const double> v) {
  check_width(v.size(), store.at(prefix + ".w").value.rows(), "classify");
  Graph g;
  g.set_output("out", g.softmax(linear(g, g.input("v", v.size()), prefix)));
  return run_row(g, store, {{"v", Tensor::row(v)}});
}

FeatureVec view_pool(std::span<const double> a, std::span<const double> b) {
  check_width(b.size(), a.size(), "view_pool");
  FeatureVec out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace semcom::nets
