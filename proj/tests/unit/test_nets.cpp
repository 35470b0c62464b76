#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "semcom/checkpoint.hpp"
#include "semcom/channel.hpp"
#include "semcom/error.hpp"
#include "semcom/io.hpp"
#include "semcom/model.hpp"
#include "semcom/nets.hpp"

using namespace semcom;
using namespace semcom::nets;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (double& x : t.values) x = rng.normal();
  return t;
}

// Infer-mode BN with non-trivial running statistics.
void perturb_running_stats(ad::ParamStore& store, Rng& rng) {
  for (auto& [name, e] : store) {
    if (e.trainable) continue;
    for (double& v : e.value.values) v = name.ends_with(".var") ? 0.5 + rng.uniform() : 0.3 * rng.normal();
  }
}

model::SystemSpec tiny(model::Scheme s, Variant v) {
  model::SystemSpec spec;
  spec.scheme = s;
  spec.variant = v;
  spec.dims.p = 6;
  spec.dims.r = 4;
  spec.dims.classes = 3;
  spec.dims.feature_hidden = {5};
  spec.dims.encoder_hidden = {6};
  spec.dims.decoder_hidden = {7, 5};
  spec.dims.af_hidden = 3;
  spec.q_total = 4;
  spec.power = s == model::Scheme::Noma ? 0.5 : 1.0;
  return spec;
}

}  // namespace

TEST_CASE("feature encoder contract") {
  ad::ParamStore store;
  Rng rng(1);
  const auto spec = MLPSpec::hidden({10, 8, 6, 4}, 0.01);
  init_mlp(store, "fe1", spec, rng);
  perturb_running_stats(store, rng);
  const auto s = random_vec(10, rng);
  const auto v = feature_encode(store, "fe1", spec, s);
  CHECK(v.size() == 4);
  CHECK(feature_encode(store, "fe1", spec, s) == v);
  const std::vector<double> bad(9, 0.0);
  CHECK_THROWS_AS(feature_encode(store, "fe1", spec, bad), ShapeError);

  // every parameter receives a nonzero gradient, confirmed against finite differences
  ad::Graph g;
  const auto out = mlp(g, g.input("s", 10), "fe1", spec);
  const auto loss = g.mse(out, g.input("t", 4));
  ad::TensorMap in{{"s", random_tensor(5, 10, rng)}, {"t", random_tensor(5, 4, rng)}};
  const auto ev = ad::eval_graph(g, store, in, ad::Mode::Train);
  store.zero_grad();
  ad::backward(g, ev, loss, store);
  for (const auto& [name, e] : store) {
    if (!e.trainable || name.find(".fc") != std::string::npos && name.ends_with(".b")) continue;
    double mx = 0;
    for (double x : e.grad.values) mx = std::max(mx, std::abs(x));
    CHECK_MESSAGE(mx > 1e-8, name);
  }
  store.zero_grad();
  const auto report = ad::grad_check(g, store, in, loss, 1e-5);
  CHECK(report.passed);
}

TEST_CASE("jscc encoder contract") {
  ad::ParamStore store;
  Rng rng(2);
  const auto spec = MLPSpec::hidden({4, 12, 8, 6}, 0.01);
  init_mlp(store, "jenc1", spec, rng);
  init_mlp_af(store, "jenca", spec, {1, 5}, rng);
  perturb_running_stats(store, rng);
  const auto v = random_vec(4, rng);
  const auto x = jscc_encode(store, "jenc1", spec, Variant::Plain, v);
  CHECK(x.size() == 6);
  CHECK(jscc_encode(store, "jenc1", spec, Variant::Plain, v, -6.0) == x);
  CHECK(jscc_encode(store, "jenc1", spec, Variant::Plain, v, 12.0) == x);
  const auto lo = jscc_encode(store, "jenca", spec, Variant::SnrAware, v, -6.0);
  const auto hi = jscc_encode(store, "jenca", spec, Variant::SnrAware, v, 12.0);
  CHECK(lo.size() == 6);
  CHECK(lo != hi);
  CHECK_THROWS_AS(jscc_encode(store, "jenca", spec, Variant::SnrAware, v), ValidationError);
}

TEST_CASE("jscc decoder contract") {
  ad::ParamStore store;
  Rng rng(3);
  const auto spec = MLPSpec::hidden({8, 10, 9, 4}, 0.01);
  init_mlp(store, "jdec1", spec, rng);
  init_mlp(store, "jdec2", spec, rng);
  init_mlp_af(store, "jdecf", spec, {4, 5}, rng);
  perturb_running_stats(store, rng);
  const auto y = random_vec(8, rng);
  const auto a = jscc_decode(store, "jdec1", spec, Variant::Plain, 0, y);
  const auto b = jscc_decode(store, "jdec2", spec, Variant::Plain, 0, y);
  CHECK(a.size() == 4);
  CHECK(a != b);
  const std::vector<double> ones{1, 0, 1, 0}, twos{2, 0, 2, 0};
  const auto f1 = jscc_decode(store, "jdecf", spec, Variant::FadingAware, 4, y, ones);
  const auto f2 = jscc_decode(store, "jdecf", spec, Variant::FadingAware, 4, y, twos);
  CHECK(f1.size() == 4);
  CHECK(f1 != f2);
  const std::vector<double> wrong{1, 0};
  CHECK_THROWS_AS(jscc_decode(store, "jdecf", spec, Variant::FadingAware, 4, y, wrong), ShapeError);
}

TEST_CASE("attention feature module") {
  ad::ParamStore store;
  Rng rng(4);
  init_af(store, "af", 5, {2, 3}, rng);
  const auto f = random_vec(5, rng);
  const std::vector<double> csi{0.4, -1.2};

  ad::ParamStore zero = store;
  for (auto& [name, e] : zero) std::fill(e.value.values.begin(), e.value.values.end(), 0.0);
  const auto half = af_apply(zero, "af", f, csi);
  for (std::size_t i = 0; i < 5; ++i) CHECK(half[i] == doctest::Approx(0.5 * f[i]).epsilon(1e-15));

  const auto out = af_apply(store, "af", f, csi);
  REQUIRE(out.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(out[i]) < std::abs(f[i]));

  const std::vector<double> short_csi{0.4};
  CHECK_THROWS_AS(af_apply(store, "af", f, short_csi), ShapeError);

  ad::Graph g;
  const auto node = af_module(g, g.input("f", 5), g.input("csi", 2), "af");
  const auto loss = g.mse(node, g.input("t", 5));
  ad::TensorMap in{{"f", random_tensor(3, 5, rng)}, {"csi", random_tensor(3, 2, rng)},
                   {"t", random_tensor(3, 5, rng)}};
  const auto report = ad::grad_check(g, store, in, loss, 1e-5, 1e-6, {"f", "csi"});
  CHECK(report.passed);
  bool saw_csi = false;
  for (const auto& e : report.entries) {
    if (e.name == "input:csi") {
      saw_csi = true;
      CHECK(e.max_abs_grad > 0);
    }
  }
  CHECK(saw_csi);
}

TEST_CASE("classifier head") {
  ad::ParamStore store;
  Rng rng(5);
  init_linear(store, "cls", 4, 6, 1.0, rng);
  const auto v = random_vec(4, rng);
  const auto p = classify(store, "cls", v);
  double sum = 0;
  for (double x : p) {
    CHECK(x >= 0);
    sum += x;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);

  // logits = v W + b, computed directly
  const auto& w = store.at("cls.w").value;
  std::vector<double> logits(6, 0.0);
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t i = 0; i < 4; ++i) logits[j] += v[i] * w.at(i, j);
  }
  const auto arg = [](const std::vector<double>& x) { return std::max_element(x.begin(), x.end()) - x.begin(); };
  CHECK(arg(p) == arg(logits));

  ad::ParamStore shifted = store;
  for (double& b : shifted.at("cls.b").value.values) b += 3.7;
  const auto ps = classify(shifted, "cls", v);
  for (std::size_t j = 0; j < 6; ++j) CHECK(ps[j] == doctest::Approx(p[j]).epsilon(1e-12));

  ad::ParamStore zero = store;
  for (auto& [name, e] : zero) std::fill(e.value.values.begin(), e.value.values.end(), 0.0);
  for (double x : classify(zero, "cls", v)) CHECK(x == doctest::Approx(1.0 / 6).epsilon(1e-15));
  const std::vector<double> bad(3, 0.0);
  CHECK_THROWS_AS(classify(store, "cls", bad), ShapeError);
}

TEST_CASE("view pooling") {
  const std::vector<double> a{1, 2}, b{3, 4};
  CHECK(view_pool(a, b) == std::vector<double>{1, 2, 3, 4});
  CHECK(view_pool(a, b).size() == 4);
  CHECK(view_pool(a, b) != view_pool(b, a));
  const std::vector<double> c{1};
  CHECK_THROWS_AS(view_pool(a, c), ShapeError);
}

TEST_CASE("mlp spec validation") {
  MLPSpec s;
  s.widths = {3};
  CHECK_THROWS_AS(s.validate(), ValidationError);
  auto h = MLPSpec::hidden({3, 4, 2}, 0.01);
  CHECK_NOTHROW(h.validate());
  CHECK(h.batch_norm == std::vector<bool>{true, false});
  h.widths[1] = 0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
}

TEST_CASE("composed architectures pass gradient checks") {
  using model::Scheme;
  struct Case {
    Scheme scheme;
    Variant variant;
    bool both = true;
  };
  const std::vector<Case> cases{{Scheme::Single, Variant::Plain},      {Scheme::Oma, Variant::Plain},
                                {Scheme::Noma, Variant::Plain},        {Scheme::Single, Variant::SnrAware},
                                {Scheme::Oma, Variant::SnrAware},      {Scheme::Noma, Variant::SnrAware},
                                {Scheme::Single, Variant::FadingAware}, {Scheme::Oma, Variant::FadingAware},
                                {Scheme::Oma, Variant::FadingAware, false}, {Scheme::Noma, Variant::FadingAware}};
  for (const auto& c : cases) {
    auto spec = tiny(c.scheme, c.variant);
    spec.decoder_both_gains = c.both;
    ad::ParamStore store;
    model::init_front(store, spec, 9);
    model::init_jscc(store, spec, 9);
    const auto g = model::build_jscc(spec, {false, 0.3});
    Rng rng(17);
    const std::size_t b = 4;
    ad::TensorMap in{{"s1", random_tensor(b, 6, rng)}, {"labels", Tensor::matrix(b, 1, {0, 2, 1, 2})}};
    if (spec.devices() == 2) in["s2"] = random_tensor(b, 6, rng);
    in["noise"] = channel::noise_rows(b, spec.q_total, 0.2, rng);
    std::vector<channel::Complex> h1, h2;
    for (std::size_t i = 0; i < b; ++i) {
      h1.push_back(channel::sample_fading(rng, 1.0));
      h2.push_back(channel::sample_fading(rng, 1.0));
    }
    in["h1"] = channel::gain_rows(h1);
    if (spec.devices() == 2) in["h2"] = channel::gain_rows(h2);
    const std::size_t k = spec.decoder_csi_width();
    if (c.variant == Variant::SnrAware) in["csi_enc"] = random_tensor(b, 1, rng);
    if (k > 0) {
      in["csi_dec1"] = random_tensor(b, k, rng);
      if (spec.devices() == 2) in["csi_dec2"] = random_tensor(b, k, rng);
    }
    const auto report = ad::grad_check(g, store, in, g.require_output("loss"), 1e-5);
    INFO(model::to_string(c.scheme), " ", to_string(c.variant), " worst ", report.worst);
    CHECK(report.passed);
    // pre-BN biases have zero true gradient; the larger floor absorbs difference round-off
    const auto report2 = ad::grad_check(g, store, in, g.require_output("loss_jscc"), 1e-5, 1e-6, {}, 1e-3);
    for (const auto& e : report2.entries) {
      if (!e.passed) MESSAGE(e.name, " ", e.max_rel_error, " ", e.max_abs_grad);
    }
    CHECK(report2.passed);
  }
}

TEST_CASE("digital graph gradients, including the entropy scale") {
  auto spec = tiny(model::Scheme::Digital, Variant::Plain);
  ad::ParamStore store;
  model::init_front(store, spec, 3);
  model::init_entropy(store, spec);
  Rng rng(8);
  for (double& v : store.at("ent.scale").value.values) v = 0.5 + rng.uniform();
  for (double& v : store.at("ent.mean").value.values) v = 0.3 * rng.normal();
  const auto g = model::build_digital(spec, 0.05);
  ad::TensorMap in{{"s1", random_tensor(4, 6, rng)}, {"s2", random_tensor(4, 6, rng)},
                   {"labels", Tensor::matrix(4, 1, {0, 1, 2, 0})}};
  for (const char* u : {"u1", "u2"}) {
    Tensor t({4, 4});
    for (double& v : t.values) v = rng.uniform(-0.5, 0.5);
    in[u] = t;
  }
  const auto report = ad::grad_check(g, store, in, g.require_output("loss"), 1e-5);
  CHECK(report.passed);
  bool saw = false;
  for (const auto& e : report.entries) {
    if (e.name == "ent.scale") {
      saw = true;
      CHECK(e.max_rel_error < 1e-5);
      CHECK(e.max_abs_grad > 0);
    }
  }
  CHECK(saw);
}

TEST_CASE("system layout and shapes") {
  using model::Scheme;
  auto spec = tiny(Scheme::Oma, Variant::Plain);
  CHECK(spec.symbols_per_device() == 2);
  CHECK(spec.encoder_spec().out_width() == 4);
  CHECK(spec.decoder_spec().in_width() == 8);
  spec.scheme = Scheme::Noma;
  CHECK(spec.symbols_per_device() == 4);
  spec.scheme = Scheme::Single;
  CHECK(spec.symbols_per_device() == 4);
  CHECK(spec.main_width() == 4);
  spec.scheme = Scheme::Oma;
  spec.q_total = 5;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  CHECK(model::parse_scheme("noma") == Scheme::Noma);
  CHECK_THROWS_AS(model::parse_scheme("tdma"), ValidationError);

  // plain and CSI-aware variants share input/output shapes
  for (Variant v : {Variant::Plain, Variant::SnrAware, Variant::FadingAware}) {
    auto s = tiny(Scheme::Noma, v);
    ad::ParamStore store;
    model::init_front(store, s, 1);
    model::init_jscc(store, s, 1);
    const auto tx = model::build_transmitter(s);
    Rng rng(2);
    ad::TensorMap in{{"s1", random_tensor(3, 6, rng)}, {"s2", random_tensor(3, 6, rng)}};
    if (v == Variant::SnrAware) in["csi_enc"] = Tensor({3, 1}, 0.3);
    const auto ev = ad::eval_graph(tx, store, in, ad::Mode::Infer);
    CHECK(ev.value(tx.require_output("x1")).shape == std::vector<std::size_t>{3, 8});
    const auto rx = model::build_receiver(s);
    ad::TensorMap rin{{"y", random_tensor(3, 8, rng)}};
    if (v != Variant::Plain) {
      rin["csi_dec1"] = Tensor({3, s.decoder_csi_width()}, 0.5);
      rin["csi_dec2"] = Tensor({3, s.decoder_csi_width()}, 0.5);
    }
    const auto rev = ad::eval_graph(rx, store, rin, ad::Mode::Infer);
    CHECK(rev.value(rx.require_output("pooled")).shape == std::vector<std::size_t>{3, 8});
  }
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "semcom_test_ckpt";
  fs::remove_all(dir);
  auto spec = tiny(model::Scheme::Noma, Variant::SnrAware);
  Checkpoint c;
  c.spec = spec;
  c.seed = 42;
  c.stage = Stage::T2;
  model::init_front(c.store, spec, 42);
  model::init_jscc(c.store, spec, 42);
  Rng rng(1);
  perturb_running_stats(c.store, rng);
  save_checkpoint(c, dir);
  const auto back = load_checkpoint(dir);
  CHECK(back.store.values_equal(c.store));
  CHECK(back.seed == 42);
  CHECK(back.stage == Stage::T2);
  CHECK(spec_to_json(back.spec) == spec_to_json(spec));
  for (const auto& name : c.store.names()) CHECK(back.store.at(name).trainable == c.store.at(name).trainable);

  // byte lengths in the manifest match the arrays
  const auto m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  std::vector<std::string> order;
  for (const auto& p : m["params"]) {
    std::size_t n = 1;
    for (std::size_t d : p["shape"].get<std::vector<std::size_t>>()) n *= d;
    CHECK(fs::file_size(dir / p["file"].get<std::string>()) == 8 * n);
    order.push_back(p["name"]);
  }
  CHECK(std::is_sorted(order.begin(), order.end()));

  // a flipped byte is caught by the checksum
  const fs::path victim = dir / "jdec1.fc0.w.f64";
  auto bytes = io::read_bytes(victim);
  bytes[3] ^= 0x10;
  io::write_bytes_atomic(victim, bytes);
  CHECK_THROWS_AS(load_checkpoint(dir), FormatError);

  auto bad = m;
  bad["version"] = 99;
  io::write_text_atomic(dir / "manifest.json", bad.dump());
  CHECK_THROWS_AS(load_checkpoint(dir), FormatError);
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_checkpoint(dir), FormatError);
}
