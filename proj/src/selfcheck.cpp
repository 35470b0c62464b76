#include "semcom/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "semcom/ad.hpp"
#include "semcom/channel.hpp"
#include "semcom/digital.hpp"
#include "semcom/model.hpp"
#include "semcom/retrieval.hpp"
#include "semcom/rng.hpp"

namespace semcom::selfcheck {

namespace {

using ad::Graph;
using ad::ParamStore;

constexpr double kGradTol = 1e-5;

Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double offset = 0.0, double scale = 1.0) {
  Tensor t({rows, cols});
  for (double& v : t.values) v = offset + scale * rng.normal();
  return t;
}

Tensor random_vector(Rng& rng, std::size_t n, double offset = 0.0, double scale = 1.0) {
  Tensor t({n});
  for (double& v : t.values) v = offset + scale * rng.normal();
  return t;
}

Tensor labels_for(Rng& rng, std::size_t batch, std::size_t classes) {
  Tensor t({batch, 1});
  for (double& v : t.values) v = static_cast<double>(rng.below(classes));
  return t;
}

CheckResult grad_result(const std::string& name, const ad::GradCheckReport& r, double tol) {
  return {name, r.worst, tol, r.passed};
}

std::vector<CheckResult> primitive_checks() {
  std::vector<CheckResult> out;
  Rng rng(11);
  {
    Graph g;
    auto y = g.bias_add(g.matmul(g.input("x", 4), g.param("w")), g.param("b"));
    auto loss = g.mse(g.leaky_relu(y, 0.2), g.input("t", 3));
    ParamStore s;
    s.add("w", random_matrix(rng, 4, 3));
    s.add("b", random_vector(rng, 3));
    auto r = ad::grad_check(g, s, {{"x", random_matrix(rng, 5, 4)}, {"t", random_matrix(rng, 5, 3)}}, loss,
                            kGradTol, 1e-6, {"x"});
    out.push_back(grad_result("grad: matmul, bias_add, leaky_relu, mse", r, kGradTol));
  }
  {
    Graph g;
    auto y = g.batch_norm(g.matmul(g.input("x", 5), g.param("w")), g.param("gamma"), g.param("beta"), "rm", "rv");
    auto loss = g.mse(g.sigmoid(y), g.input("t", 5));
    ParamStore s;
    s.add("w", random_matrix(rng, 5, 5));
    s.add("gamma", random_vector(rng, 5, 1.0, 0.2));
    s.add("beta", random_vector(rng, 5));
    s.add("rm", Tensor({5}, 0.0), false);
    s.add("rv", Tensor({5}, 1.0), false);
    auto r = ad::grad_check(g, s, {{"x", random_matrix(rng, 8, 5)}, {"t", random_matrix(rng, 8, 5)}}, loss,
                            kGradTol, 1e-6, {"x"});
    out.push_back(grad_result("grad: batch_norm, sigmoid", r, kGradTol));
  }
  {
    Graph g;
    auto a = g.input("a", 3);
    auto b = g.input("b", 3);
    auto c = g.concat({a, b, g.relu(a)});
    auto sl = g.slice(c, 1, 7);
    auto m = g.mul(sl, g.leaky_relu(sl, 0.2));
    auto z = g.add(g.scale(m, -1.5), sl);
    auto p = g.power_normalize(z, 0.5);
    auto loss = g.mse(p, g.input("t", 6));
    ParamStore s;
    auto r = ad::grad_check(g, s,
                            {{"a", random_matrix(rng, 4, 3)}, {"b", random_matrix(rng, 4, 3)},
                             {"t", random_matrix(rng, 4, 6)}},
                            loss, kGradTol, 1e-6, {"a", "b"});
    out.push_back(grad_result("grad: concat, slice, mul, relu, add, scale, power_normalize", r, kGradTol));
  }
  {
    Graph g;
    auto y = g.complex_gain(g.input("x", 4), g.input("h", 2));
    auto other = g.input("o", 4);
    auto ce = g.softmax_cross_entropy(g.matmul(y, g.param("w")), g.input("labels", 1));
    auto cos2 = g.cosine_squared(y, other);
    auto bits = g.gaussian_code_length(g.uniform_noise_add(y, g.input("u", 4)), g.param("mu"), g.param("sigma"));
    auto sm = g.mse(g.softmax(y), other);
    auto loss = g.weighted_sum({ce, cos2, bits, sm}, {1.0, 0.7, 0.05, 0.3});
    ParamStore s;
    s.add("w", random_matrix(rng, 4, 3));
    s.add("mu", random_vector(rng, 4, 0.0, 0.3));
    s.add("sigma", random_vector(rng, 4, 1.5, 0.2));
    Tensor u({5, 4});
    for (double& v : u.values) v = rng.uniform(-0.5, 0.5);
    auto r = ad::grad_check(g, s,
                            {{"x", random_matrix(rng, 5, 4)},
                             {"h", random_matrix(rng, 5, 2)},
                             {"o", random_matrix(rng, 5, 4)},
                             {"labels", labels_for(rng, 5, 3)},
                             {"u", u}},
                            loss, kGradTol, 1e-6, {"x", "h", "o"});
    out.push_back(grad_result(
        "grad: complex_gain, softmax, cross_entropy, cosine_squared, uniform_noise, code_length, weighted_sum", r,
        kGradTol));
  }
  return out;
}

model::SystemSpec tiny_spec(model::Scheme scheme, nets::Variant variant) {
  model::SystemSpec s;
  s.scheme = scheme;
  s.variant = variant;
  s.dims.p = 6;
  s.dims.r = 4;
  s.dims.classes = 3;
  s.dims.feature_hidden = {5};
  s.dims.encoder_hidden = {6};
  s.dims.decoder_hidden = {7, 5};
  s.dims.af_hidden = 3;
  s.q_total = 4;
  s.power = scheme == model::Scheme::Noma ? 0.5 : 1.0;
  return s;
}

std::vector<CheckResult> architecture_checks(bool inject_fault) {
  using model::Scheme;
  using nets::Variant;
  std::vector<CheckResult> out;
  for (Variant v : {Variant::Plain, Variant::SnrAware, Variant::FadingAware}) {
    for (Scheme sc : {Scheme::Single, Scheme::Oma, Scheme::Noma}) {
      const auto spec = tiny_spec(sc, v);
      ParamStore store;
      model::init_front(store, spec, 5);
      model::init_jscc(store, spec, 5);
      auto g = model::build_jscc(spec, {false, 0.3});
      if (inject_fault) g.inject_adjoint_fault(g.require_output("vhat1"));
      Rng rng(29);
      const std::size_t b = 4;
      ad::TensorMap in{{"s1", random_matrix(rng, b, 6)}, {"labels", labels_for(rng, b, 3)}};
      if (spec.devices() == 2) in["s2"] = random_matrix(rng, b, 6);
      in["noise"] = channel::noise_rows(b, spec.q_total, 0.2, rng);
      std::vector<channel::Complex> h1, h2;
      for (std::size_t i = 0; i < b; ++i) {
        h1.push_back(channel::sample_fading(rng, 1.0));
        h2.push_back(channel::sample_fading(rng, 1.0));
      }
      in["h1"] = channel::gain_rows(h1);
      if (spec.devices() == 2) in["h2"] = channel::gain_rows(h2);
      if (v == Variant::SnrAware) in["csi_enc"] = random_matrix(rng, b, 1);
      if (const std::size_t k = spec.decoder_csi_width(); k > 0) {
        in["csi_dec1"] = random_matrix(rng, b, k);
        if (spec.devices() == 2) in["csi_dec2"] = random_matrix(rng, b, k);
      }
      const auto r = ad::grad_check(g, store, in, g.require_output("loss"), kGradTol);
      out.push_back(grad_result("grad: " + nets::to_string(v) + " " + model::to_string(sc) +
                                    " encoder+channel+decoder",
                                r, kGradTol));
    }
  }
  {
    const auto spec = tiny_spec(Scheme::Digital, Variant::Plain);
    ParamStore store;
    model::init_front(store, spec, 3);
    model::init_entropy(store, spec);
    Rng rng(8);
    for (double& x : store.at("ent.scale").value.values) x = 0.5 + rng.uniform();
    const auto g = model::build_digital(spec, 0.05);
    ad::TensorMap in{{"s1", random_matrix(rng, 4, 6)}, {"s2", random_matrix(rng, 4, 6)},
                     {"labels", labels_for(rng, 4, 3)}};
    for (const char* u : {"u1", "u2"}) {
      Tensor t({4, 4});
      for (double& x : t.values) x = rng.uniform(-0.5, 0.5);
      in[u] = t;
    }
    const auto r = ad::grad_check(g, store, in, g.require_output("loss"), kGradTol);
    out.push_back(grad_result("grad: digital surrogate with entropy model", r, kGradTol));
  }
  return out;
}

CheckResult negative_control() {
  Rng rng(5);
  Graph g;
  auto y = g.sigmoid(g.matmul(g.input("x", 3), g.param("w")));
  auto loss = g.mse(y, g.input("t", 2));
  g.inject_adjoint_fault(y);
  ParamStore s;
  s.add("w", random_matrix(rng, 3, 2));
  const auto r = ad::grad_check(g, s, {{"x", random_matrix(rng, 4, 3)}, {"t", random_matrix(rng, 4, 2)}}, loss,
                                kGradTol);
  // Passes when the fault is detected.
  return {"negative control: injected adjoint fault is detected", r.worst, kGradTol, !r.passed};
}

std::vector<CheckResult> channel_checks(std::size_t n) {
  std::vector<CheckResult> out;
  Rng rng(7, Stream::Channel);
  double worst = 0;
  for (double snr : {-6.0, 0.0, 7.5, 15.0}) {
    std::vector<double> raw(2 * n);
    for (double& x : raw) x = rng.normal();
    const auto x = channel::power_normalize(raw, 1.0);
    const auto z = channel::complex_noise(n, channel::snr_to_sigma2(snr), rng);
    worst = std::max(worst, std::abs(channel::measured_snr_db(x.reals, z) - snr));
  }
  out.push_back({"channel: measured AWGN SNR (dB)", worst, 0.1, worst < 0.1});

  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::norm(channel::sample_fading(rng, 2.0));
  const double rel = std::abs(acc / n / 2.0 - 1.0);
  out.push_back({"channel: fading E|h|^2 relative error", rel, 0.01, rel < 0.01});

  double pw = 0;
  for (double power : {0.5, 1.0}) {
    for (std::size_t len : {2, 64, 256}) {
      std::vector<double> raw(len);
      for (double& x : raw) x = 3.0 * rng.normal() + 1.0;
      pw = std::max(pw, std::abs(channel::power_normalize(raw, power).average_power() - power));
    }
  }
  out.push_back({"channel: power after normalization", pw, 1e-9, pw < 1e-9});
  return out;
}

std::vector<CheckResult> closed_form_checks() {
  std::vector<CheckResult> out;
  const auto b = digital::mac_equal_rate_capacity(32, 1.0, 1.0);
  const double cap_err = std::abs(b.r1 - 16.0 * std::log2(3.0));
  out.push_back({"capacity: q=32, 0 dB equal-rate bound", cap_err, 1e-9, cap_err < 1e-9});

  const auto phi = [](double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); };
  Rng rng(4);
  double code_err = 0;
  for (int t = 0; t < 200; ++t) {
    const double mu = 3 * rng.normal(), sigma = 0.2 + 4 * rng.uniform();
    const double v = std::round(mu + sigma * rng.normal());
    const double oracle = -std::log2(phi((v - mu + 0.5) / sigma) - phi((v - mu - 0.5) / sigma));
    code_err = std::max(code_err, std::abs(digital::coordinate_bits(v, mu, sigma) - oracle));
  }
  out.push_back({"code length vs erf oracle (bits)", code_err, 1e-9, code_err < 1e-9});
  return out;
}

CheckResult retrieval_check() {
  Rng rng(21);
  int mismatches = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng.below(30), w = 1 + rng.below(8);
    Tensor feats({n, w});
    std::vector<int> labels(n);
    for (double& x : feats.values) x = std::round(rng.normal() * 4) / 4;
    for (int& l : labels) l = static_cast<int>(rng.below(5));
    const retrieval::GalleryIndex g(feats, labels);
    std::vector<double> q(w);
    for (double& x : q) x = std::round(rng.normal() * 4) / 4;
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0;
      for (std::size_t j = 0; j < w; ++j) d += (q[j] - feats.at(i, j)) * (q[j] - feats.at(i, j));
      all.emplace_back(d, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect;
    for (const auto& [d, i] : all) expect.push_back(i);
    mismatches += retrieval::rank_query(q, g) != expect;
    mismatches += retrieval::nearest(q, g) != expect.front();
  }
  return {"retrieval: ranking vs brute force, 100 instances (mismatches)", static_cast<double>(mismatches), 0,
          mismatches == 0};
}

}  // namespace

std::vector<CheckResult> run(const Options& options) {
  std::vector<CheckResult> out = primitive_checks();
  for (auto& c : architecture_checks(options.inject_fault)) out.push_back(c);
  out.push_back(negative_control());
  for (auto& c : channel_checks(options.channel_symbols)) out.push_back(c);
  for (auto& c : closed_form_checks()) out.push_back(c);
  out.push_back(retrieval_check());
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& c) { return c.passed; });
}

std::string report(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  for (const auto& c : results) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  max_error=" << c.max_error << " tol=" << c.tolerance
       << "\n";
  }
  return os.str();
}

}  // namespace semcom::selfcheck
