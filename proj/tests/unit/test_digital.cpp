#include <cmath>
#include <complex>
#include <map>

#include "doctest.h"
#include "semcom/channel.hpp"
#include "semcom/digital.hpp"
#include "semcom/error.hpp"
#include "semcom/gaussian.hpp"

using namespace semcom;
using namespace semcom::digital;

namespace {

// Gaussian CDF written directly from erf, independent of the library helper.
double phi(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

EntropyModel unit_model(std::size_t r) { return {std::vector<double>(r, 0.0), std::vector<double>(r, 1.0)}; }

}  // namespace

TEST_CASE("uniform-noise surrogate") {
  Rng rng(3);
  std::vector<double> v{-3.2, 0.0, 0.49, 7.5};
  for (int t = 0; t < 1000; ++t) {
    const auto q = quantize_train(v, rng);
    for (std::size_t j = 0; j < v.size(); ++j) {
      CHECK(q[j] >= v[j] - 0.5);
      CHECK(q[j] <= v[j] + 0.5);
    }
  }
  const std::vector<double> zero(1000, 0.0);
  double sum = 0;
  for (int t = 0; t < 1000; ++t) {
    for (double x : quantize_train(zero, rng)) sum += x;
  }
  const double mean = sum / 1e6;
  CHECK(mean > -0.002);
  CHECK(mean < 0.002);

  Rng a(9), b(9);
  CHECK(quantize_train(v, a) == quantize_train(v, b));
}

TEST_CASE("rounding") {
  const std::vector<double> v{0.4, -1.6};
  CHECK(quantize_infer(v).values == std::vector<std::int64_t>{0, -2});
  const std::vector<double> up{2.5}, down{-2.5};
  CHECK(quantize_infer(up).values == std::vector<std::int64_t>{3});
  CHECK(quantize_infer(down).values == std::vector<std::int64_t>{-3});
  Rng rng(1);
  std::vector<double> w(200);
  for (double& x : w) x = 10 * rng.normal();
  const auto once = quantize_infer(w);
  CHECK(quantize_infer(once.as_real()).values == once.values);
  const std::vector<double> bad{std::nan("")};
  CHECK_THROWS_AS(quantize_infer(bad), NumericError);
}

TEST_CASE("code length against the erf oracle") {
  QuantizedFeatures z{{0}};
  const double expect = -std::log2(phi(0.5) - phi(-0.5));
  CHECK(std::abs(code_length_bits(z, unit_model(1)) - expect) < 1e-9);
  CHECK(std::abs(expect - 1.3848665342909896) < 1e-12);

  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const double mu = rng.normal(0, 3), sigma = 0.2 + 4 * rng.uniform();
    const double v = std::round(mu + sigma * rng.normal());
    const double oracle = -std::log2(phi((v - mu + 0.5) / sigma) - phi((v - mu - 0.5) / sigma));
    CHECK(std::abs(coordinate_bits(v, mu, sigma) - oracle) < 1e-9);
    // translation invariance
    CHECK(std::abs(coordinate_bits(v + 7, mu + 7, sigma) - coordinate_bits(v, mu, sigma)) < 1e-9);
  }
  // far tail clamps at 64 bits
  CHECK(coordinate_bits(1000, 0, 1) == doctest::Approx(64.0));
  CHECK(coordinate_bits(0, 0, 0.0) >= 0.0);
  QuantizedFeatures two{{0, 0}};
  CHECK_THROWS_AS(code_length_bits(two, unit_model(1)), ShapeError);
}

TEST_CASE("discretized mass sums to one") {
  for (double sigma : {0.3, 1.0, 2.7, 11.0}) {
    for (double mu : {0.0, 0.25, -3.6}) {
      const long lo = static_cast<long>(std::floor(mu - 12 * sigma)) - 1;
      const long hi = static_cast<long>(std::ceil(mu + 12 * sigma)) + 1;
      double total = 0;
      for (long k = lo; k <= hi; ++k) total += discretized_gaussian_mass(k, mu, sigma);
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("cross-entropy bound") {
  Rng rng(12);
  const double mu = 0.3, sigma = 1.7;
  std::map<std::int64_t, int> counts;
  double coded = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> x{mu + sigma * rng.normal()};
    const auto q = quantize_infer(x);
    ++counts[q.values[0]];
    // a mismatched model
    coded += code_length_bits(q, {{-0.4}, {1.1}});
  }
  double entropy = 0;
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log2(p);
  }
  CHECK(coded / n >= entropy);
}

TEST_CASE("equal-rate MAC capacity") {
  const auto b = mac_equal_rate_capacity(32, 1.0, 1.0);
  CHECK(b.r1 == doctest::Approx(16 * std::log2(3.0)).epsilon(1e-12));
  CHECK(b.r1 == doctest::Approx(25.3594).epsilon(1e-5));
  CHECK(b.r2 == b.r1);
  CHECK(b.sum == doctest::Approx(2 * b.r1));

  const auto weak = mac_equal_rate_capacity(32, 1.0, 1e12);
  CHECK(weak.r1 < 1e-9);

  const auto dead = mac_equal_rate_capacity(32, 1.0, 1.0, {0, 0}, {1, 0});
  CHECK(dead.r1 == 0.0);
  CHECK(dead.r2 > 0.0);
  QuantizedFeatures z{{0}}, big{{40}};
  CHECK(digital_transmit(big, z, dead, unit_model(1)).outage);

  // the per-user single-link bound binds when one gain is weak
  const std::complex<double> h1{0.1, 0}, h2{2, 0};
  const auto asym = mac_equal_rate_capacity(8, 1.0, 1.0, h1, h2);
  CHECK(asym.r1 == doctest::Approx(8 * std::log2(1.01)));
  CHECK(asym.r2 == doctest::Approx(4 * std::log2(1 + 0.01 + 4)));

  const auto clean = mac_equal_rate_capacity(8, 1.0, 0.0);
  CHECK(std::isinf(clean.r1));
  CHECK_THROWS_AS(mac_equal_rate_capacity(0, 1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(mac_equal_rate_capacity(8, 0.0, 1.0), ValidationError);
}

TEST_CASE("delivery and outage") {
  const auto model = unit_model(3);
  QuantizedFeatures a{{0, 1, -1}}, b{{2, 0, 0}};
  const double ba = code_length_bits(a, model), bb = code_length_bits(b, model);
  RateBudget cap;
  cap.r1 = ba;
  cap.r2 = bb;
  auto d = digital_transmit(a, b, cap, model);
  CHECK_FALSE(d.outage);
  CHECK(d.v1.values == a.values);
  CHECK(d.v2.values == b.values);
  cap.r2 = bb - 1e-9;
  d = digital_transmit(a, b, cap, model);
  CHECK(d.outage);
  CHECK(d.v1.values.empty());

  // zero-length codes are always feasible
  QuantizedFeatures empty;
  CHECK_FALSE(digital_transmit(empty, empty, RateBudget{}, EntropyModel{}).outage);
}

TEST_CASE("fading outage frequency matches the capacity condition") {
  const std::size_t q = 16;
  const double sigma2 = channel::snr_to_sigma2(3.0);
  const auto model = unit_model(4);
  QuantizedFeatures a{{1, -2, 0, 3}}, b{{0, 0, 1, -1}};
  const double need1 = code_length_bits(a, model), need2 = code_length_bits(b, model);
  Rng rng(77);
  const int tasks = 100000;
  int hits = 0, oracle_hits = 0;
  for (int t = 0; t < tasks; ++t) {
    const auto h1 = channel::sample_fading(rng, 1.0);
    const auto h2 = channel::sample_fading(rng, 1.0);
    const auto d = digital_transmit(a, b, mac_equal_rate_capacity(q, 1.0, sigma2, h1, h2), model);
    hits += d.outage;
    const double g1 = std::norm(h1) / sigma2, g2 = std::norm(h2) / sigma2;
    const double half = q / 2.0 * std::log2(1 + g1 + g2);
    const double r1 = std::min(half, q * std::log2(1 + g1));
    const double r2 = std::min(half, q * std::log2(1 + g2));
    const bool out = need1 > r1 || need2 > r2;
    oracle_hits += out;
    CHECK(d.outage == out);
  }
  const double rate = static_cast<double>(hits) / tasks;
  CHECK(rate == doctest::Approx(static_cast<double>(oracle_hits) / tasks));
  CHECK(rate > 0.01);
  CHECK(rate < 0.99);
}
