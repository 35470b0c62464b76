#include "semcom/digital.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semcom/error.hpp"
#include "semcom/gaussian.hpp"

namespace semcom::digital {

EntropyModel EntropyModel::from_store(const ad::ParamStore& store) {
  EntropyModel m;
  m.mean = store.at("ent.mean").value.values;
  m.scale = store.at("ent.scale").value.values;
  return m;
}

std::vector<double> quantize_train(std::span<const double> v, Rng& rng) {
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x += rng.uniform(-0.5, 0.5);
  return out;
}

QuantizedFeatures quantize_infer(std::span<const double> v) {
  QuantizedFeatures q;
  q.values.reserve(v.size());
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("cannot quantize a non-finite feature");
    q.values.push_back(static_cast<std::int64_t>(std::round(x)));
  }
  return q;
}

double coordinate_bits(double value, double mean, double scale) {
  const double p = discretized_gaussian_mass(value, mean, std::max(scale, kMinEntropyScale));
  return -std::log2(std::max(p, kMinCodeProbability));
}

double code_length_bits(const QuantizedFeatures& q, const EntropyModel& model) {
  if (q.values.size() != model.mean.size() || q.values.size() != model.scale.size()) {
    throw ShapeError("entropy model width differs from feature width");
  }
  double bits = 0;
  for (std::size_t j = 0; j < q.values.size(); ++j) {
    bits += coordinate_bits(static_cast<double>(q.values[j]), model.mean[j], model.scale[j]);
  }
  return bits;
}

RateBudget mac_equal_rate_capacity(std::size_t q, double power, double sigma2,
                                   std::complex<double> h1, std::complex<double> h2) {
  if (q < 1) throw ValidationError("capacity: q must be >= 1");
  if (!(power > 0)) throw ValidationError("capacity: power must be positive");
  if (sigma2 < 0) throw ValidationError("capacity: noise variance must be non-negative");
  RateBudget b;
  const double n = static_cast<double>(q);
  if (sigma2 == 0) {
    const double inf = std::numeric_limits<double>::infinity();
    b.r1 = std::norm(h1) > 0 ? inf : 0.0;
    b.r2 = std::norm(h2) > 0 ? inf : 0.0;
    b.sum = b.r1 + b.r2;
    return b;
  }
  const double g1 = std::norm(h1) * power / sigma2;
  const double g2 = std::norm(h2) * power / sigma2;
  b.sum = n * std::log2(1.0 + g1 + g2);
  const double half = b.sum / 2.0;
  b.r1 = std::min(half, n * std::log2(1.0 + g1));
  b.r2 = std::min(half, n * std::log2(1.0 + g2));
  return b;
}

Delivery digital_transmit(const QuantizedFeatures& v1, const QuantizedFeatures& v2,
                          const RateBudget& capacity, const EntropyModel& model) {
  Delivery d;
  d.budget = capacity;
  d.budget.b1 = code_length_bits(v1, model);
  d.budget.b2 = code_length_bits(v2, model);
  d.outage = d.budget.b1 > capacity.r1 || d.budget.b2 > capacity.r2;
  if (!d.outage) {
    d.v1 = v1;
    d.v2 = v2;
  }
  return d;
}

}  // namespace semcom::digital
