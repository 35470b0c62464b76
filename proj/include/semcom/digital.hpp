#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "semcom/ad.hpp"
#include "semcom/rng.hpp"

namespace semcom::digital {

struct QuantizedFeatures {
  std::vector<std::int64_t> values;
  std::vector<double> as_real() const { return {values.begin(), values.end()}; }
};

// Per-dimension discretized Gaussian; scales are clamped to >= 1e-6 when used.
struct EntropyModel {
  std::vector<double> mean;
  std::vector<double> scale;

  static EntropyModel from_store(const ad::ParamStore& store);
};

// Capacity bounds per user and the realized code lengths, in bits.
struct RateBudget {
  double b1 = 0;
  double b2 = 0;
  double r1 = 0;
  double r2 = 0;
  double sum = 0;
};

// v + U(-1/2, 1/2) per coordinate.
std::vector<double> quantize_train(std::span<const double> v, Rng& rng);
// Round half away from zero.
QuantizedFeatures quantize_infer(std::span<const double> v);

// -log2 of the discretized-Gaussian mass of one coordinate, clamped at 2^-64.
double coordinate_bits(double value, double mean, double scale);
double code_length_bits(const QuantizedFeatures& q, const EntropyModel& model);

// Equal-rate MAC bound per user over q channel uses, per-user power P.
// sigma2 == 0 is a noiseless channel with unbounded rates.
RateBudget mac_equal_rate_capacity(std::size_t q, double power, double sigma2,
                                   std::complex<double> h1 = {1, 0},
                                   std::complex<double> h2 = {1, 0});

struct Delivery {
  bool outage = false;
  RateBudget budget;
  QuantizedFeatures v1;
  QuantizedFeatures v2;
};

// Delivers both integer vectors exactly when b_i <= R_i for both users.
Delivery digital_transmit(const QuantizedFeatures& v1, const QuantizedFeatures& v2,
                          const RateBudget& capacity, const EntropyModel& model);

}  // namespace semcom::digital
