#pragma once

#include <cstdint>
#include <random>

namespace semcom {

// Independent consumers of randomness. Each gets its own stream derived from the
// experiment seed so that adding draws in one consumer never shifts another.
enum class Stream : std::uint64_t {
  Dataset = 0x6461746173657431ULL,
  Init = 0x696e697469616c31ULL,
  Channel = 0x6368616e6e656c31ULL,
  Quantizer = 0x7175616e74697a31ULL,
  Shuffle = 0x73687566666c6531ULL,
  Eval = 0x6576616c75617431ULL,
  TrainSnr = 0x736e727472616931ULL,
};

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic generator with platform-independent uniform and normal draws
// (the std distributions are not bit-stable across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, Stream purpose, std::uint64_t index = 0);

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::uint64_t next_u64() { return engine_(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace semcom
