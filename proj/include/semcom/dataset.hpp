#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom::data {

inline constexpr int kDatasetVersion = 1;

struct SyntheticConfig {
  std::size_t p = 64;
  std::size_t d = 16;
  std::size_t n_train_ids = 100;
  std::size_t n_test_ids = 50;
  // Observations per identity per view; test identities split them evenly
  // between query and gallery pairs.
  std::size_t obs_per_view = 4;
  double sigma_obs = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SyntheticConfig&) const = default;
};

// Row-major [n, p] views plus one label per row.
struct PairSet {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<float> s1;
  std::vector<float> s2;
  std::vector<float> labels;

  int label(std::size_t i) const { return static_cast<int>(labels[i]); }
  Tensor view(int which) const;
  Tensor view_rows(int which, const std::vector<std::size_t>& rows) const;
  Tensor label_rows(const std::vector<std::size_t>& rows) const;
  bool operator==(const PairSet&) const = default;
};

struct Dataset {
  SyntheticConfig config;
  // [p, d] camera maps.
  std::vector<float> camera1;
  std::vector<float> camera2;
  // [ids, d] identity latents: train ids first, then test ids.
  std::vector<float> latents;
  PairSet train;
  PairSet query;
  PairSet gallery;

  bool operator==(const Dataset&) const = default;
};

// Train labels are 0..n_train_ids-1; test labels continue from n_train_ids.
Dataset generate(const SyntheticConfig& config);

void save(const Dataset& ds, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& dir);

}  // namespace semcom::data
