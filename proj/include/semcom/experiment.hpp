#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "semcom/checkpoint.hpp"
#include "semcom/config.hpp"
#include "semcom/dataset.hpp"
#include "semcom/evaluate.hpp"

namespace semcom::experiment {

enum class Axis { Snr, Bandwidth, LambdaCos, SnrMismatch };
std::string to_string(Axis a);
Axis parse_axis(const std::string& text);

struct ResultRow {
  model::Scheme scheme = model::Scheme::Noma;
  std::string channel;
  std::string csi_mode;
  // Number, "aware" for range-trained models, or "na" for the digital scheme.
  std::string snr_train_db;
  double snr_test_db = 0;
  std::size_t q_total = 0;
  double lambda_cos = 0;
  std::uint64_t seed = 0;
  double top1 = 0;
  double cos_sq = 0;
  double outage_rate = 0;
};

std::string csv_header();
std::string csv_line(const ResultRow& row);
std::string to_csv(const std::vector<ResultRow>& rows);
// Canonical row order: scheme, training SNR, bandwidth, lambda, test SNR, seed.
void sort_rows(std::vector<ResultRow>& rows);

// One trained JSCC model.
struct JsccKey {
  model::Scheme scheme = model::Scheme::Noma;
  nets::Variant variant = nets::Variant::Plain;
  std::size_t q_total = 64;
  // Empty: trained over the SNR range.
  std::optional<double> snr_train_db;
  double lambda_cos = 0;
  std::uint64_t seed = 1;

  std::string name() const;
  std::string snr_label() const;
};

// Trains (or loads) checkpoints on demand and memoizes them. Thread-safe;
// concurrent requests for the same key share one computation.
class Workspace {
 public:
  Workspace(config::ExperimentConfig cfg, data::Dataset data, std::filesystem::path cache_dir = {},
            bool allow_training = true);

  const config::ExperimentConfig& config() const { return cfg_; }
  const data::Dataset& data() const { return data_; }

  Checkpoint front(int devices, std::uint64_t seed);
  Checkpoint stage2(const JsccKey& key);
  Checkpoint stage3(const JsccKey& key);
  Checkpoint digital(double lambda_rate, std::uint64_t seed);

  eval::EvalChannel eval_channel(double snr_db) const;
  // Stage logs of every model trained in this workspace, keyed by model name.
  std::map<std::string, std::string> logs() const;

 private:
  Checkpoint memo(const std::string& key, const std::function<Checkpoint()>& make);

  config::ExperimentConfig cfg_;
  data::Dataset data_;
  std::filesystem::path cache_dir_;
  bool allow_training_;
  std::string fingerprint_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_future<Checkpoint>> done_;
  std::map<std::string, std::string> logs_;
};

// Rows of one axis for one seed.
std::vector<ResultRow> run_axis(Workspace& ws, Axis axis, const std::vector<model::Scheme>& schemes,
                                std::uint64_t seed);

struct SweepOptions {
  Axis axis = Axis::Snr;
  std::vector<model::Scheme> schemes;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
};

// Runs (scheme, seed) trials on a pool of `jobs` workers; rows come back in canonical order.
std::vector<ResultRow> run_sweep(Workspace& ws, const SweepOptions& opts);

// Runs fn(i) for i in [0, n) on `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace semcom::experiment
