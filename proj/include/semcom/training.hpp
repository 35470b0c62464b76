#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/checkpoint.hpp"
#include "semcom/dataset.hpp"
#include "semcom/rng.hpp"

namespace semcom::training {

// Constant rate that drops to `final_lr` from epoch index `drop_epoch` on (0-based).
struct LrSchedule {
  double initial = 0.01;
  double final_lr = 0.01;
  std::size_t drop_epoch = 0;

  double at(std::size_t epoch) const { return epoch < drop_epoch ? initial : final_lr; }
};

struct SnrTrain {
  bool range = false;
  double fixed_db = 0.0;
  double lo_db = -6.0;
  double hi_db = 15.0;

  std::string label() const;
};

struct TrainConfig {
  std::size_t batch = 16;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t t1_epochs = 30;
  LrSchedule t1_lr{0.01, 0.01, 30};
  std::size_t t2_epochs = 120;
  LrSchedule t2_lr{0.1, 0.01, 90};
  std::size_t t3_epochs = 30;
  LrSchedule t3_front_lr{0.01, 0.001, 20};
  LrSchedule t3_jscc_lr{0.001, 0.0001, 20};
  std::size_t digital_epochs = 30;
  LrSchedule digital_lr{0.01, 0.001, 20};
  double lambda_cos = 0.0;
  double lambda_rate = 1e-3;
  SnrTrain snr;
  channel::Kind channel = channel::Kind::Awgn;
  double sigma_h2 = 1.0;
  double divergence_limit = 1e6;

  void validate() const;
};

struct LogRow {
  std::string stage;
  std::size_t epoch = 0;
  double loss = 0;
  std::string snr_train_db;
  double lr = 0;
};

struct MetricLog {
  std::vector<LogRow> rows;
  std::string csv() const;
};

double sample_train_snr(const SnrTrain& snr, Rng& rng);

// Learning rate of parameter `name` in `stage` at 0-based `epoch`; 0 means frozen.
double stage_lr(Stage stage, const std::string& name, std::size_t epoch, const TrainConfig& cfg);

// Per-epoch batches: identities shuffled, observations interleaved so that each
// batch mixes identities; batches shorter than 2 rows are dropped.
std::vector<std::vector<std::size_t>> make_batches(const data::PairSet& set, std::size_t batch,
                                                   Rng& rng);

// Fresh, untrained parameters for the front end of `spec`.
Checkpoint initial_checkpoint(const model::SystemSpec& spec, std::uint64_t seed);
// Retargets a stage-1 checkpoint to a scheme with the same front end.
Checkpoint adopt_front(const Checkpoint& t1, const model::SystemSpec& target);

void run_stage1(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log);
void run_stage2(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log);
void run_stage3(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log);
void run_digital(Checkpoint& ckpt, const TrainConfig& cfg, const data::Dataset& data, MetricLog& log);

// Loss terms on plain arrays (probabilities and features), natural log.
double loss_cls(const std::vector<std::vector<double>>& probs, int label);
double loss_jscc(std::span<const double> v1, std::span<const double> vhat1,
                 std::span<const double> v2, std::span<const double> vhat2);
// <a,b>^2 / (|a|^2 |b|^2); 0 when either is zero.
double cosine_squared(std::span<const double> a, std::span<const double> b);
double loss_cos_reg(double base, std::span<const double> x1, std::span<const double> x2,
                    double lambda);
double loss_digital(double cls, double bits1, double bits2, double lambda_rate);

}  // namespace semcom::training
