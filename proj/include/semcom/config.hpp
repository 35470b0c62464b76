#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "semcom/channel.hpp"
#include "semcom/dataset.hpp"
#include "semcom/model.hpp"
#include "semcom/training.hpp"

namespace semcom::config {

struct PowerTable {
  double single = 1.0;
  double oma = 1.0;
  double noma = 0.5;
  double digital = 1.0;
  double of(model::Scheme s) const;
};

struct ModelSection {
  model::Dims dims;
  nets::Variant variant = nets::Variant::Plain;
  bool decoder_both_gains = true;
};

struct ChannelSection {
  channel::Kind kind = channel::Kind::Awgn;
  channel::CsiMode csi_mode = channel::CsiMode::None;
  double sigma_h2 = 1.0;
  std::size_t q_total = 64;
  PowerTable power;
  double snr_train_db = 0.0;
};

struct EvalSection {
  std::vector<model::Scheme> schemes{model::Scheme::Single, model::Scheme::Oma, model::Scheme::Noma,
                                     model::Scheme::Digital};
  std::vector<double> snr_test_db{-6, -3, 0, 3, 6, 9, 12, 15};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t repeats = 1;
  std::vector<std::size_t> bandwidths{16, 32, 64, 128};
  double bandwidth_snr_db = 0.0;
  std::vector<double> lambda_cos{0, 0.01, 0.03, 0.1, 0.3, 1};
  double lambda_cos_snr_db = 0.0;
  // Fixed training SNRs of the mismatch sweep; the SNR-aware model is added to these.
  std::vector<double> mismatch_train_db{-6, 0, 6, 12};
  std::vector<double> mismatch_test_db{-6, -3, 0, 3, 6, 9, 12, 15, 18};
  std::vector<model::Scheme> mismatch_schemes{model::Scheme::Oma, model::Scheme::Noma};
  std::vector<double> lambda_rate{1e-3, 3e-3, 1e-2, 2e-2, 3e-2, 4e-2};
  std::string out = "results";
};

struct ExperimentConfig {
  data::SyntheticConfig dataset;
  ModelSection model;
  ChannelSection channel;
  training::TrainConfig training;
  EvalSection eval;

  void validate() const;
  // Spec of one scheme at a bandwidth, with classes matched to the dataset.
  model::SystemSpec system_spec(model::Scheme scheme, nets::Variant variant,
                                std::size_t q_total) const;
  model::SystemSpec system_spec(model::Scheme scheme) const;
  // Training config with the channel section applied and the given training SNR.
  training::TrainConfig train_config(double snr_train_db) const;
};

// Missing keys keep their defaults; unknown keys raise ValidationError naming the path.
ExperimentConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load(const std::filesystem::path& path);

}  // namespace semcom::config
