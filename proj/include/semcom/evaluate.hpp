#pragma once

#include <cstdint>

#include "semcom/channel.hpp"
#include "semcom/checkpoint.hpp"
#include "semcom/dataset.hpp"
#include "semcom/retrieval.hpp"

namespace semcom::eval {

struct EvalChannel {
  channel::Kind kind = channel::Kind::Awgn;
  double snr_db = 0.0;
  double sigma_h2 = 1.0;
  channel::CsiMode csi_mode = channel::CsiMode::None;
  // sigma^2 = 0 with the configured gains.
  bool noiseless = false;
  // Unit gains regardless of kind.
  bool identity_gains = false;
  // Independent channel realizations per query.
  std::size_t repeats = 1;
  // Digital per-user power.
  double digital_power = 1.0;
};

struct Metrics {
  double top1 = 0;
  double cos_sq = 0;
  double outage_rate = 0;
  // Mean squared feature reconstruction error (JSCC schemes).
  double mse = 0;
};

// Noise-free pooled features of a pair set through the trained feature encoders.
Tensor pooled_features(Checkpoint& ckpt, const data::PairSet& set);
retrieval::GalleryIndex build_gallery(Checkpoint& ckpt, const data::PairSet& gallery);
std::vector<int> labels_of(const data::PairSet& set);

Metrics evaluate_scheme(Checkpoint& ckpt, const EvalChannel& ch, const data::Dataset& data,
                        std::uint64_t seed);

}  // namespace semcom::eval
