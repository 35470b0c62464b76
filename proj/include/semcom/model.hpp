#pragma once

// Whole-system layouts for the four schemes and the graphs used by training
// and evaluation. Input slot names are fixed: s1, s2 (observations), labels,
// v1, v2 (precomputed features), noise, h1, h2 (per-row gains), csi_enc,
// csi_dec1, csi_dec2, u1, u2 (quantizer noise), y (received reals).

#include <cstddef>
#include <string>
#include <vector>

#include "semcom/ad.hpp"
#include "semcom/nets.hpp"

namespace semcom::model {

using ad::Graph;
using ad::ParamStore;
using nets::Variant;

enum class Scheme { Single, Oma, Noma, Digital };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& text);

struct Dims {
  std::size_t p = 64;
  std::size_t r = 64;
  std::size_t classes = 100;
  std::vector<std::size_t> feature_hidden{128, 64};
  std::vector<std::size_t> encoder_hidden{256, 128};
  std::vector<std::size_t> decoder_hidden{256, 256, 128};
  std::size_t af_hidden = 32;
  double slope = 0.01;
};

struct SystemSpec {
  Scheme scheme = Scheme::Noma;
  Variant variant = Variant::Plain;
  Dims dims;
  // Total complex channel uses per query.
  std::size_t q_total = 64;
  // Per-transmitter average power per complex symbol.
  double power = 0.5;
  // OMA fading-aware decoders: feed both gains (true) or only the own link's gain.
  bool decoder_both_gains = true;

  int devices() const { return scheme == Scheme::Single ? 1 : 2; }
  bool jscc() const { return scheme != Scheme::Digital; }
  std::size_t symbols_per_device() const;
  std::size_t main_width() const { return devices() * dims.r; }
  std::size_t decoder_csi_width() const;

  nets::MLPSpec feature_spec() const;
  nets::MLPSpec encoder_spec() const;
  nets::MLPSpec decoder_spec() const;
  void validate() const;
};

// Feature encoders and classifiers (the stage-1 parameter set).
void init_front(ParamStore& store, const SystemSpec& spec, std::uint64_t seed);
// JSCC encoders/decoders (with AF modules for the CSI-aware variants).
void init_jscc(ParamStore& store, const SystemSpec& spec, std::uint64_t seed);
// Shared factorized entropy model for the digital scheme: ent.mean, ent.scale.
void init_entropy(ParamStore& store, const SystemSpec& spec);

bool is_front_param(const std::string& name);
bool is_jscc_param(const std::string& name);
bool is_entropy_param(const std::string& name);

// Mean cross-entropy over the classifier heads; outputs "loss".
Graph build_stage1(const SystemSpec& spec);
// Infer-time features; outputs v1 (and v2).
Graph build_features(const SystemSpec& spec);

struct JsccGraphOptions {
  // Stage 2 feeds frozen features through v1/v2 instead of running the encoders.
  bool features_from_input = false;
  double lambda_cos = 0.0;
};
// Encoder -> channel -> decoder -> classifiers. Outputs x1, x2, y, vhat1, vhat2,
// loss_jscc, loss_cls, cos_sq and loss (= loss_cls + lambda_cos * cos_sq).
Graph build_jscc(const SystemSpec& spec, const JsccGraphOptions& options);
// Transmit side only: s -> v -> normalized codewords x1 (x2).
Graph build_transmitter(const SystemSpec& spec);
// Receive side only: y -> vhat1 (vhat2) -> pooled.
Graph build_receiver(const SystemSpec& spec);
// Quantization surrogate + entropy model; outputs bits1, bits2, loss_cls, loss.
Graph build_digital(const SystemSpec& spec, double lambda_rate);

}  // namespace semcom::model
