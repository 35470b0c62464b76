#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semcom/ad.hpp"
#include "semcom/rng.hpp"

namespace semcom::nets {

using ad::Graph;
using ad::NodeId;
using ad::ParamStore;

using FeatureVec = std::vector<double>;

// Fully-connected stack. Layer k maps widths[k] -> widths[k+1]; a layer with
// batch_norm[k] set is FC -> BN -> leaky-ReLU, otherwise it is a plain FC
// (linear output layer).
struct MLPSpec {
  std::vector<std::size_t> widths;
  double slope = 0.01;
  std::vector<bool> batch_norm;

  // BN + activation on every hidden layer, linear last layer.
  static MLPSpec hidden(std::vector<std::size_t> widths, double slope);

  std::size_t layers() const { return widths.size() - 1; }
  std::size_t in_width() const { return widths.front(); }
  std::size_t out_width() const { return widths.back(); }
  void validate() const;
};

struct AFSpec {
  std::size_t csi_width = 1;
  std::size_t hidden = 32;
};

void init_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                 double gain, Rng& rng);
void init_mlp(ParamStore& store, const std::string& prefix, const MLPSpec& spec, Rng& rng);
void init_af(ParamStore& store, const std::string& prefix, std::size_t width, const AFSpec& spec,
             Rng& rng);
// Adds AF modules at the input, after every layer, and at the output of an MLP.
void init_mlp_af(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                 const AFSpec& af, Rng& rng);

NodeId linear(Graph& g, NodeId x, const std::string& prefix);
// f * sigmoid(FC(ReLU(FC([f; csi])))).
NodeId af_module(Graph& g, NodeId f, NodeId csi, const std::string& prefix);
// With `csi` set, AF modules wrap every layer (see init_mlp_af).
NodeId mlp(Graph& g, NodeId x, const std::string& prefix, const MLPSpec& spec,
           std::optional<NodeId> csi = std::nullopt);

// Parameter prefixes.
std::string feature_prefix(int device);
std::string encoder_prefix(int device);
std::string decoder_prefix(int device);
inline const std::string kAux1 = "cls.aux1";
inline const std::string kAux2 = "cls.aux2";
inline const std::string kMain = "cls.main";

// Single-vector conveniences; each evaluates a small infer-mode graph.
FeatureVec feature_encode(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                          std::span<const double> s);

enum class Variant { Plain, SnrAware, FadingAware };
std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

// csi scalar fed to AF modules: dB / 10.
double snr_feature(double snr_db);

std::vector<double> jscc_encode(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                                Variant variant, std::span<const double> v,
                                std::optional<double> snr_db = std::nullopt);
FeatureVec jscc_decode(ParamStore& store, const std::string& prefix, const MLPSpec& spec,
                       Variant variant, std::size_t csi_width, std::span<const double> y,
                       std::span<const double> csi = {});
std::vector<double> af_apply(ParamStore& store, const std::string& prefix,
                             std::span<const double> f, std::span<const double> csi);
std::vector<double> classify(ParamStore& store, const std::string& prefix,
                             std::span<const double> v);
FeatureVec view_pool(std::span<const double> a, std::span<const double> b);

}  // namespace semcom::nets
