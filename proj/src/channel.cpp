#include "semcom/channel.hpp"

#include <cmath>

#include "semcom/error.hpp"

namespace semcom::channel {

std::string to_string(Kind kind) { return kind == Kind::Awgn ? "awgn" : "rayleigh"; }
std::string to_string(CsiMode mode) { return mode == CsiMode::None ? "none" : "receiver"; }

Kind parse_kind(const std::string& text) {
  if (text == "awgn") return Kind::Awgn;
  if (text == "rayleigh") return Kind::Rayleigh;
  throw ValidationError("channel.kind must be 'awgn' or 'rayleigh', got '" + text + "'");
}

CsiMode parse_csi_mode(const std::string& text) {
  if (text == "none") return CsiMode::None;
  if (text == "receiver") return CsiMode::Receiver;
  throw ValidationError("channel.csi_mode must be 'none' or 'receiver', got '" + text + "'");
}

void ChannelConfig::validate() const {
  if (!(sigma_h2 > 0)) throw ValidationError("channel.sigma_h2 must be positive");
  if (!std::isfinite(snr_db)) throw ValidationError("channel.snr_db must be finite");
  if (csi_mode == CsiMode::Receiver && kind != Kind::Rayleigh) {
    throw ValidationError("channel.csi_mode 'receiver' requires a rayleigh channel");
  }
}

double ChannelSymbols::average_power() const {
  double acc = 0;
  for (double v : reals) acc += v * v;
  return count() ? acc / static_cast<double>(count()) : 0.0;
}

double snr_to_sigma2(double snr_db, double received_power) {
  if (!(received_power > 0)) throw ValidationError("received power must be positive");
  return received_power / std::pow(10.0, snr_db / 10.0);
}

ChannelSymbols power_normalize(std::span<const double> raw, double power) {
  if (raw.empty() || raw.size() % 2 != 0) {
    throw ShapeError("codeword must hold a positive even number of reals");
  }
  if (!(power > 0)) throw ValidationError("power budget must be positive");
  double sq = 0;
  for (double v : raw) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0)) throw NumericError("degenerate codeword: zero norm");
  const double target = std::sqrt(static_cast<double>(raw.size() / 2) * power);
  ChannelSymbols out;
  out.power = power;
  out.reals.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.reals[i] = target * raw[i] / norm;
  return out;
}

Complex sample_fading(Rng& rng, double sigma_h2) {
  if (!(sigma_h2 > 0)) throw ValidationError("fading variance must be positive");
  const double s = std::sqrt(sigma_h2 / 2.0);
  const double re = s * rng.normal();
  const double im = s * rng.normal();
  return {re, im};
}

FadingState draw_state(const ChannelConfig& config, Rng& rng) {
  FadingState state;
  state.sigma2 = snr_to_sigma2(config.snr_db, 1.0);
  if (config.kind == Kind::Rayleigh) {
    state.h1 = sample_fading(rng, config.sigma_h2);
    state.h2 = sample_fading(rng, config.sigma_h2);
  }
  return state;
}

std::vector<double> complex_noise(std::size_t symbols, double sigma2, Rng& rng) {
  if (sigma2 < 0) throw ValidationError("noise variance must be non-negative");
  const double s = std::sqrt(sigma2 / 2.0);
  std::vector<double> z(2 * symbols);
  for (double& v : z) v = s * rng.normal();
  return z;
}

namespace {

void apply_link(std::span<const double> x, Complex h, std::span<const double> z, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); i += 2) {
    const Complex s = h * Complex(x[i], x[i + 1]);
    y[i] += s.real() + z[i];
    y[i + 1] += s.imag() + z[i + 1];
  }
}

}  // namespace

std::vector<double> transmit_p2p(const ChannelSymbols& x, Complex h, double sigma2, Rng& rng) {
  const auto z = complex_noise(x.count(), sigma2, rng);
  std::vector<double> y(x.reals.size(), 0.0);
  apply_link(x.reals, h, z, y);
  return y;
}

std::vector<double> transmit_oma(const ChannelSymbols& x1, const ChannelSymbols& x2,
                                 const FadingState& state, Rng& rng) {
  if (x1.reals.size() != x2.reals.size()) {
    throw ShapeError("OMA transmitters must use equal numbers of channel uses");
  }
  const std::size_t half = x1.reals.size();
  const auto z = complex_noise(x1.count() + x2.count(), state.sigma2, rng);
  std::vector<double> y(2 * half, 0.0);
  std::span<double> ys(y);
  std::span<const double> zs(z);
  apply_link(x1.reals, state.h1, zs.first(half), ys.first(half));
  apply_link(x2.reals, state.h2, zs.last(half), ys.last(half));
  return y;
}

std::vector<double> transmit_noma(const ChannelSymbols& x1, const ChannelSymbols& x2,
                                  const FadingState& state, Rng& rng) {
  if (x1.reals.size() != x2.reals.size()) {
    throw ShapeError("NOMA transmitters must use the same channel uses");
  }
  const auto z = complex_noise(x1.count(), state.sigma2, rng);
  const std::vector<double> silent(z.size(), 0.0);
  std::vector<double> y(x1.reals.size(), 0.0);
  apply_link(x1.reals, state.h1, z, y);
  apply_link(x2.reals, state.h2, silent, y);
  return y;
}

std::vector<double> equalize(std::span<const double> y, Complex h) {
  if (std::abs(h) < 1e-12) throw NumericError("singular channel: |h| below 1e-12");
  const Complex w = std::conj(h) / std::norm(h);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i + 1 < y.size(); i += 2) {
    const Complex s = w * Complex(y[i], y[i + 1]);
    out[i] = s.real();
    out[i + 1] = s.imag();
  }
  return out;
}

double measured_snr_db(std::span<const double> signal, std::span<const double> noise) {
  double ps = 0, pn = 0;
  for (double v : signal) ps += v * v;
  for (double v : noise) pn += v * v;
  ps /= static_cast<double>(signal.size());
  pn /= static_cast<double>(noise.size());
  return 10.0 * std::log10(ps / pn);
}

Tensor gain_rows(const std::vector<Complex>& gains) {
  Tensor t({gains.size(), 2});
  for (std::size_t i = 0; i < gains.size(); ++i) {
    t.at(i, 0) = gains[i].real();
    t.at(i, 1) = gains[i].imag();
  }
  return t;
}

Tensor noise_rows(std::size_t batch, std::size_t symbols, double sigma2, Rng& rng) {
  Tensor t({batch, 2 * symbols});
  for (std::size_t r = 0; r < batch; ++r) {
    const auto z = complex_noise(symbols, sigma2, rng);
    std::copy(z.begin(), z.end(), t.row_span(r).begin());
  }
  return t;
}

}  // namespace semcom::channel
