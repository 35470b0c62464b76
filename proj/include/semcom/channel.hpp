#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom::channel {

using Complex = std::complex<double>;

enum class Kind { Awgn, Rayleigh };
enum class CsiMode { None, Receiver };

std::string to_string(Kind kind);
std::string to_string(CsiMode mode);
Kind parse_kind(const std::string& text);
CsiMode parse_csi_mode(const std::string& text);

struct ChannelConfig {
  Kind kind = Kind::Awgn;
  double snr_db = 0.0;
  double sigma_h2 = 1.0;
  CsiMode csi_mode = CsiMode::None;

  void validate() const;
};

// Link gains and noise variance for one retrieval task.
struct FadingState {
  Complex h1{1.0, 0.0};
  Complex h2{1.0, 0.0};
  double sigma2 = 1.0;
};

// Interleaved (re, im) codeword of count() complex symbols.
struct ChannelSymbols {
  std::vector<double> reals;
  double power = 1.0;

  std::size_t count() const { return reals.size() / 2; }
  Complex symbol(std::size_t i) const { return {reals[2 * i], reals[2 * i + 1]}; }
  double average_power() const;
};

// sigma^2 = P_rx / 10^(snr_db / 10).
double snr_to_sigma2(double snr_db, double received_power = 1.0);

// x = sqrt(q_c P) x~ / |x~| for a raw array of 2 q_c reals.
ChannelSymbols power_normalize(std::span<const double> raw, double power);

// h ~ CN(0, sigma_h2): independent real and imaginary parts of variance sigma_h2 / 2.
Complex sample_fading(Rng& rng, double sigma_h2);

// Draws the per-task state: unit gains for AWGN, CN(0, sigma_h2) gains for Rayleigh.
// Noise variance is referenced to unit received power per transmitter.
FadingState draw_state(const ChannelConfig& config, Rng& rng);

// 2*symbols reals of CN(0, sigma2) noise. Unit-variance draws are scaled, so
// the same stream yields proportional noise at every SNR.
std::vector<double> complex_noise(std::size_t symbols, double sigma2, Rng& rng);

// y = h x + z.
std::vector<double> transmit_p2p(const ChannelSymbols& x, Complex h, double sigma2, Rng& rng);
// y = [h1 x1 + z1; h2 x2 + z2]; each transmitter gets half the channel uses.
std::vector<double> transmit_oma(const ChannelSymbols& x1, const ChannelSymbols& x2,
                                 const FadingState& state, Rng& rng);
// y = h1 x1 + h2 x2 + z over the full set of channel uses.
std::vector<double> transmit_noma(const ChannelSymbols& x1, const ChannelSymbols& x2,
                                  const FadingState& state, Rng& rng);

// Single-link zero forcing: y conj(h) / |h|^2.
std::vector<double> equalize(std::span<const double> y, Complex h);

// 10 log10(mean |signal|^2 / mean |noise|^2) over interleaved arrays.
double measured_snr_db(std::span<const double> signal, std::span<const double> noise);

// Batched helpers for training graphs: [batch, 2] gain rows and [batch, 2*symbols] noise.
Tensor gain_rows(const std::vector<Complex>& gains);
Tensor noise_rows(std::size_t batch, std::size_t symbols, double sigma2, Rng& rng);

}  // namespace semcom::channel
