#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "pnrate/constellation.hpp"
#include "pnrate/rng.hpp"

namespace pnrate {

enum class PulseKind { square, cosine_squared };

PulseKind parse_pulse_kind(std::string_view name);
std::string_view to_string(PulseKind kind);

/// Transmit pulse supported on [0, T], sampled on the fine simulation grid
/// t_i = i * T / L_sim (i = 0 .. L_sim-1) and scaled to unit Riemann energy.
struct Pulse {
  PulseKind kind = PulseKind::square;
  double T = 1.0;
  std::vector<double> fine;
  double scale = 1.0;       ///< multiplier applied to the analytic shape
  double raw_energy = 1.0;  ///< Riemann energy before rescaling

  std::size_t fine_per_symbol() const { return fine.size(); }
  /// Normalized pulse at time t; zero outside [0, T].
  double value(double t) const;
  /// sum g(t_i)^2 * T / L_sim
  double energy() const;
};

Pulse make_pulse(PulseKind kind, double T, std::size_t L_sim);

/// Physical and receiver parameters of one experiment.
struct ChannelConfig {
  double beta = 0.0;  ///< linewidth f_FWHM in Hz
  double T = 1.0;     ///< symbol interval
  std::size_t L = 1;  ///< receiver samples per symbol
  std::size_t L_sim = 1024;
  double sigma2_N = 1.0;  ///< white-noise level, E[N(t1)N*(t2)] = sigma2_N delta(t2-t1)
  std::size_t n_symb = 10000;
  Pulse pulse;
  Constellation constellation;
  std::uint64_t seed = 1;

  double delta() const { return T / static_cast<double>(L); }
  /// Per-sample phase increment variance 2*pi*beta*Delta.
  double sigma2_W() const;
  double snr_db() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Convenience constructor with T = 1 by default; beta_T is beta * T.
ChannelConfig make_channel_config(PulseKind pulse, const Constellation& constellation,
                                  double beta_T, double snr_db, std::size_t L,
                                  std::size_t L_sim, std::size_t n_symb,
                                  std::uint64_t seed, double T = 1.0);

/// sigma2_N = P / (T * 10^(snr_dB/10))
double snr_to_sigma2(double snr_db, double P, double T);

struct SampleRecord {
  std::vector<std::size_t> symbol_index;
  std::vector<cplx> x_symb;
  std::vector<cplx> x_fine;
  std::vector<double> theta_fine;  ///< unwrapped
  std::vector<cplx> y;             ///< n_symb * L receiver samples
};

/// Concatenated scaled pulse copies on the fine grid.
std::vector<cplx> modulate(std::span<const cplx> x_symb, const Pulse& pulse);

/// Wiener phase on the fine grid: uniform start, then Gaussian increments of
/// variance 2*pi*beta*T/L_sim. Length n_symb * L_sim.
std::vector<double> simulate_phase_path(double beta, double T, std::size_t L_sim,
                                        std::size_t n_symb, Engine& rng);

/// Integrate-and-dump over each sample interval (left-endpoint Riemann sum of
/// x(t) e^{j theta(t)}) plus CN(0, sigma2_N * Delta) noise per sample.
std::vector<cplx> receive_multisample(std::span<const cplx> x_fine,
                                      std::span<const double> theta_fine,
                                      const ChannelConfig& config, Engine& rng);

/// Full draw from the waveform channel using RunStreams(config.seed).
SampleRecord simulate(const ChannelConfig& config);

/// Pulse values g(l * Delta) for l = 1..L used by the per-sample auxiliary
/// model X_k = x_symb * g((k mod L) Delta).
std::vector<double> receiver_taps(const Pulse& pulse, std::size_t L);

}  // namespace pnrate
