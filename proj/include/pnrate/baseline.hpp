#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pnrate/channel.hpp"
#include "pnrate/constellation.hpp"
#include "pnrate/trellis.hpp"

namespace pnrate {

// ---------------------------------------------------------------------------
// Baud-rate model: Y_m = X_m e^{j Theta_m} + Z_m with per-symbol Wiener
// increments of variance gamma2 and Z_m ~ CN(0, sigma2_Z).
// ---------------------------------------------------------------------------

struct BaudRateConfig {
  double gamma2 = 0.0;
  double sigma2_Z = 1.0;
  Constellation constellation;
  std::size_t n_symb = 10000;
  std::size_t S = 64;
  std::uint64_t seed = 1;

  /// gamma2 = 2 pi beta T, sigma2_Z = sigma2_N T.
  static BaudRateConfig from_channel(const ChannelConfig& config, std::size_t S);
  void validate() const;
};

struct BaudSample {
  std::vector<std::size_t> symbol_index;
  std::vector<cplx> x_symb;
  std::vector<double> theta;  ///< unwrapped
  std::vector<cplx> y;
};

BaudSample baud_sample(const BaudRateConfig& config, Engine& rng);

/// One sample per symbol, unit tap, circulant kernel built from gamma2.
TrellisModel baud_model(const BaudRateConfig& config);

/// Draws from Engine(config.seed) and evaluates the bound with baud_model().
RateEstimate baud_rate_estimate(const BaudRateConfig& config);

// ---------------------------------------------------------------------------
// MTR model: per-symbol sums of the simplified per-sample channel, decoded
// with a simulation-estimated first-order phase Markov chain.
// ---------------------------------------------------------------------------

/// Psi_k = x_symb * g(l Delta) * Delta * e^{j theta((k-1) Delta)} + N_k, the
/// per-sample channel with the intra-sample fading factor replaced by the
/// pulse value. `theta_fine` is the fine-grid phase path of the simulator.
std::vector<cplx> simplified_samples(std::span<const cplx> x_symb,
                                     std::span<const double> theta_fine,
                                     const ChannelConfig& config, Engine& noise);

/// V_m = sum of the L samples of symbol m.
std::vector<cplx> mtr_matched_filter(std::span<const cplx> psi, std::size_t L);

struct MtrCalibrationOptions {
  double snr_db = 30.0;
  /// Pool transition counts over all phase rotations (the channel is
  /// rotation-invariant), so every row is estimated from all n_cal symbols.
  bool pool_rotations = true;
};

struct MtrConfig {
  std::size_t L = 1;
  std::size_t S = 0;
  std::vector<double> empirical_T;  ///< S x S row-major, row = previous state
  std::size_t n_cal = 0;
  std::uint64_t cal_seed = 0;

  void validate() const;
};

/// Estimates the state transition table from a known pilot stream sent
/// through the simplified per-sample channel at the calibration SNR.
MtrConfig mtr_calibrate(const ChannelConfig& config, std::size_t S, std::size_t n_cal,
                        std::uint64_t seed, const MtrCalibrationOptions& options = {});

/// Tap Delta * sum_l g(l Delta), noise sigma2_N * T, dense transitions.
TrellisModel mtr_model(const ChannelConfig& config, const MtrConfig& mtr);

RateEstimate mtr_rate_estimate(const ChannelConfig& config, const MtrConfig& mtr);

/// S lines of S comma-separated probabilities, no header.
void write_transition_csv(const std::filesystem::path& path, std::size_t S,
                          std::span<const double> row_major);

/// Reads and validates a row-stochastic square matrix; returns S via `S_out`.
std::vector<double> read_transition_csv(const std::filesystem::path& path, std::size_t& S_out);

}  // namespace pnrate
