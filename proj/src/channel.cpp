#include "pnrate/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pnrate/errors.hpp"

namespace pnrate {

namespace {

constexpr double kPi = std::numbers::pi;

double analytic_pulse(PulseKind kind, double T, double t) {
  if (t < 0.0 || t > T) return 0.0;
  switch (kind) {
    case PulseKind::square:
      return 1.0 / std::sqrt(T);
    case PulseKind::cosine_squared: {
      // cos^2(pi (t - T/2) / T) on the shifted support
      const double s = std::sin(kPi * t / T);
      return std::sqrt(2.0 / T) * s * s;
    }
  }
  throw ConfigError("unknown pulse kind");
}

}  // namespace

PulseKind parse_pulse_kind(std::string_view name) {
  if (name == "square") return PulseKind::square;
  if (name == "cosine_squared" || name == "cos2" || name == "cosine-squared")
    return PulseKind::cosine_squared;
  throw ConfigError("unknown pulse kind '" + std::string(name) +
                    "' (expected square or cosine_squared)");
}

std::string_view to_string(PulseKind kind) {
  return kind == PulseKind::square ? "square" : "cosine_squared";
}

double Pulse::value(double t) const { return scale * analytic_pulse(kind, T, t); }

double Pulse::energy() const {
  double e = 0.0;
  for (double g : fine) e += g * g;
  return e * T / static_cast<double>(fine.size());
}

Pulse make_pulse(PulseKind kind, double T, std::size_t L_sim) {
  if (!(T > 0.0)) throw ConfigError("pulse: T must be > 0");
  if (L_sim < 1) throw ConfigError("pulse: L_sim must be >= 1");
  if (kind != PulseKind::square && kind != PulseKind::cosine_squared)
    throw ConfigError("pulse: unknown kind");

  Pulse p;
  p.kind = kind;
  p.T = T;
  p.fine.resize(L_sim);
  const double dt = T / static_cast<double>(L_sim);
  for (std::size_t i = 0; i < L_sim; ++i)
    p.fine[i] = analytic_pulse(kind, T, static_cast<double>(i) * dt);
  p.raw_energy = p.energy();
  // The printed cosine-squared pulse carries 3/4 of unit energy.
  if (std::abs(p.raw_energy - 1.0) > 1e-12) {
    p.scale = 1.0 / std::sqrt(p.raw_energy);
    for (double& g : p.fine) g *= p.scale;
  }
  return p;
}

double ChannelConfig::sigma2_W() const { return 2.0 * kPi * beta * delta(); }

double ChannelConfig::snr_db() const {
  return 10.0 * std::log10(constellation.avg_power / (sigma2_N * T));
}

void ChannelConfig::validate() const {
  if (L < 1) throw ConfigError("L must be >= 1");
  if (L_sim < L) throw ConfigError("L_sim must be >= L");
  if (L_sim % L != 0)
    throw ConfigError("L_sim (" + std::to_string(L_sim) + ") is not divisible by L (" +
                      std::to_string(L) + ")");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(T > 0.0)) throw ConfigError("T must be > 0");
  if (!(sigma2_N > 0.0)) throw ConfigError("sigma2_N must be > 0");
  if (n_symb < 1) throw ConfigError("n_symb must be >= 1");
  if (pulse.fine.size() != L_sim || pulse.T != T)
    throw ConfigError("pulse was not built for (T, L_sim) of this configuration");
  if (constellation.points.empty()) throw ConfigError("constellation is empty");
}

ChannelConfig make_channel_config(PulseKind pulse, const Constellation& constellation,
                                  double beta_T, double snr_db, std::size_t L,
                                  std::size_t L_sim, std::size_t n_symb,
                                  std::uint64_t seed, double T) {
  ChannelConfig c;
  c.beta = beta_T / T;
  c.T = T;
  c.L = L;
  c.L_sim = L_sim;
  c.sigma2_N = snr_to_sigma2(snr_db, constellation.avg_power, T);
  c.n_symb = n_symb;
  c.pulse = make_pulse(pulse, T, L_sim);
  c.constellation = constellation;
  c.seed = seed;
  c.validate();
  return c;
}

double snr_to_sigma2(double snr_db, double P, double T) {
  return P / (T * std::pow(10.0, snr_db / 10.0));
}

std::vector<cplx> modulate(std::span<const cplx> x_symb, const Pulse& pulse) {
  if (x_symb.empty()) throw ConfigError("modulate: empty symbol sequence");
  const std::size_t per = pulse.fine.size();
  std::vector<cplx> x(x_symb.size() * per);
  for (std::size_t m = 0; m < x_symb.size(); ++m)
    for (std::size_t i = 0; i < per; ++i) x[m * per + i] = x_symb[m] * pulse.fine[i];
  return x;
}

std::vector<double> simulate_phase_path(double beta, double T, std::size_t L_sim,
                                        std::size_t n_symb, Engine& rng) {
  if (!(beta >= 0.0)) throw ConfigError("phase path: beta must be >= 0");
  const std::size_t n = n_symb * L_sim;
  std::vector<double> theta(n);
  if (n == 0) return theta;
  std::uniform_real_distribution<double> start(-kPi, kPi);
  theta[0] = start(rng);
  const double sd = std::sqrt(2.0 * kPi * beta * T / static_cast<double>(L_sim));
  if (sd == 0.0) {
    std::fill(theta.begin(), theta.end(), theta[0]);
    return theta;
  }
  std::normal_distribution<double> inc(0.0, sd);
  for (std::size_t i = 1; i < n; ++i) theta[i] = theta[i - 1] + inc(rng);
  return theta;
}

std::vector<cplx> receive_multisample(std::span<const cplx> x_fine,
                                      std::span<const double> theta_fine,
                                      const ChannelConfig& config, Engine& rng) {
  if (config.L < 1 || config.L_sim % config.L != 0)
    throw ConfigError("L_sim must be a multiple of L");
  if (x_fine.size() != theta_fine.size() || x_fine.size() != config.n_symb * config.L_sim)
    throw ConfigError("receive_multisample: waveform length does not match configuration");

  const std::size_t per_sample = config.L_sim / config.L;
  const std::size_t n = config.n_symb * config.L;
  const double dt = config.T / static_cast<double>(config.L_sim);
  const double noise_sd = std::sqrt(config.sigma2_N * config.delta() / 2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<cplx> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{0.0, 0.0};
    const std::size_t base = k * per_sample;
    for (std::size_t i = 0; i < per_sample; ++i)
      acc += x_fine[base + i] * std::polar(1.0, theta_fine[base + i]);
    const double re = gauss(rng);
    const double im = gauss(rng);
    y[k] = acc * dt + noise_sd * cplx(re, im);
  }
  return y;
}

SampleRecord simulate(const ChannelConfig& config) {
  config.validate();
  RunStreams streams(config.seed);
  SampleRecord r;
  r.symbol_index = draw_symbol_indices(config.constellation, config.n_symb, streams.symbols);
  r.x_symb = symbols_from_indices(config.constellation, r.symbol_index);
  r.x_fine = modulate(r.x_symb, config.pulse);
  r.theta_fine =
      simulate_phase_path(config.beta, config.T, config.L_sim, config.n_symb, streams.phase);
  r.y = receive_multisample(r.x_fine, r.theta_fine, config, streams.noise);
  return r;
}

std::vector<double> receiver_taps(const Pulse& pulse, std::size_t L) {
  std::vector<double> taps(L);
  for (std::size_t l = 1; l <= L; ++l) {
    const double t = std::min(pulse.T * static_cast<double>(l) / static_cast<double>(L), pulse.T);
    taps[l - 1] = pulse.value(t);
  }
  return taps;
}

}  // namespace pnrate
