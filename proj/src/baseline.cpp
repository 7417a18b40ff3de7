#include "pnrate/baseline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "pnrate/errors.hpp"
#include "pnrate/phase_grid.hpp"

namespace pnrate {

namespace {

constexpr double kPi = std::numbers::pi;

std::string context(const char* model, const std::string& constellation, double beta_T,
                    double snr_db, std::size_t L, std::size_t S, std::size_t n_symb,
                    std::uint64_t seed) {
  std::ostringstream os;
  os << " [" << model << " " << constellation << " beta_T=" << beta_T << " snr_db=" << snr_db
     << " L=" << L << " S=" << S << " n_symb=" << n_symb << " seed=" << seed << "]";
  return os.str();
}

}  // namespace

BaudRateConfig BaudRateConfig::from_channel(const ChannelConfig& config, std::size_t S) {
  BaudRateConfig b;
  b.gamma2 = 2.0 * kPi * config.beta * config.T;
  b.sigma2_Z = config.sigma2_N * config.T;
  b.constellation = config.constellation;
  b.n_symb = config.n_symb;
  b.S = S;
  b.seed = config.seed;
  return b;
}

void BaudRateConfig::validate() const {
  if (!(gamma2 >= 0.0)) throw ConfigError("baud: gamma2 must be >= 0");
  if (!(sigma2_Z > 0.0)) throw ConfigError("baud: sigma2_Z must be > 0");
  if (constellation.points.empty()) throw ConfigError("baud: empty constellation");
  if (n_symb < 1) throw ConfigError("baud: n_symb must be >= 1");
  if (S < 2 || (S & (S - 1)) != 0) throw ConfigError("baud: S must be a power of two >= 2");
}

BaudSample baud_sample(const BaudRateConfig& config, Engine& rng) {
  config.validate();
  BaudSample out;
  out.symbol_index = draw_symbol_indices(config.constellation, config.n_symb, rng);
  out.x_symb = symbols_from_indices(config.constellation, out.symbol_index);

  out.theta.resize(config.n_symb);
  std::uniform_real_distribution<double> start(-kPi, kPi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.theta[0] = start(rng);
  const double sd = std::sqrt(config.gamma2);
  for (std::size_t m = 1; m < config.n_symb; ++m) out.theta[m] = out.theta[m - 1] + sd * gauss(rng);

  const double noise_sd = std::sqrt(config.sigma2_Z / 2.0);
  out.y.resize(config.n_symb);
  for (std::size_t m = 0; m < config.n_symb; ++m) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    out.y[m] = out.x_symb[m] * std::polar(1.0, out.theta[m]) + noise_sd * cplx(re, im);
  }
  return out;
}

TrellisModel baud_model(const BaudRateConfig& config) {
  config.validate();
  const PhaseGrid grid(config.S, config.gamma2);
  TrellisModel m;
  m.state_phases.assign(grid.midpoints().begin(), grid.midpoints().end());
  m.transition = std::make_shared<FftCirculantTransition>(grid.kernel());
  m.taps = {1.0};
  m.noise_var = config.sigma2_Z;
  return m;
}

RateEstimate baud_rate_estimate(const BaudRateConfig& config) {
  config.validate();
  RateEstimate est;
  est.model = ModelKind::baud;
  est.L = 1;
  est.S = config.S;
  est.snr_db = 10.0 * std::log10(config.constellation.avg_power / config.sigma2_Z);
  est.beta_T = config.gamma2 / (2.0 * kPi);
  est.n_symb = config.n_symb;
  est.constellation = config.constellation.name;
  est.seed = config.seed;

  Engine rng(config.seed);
  const BaudSample sample = baud_sample(config, rng);
  try {
    const RateTerms t = evaluate_rate(baud_model(config), sample.y, sample.symbol_index,
                                      config.constellation);
    est.rate_bits = t.rate_bits;
    est.log_q_conditional = t.log_q_conditional;
    est.log_q_marginal = t.log_q_marginal;
  } catch (const NumericalError& e) {
    throw NumericalError(e.what() + context("baud", est.constellation, est.beta_T, est.snr_db,
                                            1, est.S, est.n_symb, est.seed));
  }
  return est;
}

std::vector<cplx> simplified_samples(std::span<const cplx> x_symb,
                                     std::span<const double> theta_fine,
                                     const ChannelConfig& config, Engine& noise) {
  const std::size_t L = config.L;
  if (L < 1 || config.L_sim % L != 0) throw ConfigError("L_sim must be a multiple of L");
  if (theta_fine.size() != x_symb.size() * config.L_sim)
    throw ConfigError("simplified_samples: phase path length does not match the symbols");
  const double delta = config.delta();
  const auto taps = receiver_taps(config.pulse, L);
  const std::size_t per_sample = config.L_sim / L;
  const double noise_sd = std::sqrt(config.sigma2_N * delta / 2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<cplx> psi(x_symb.size() * L);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double re = gauss(noise);
    const double im = gauss(noise);
    psi[k] = x_symb[k / L] * taps[k % L] * delta * std::polar(1.0, theta_fine[k * per_sample]) +
             noise_sd * cplx(re, im);
  }
  return psi;
}

std::vector<cplx> mtr_matched_filter(std::span<const cplx> psi, std::size_t L) {
  if (L < 1 || psi.size() % L != 0)
    throw ConfigError("mtr_matched_filter: input length " + std::to_string(psi.size()) +
                      " is not a multiple of L=" + std::to_string(L));
  std::vector<cplx> v(psi.size() / L);
  for (std::size_t m = 0; m < v.size(); ++m) {
    cplx acc{0.0, 0.0};
    for (std::size_t l = 0; l < L; ++l) acc += psi[m * L + l];
    v[m] = acc;
  }
  return v;
}

void MtrConfig::validate() const {
  if (L < 1) throw ConfigError("mtr: L must be >= 1");
  if (S < 2) throw ConfigError("mtr: S must be >= 2");
  if (empirical_T.size() != S * S) throw ConfigError("mtr: transition table must be S x S");
  for (std::size_t r = 0; r < S; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < S; ++c) {
      const double v = empirical_T[r * S + c];
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("mtr: negative transition entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("mtr: row " + std::to_string(r) + " does not sum to 1");
  }
}

MtrConfig mtr_calibrate(const ChannelConfig& config, std::size_t S, std::size_t n_cal,
                        std::uint64_t seed, const MtrCalibrationOptions& options) {
  if (n_cal < 10000) throw ConfigError("mtr_calibrate: n_cal must be >= 10^4 symbols");
  if (S < 2) throw ConfigError("mtr_calibrate: S must be >= 2");

  ChannelConfig cal = config;
  cal.n_symb = n_cal;
  cal.seed = seed;
  cal.sigma2_N = snr_to_sigma2(options.snr_db, config.constellation.avg_power, config.T);
  cal.validate();

  RunStreams streams(seed);
  const auto idx = draw_symbol_indices(cal.constellation, n_cal, streams.symbols);
  const auto pilots = symbols_from_indices(cal.constellation, idx);
  const auto theta = simulate_phase_path(cal.beta, cal.T, cal.L_sim, n_cal, streams.phase);
  const auto v = mtr_matched_filter(simplified_samples(pilots, theta, cal, streams.noise), cal.L);

  std::vector<std::size_t> state(n_cal);
  for (std::size_t m = 0; m < n_cal; ++m)
    state[m] = quantize_phase(std::arg(v[m] * std::conj(pilots[m])), S);

  std::vector<double> T(S * S, 0.0);
  if (options.pool_rotations) {
    std::vector<double> hist(S, 1.0);  // add-one smoothing
    for (std::size_t m = 1; m < n_cal; ++m) hist[(state[m] + S - state[m - 1]) % S] += 1.0;
    double total = 0.0;
    for (double h : hist) total += h;
    for (std::size_t r = 0; r < S; ++r)
      for (std::size_t c = 0; c < S; ++c) T[r * S + c] = hist[(c + S - r) % S] / total;
  } else {
    std::fill(T.begin(), T.end(), 1.0);
    for (std::size_t m = 1; m < n_cal; ++m) T[state[m - 1] * S + state[m]] += 1.0;
    for (std::size_t r = 0; r < S; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < S; ++c) total += T[r * S + c];
      for (std::size_t c = 0; c < S; ++c) T[r * S + c] /= total;
    }
  }

  MtrConfig out;
  out.L = config.L;
  out.S = S;
  out.empirical_T = std::move(T);
  out.n_cal = n_cal;
  out.cal_seed = seed;
  return out;
}

TrellisModel mtr_model(const ChannelConfig& config, const MtrConfig& mtr) {
  config.validate();
  mtr.validate();
  if (mtr.L != config.L) throw ConfigError("mtr: calibration L does not match the channel L");
  TrellisModel m;
  m.state_phases = phase_midpoints(mtr.S);
  m.transition = std::make_shared<DenseTransition>(mtr.S, mtr.empirical_T);
  double gain = 0.0;
  for (double g : receiver_taps(config.pulse, config.L)) gain += g;
  m.taps = {gain * config.delta()};
  m.noise_var = config.sigma2_N * config.T;
  return m;
}

RateEstimate mtr_rate_estimate(const ChannelConfig& config, const MtrConfig& mtr) {
  const TrellisModel model = mtr_model(config, mtr);
  RateEstimate est;
  est.model = ModelKind::mtr;
  est.L = config.L;
  est.S = mtr.S;
  est.snr_db = config.snr_db();
  est.beta_T = config.beta * config.T;
  est.n_symb = config.n_symb;
  est.pulse = std::string(to_string(config.pulse.kind));
  est.constellation = config.constellation.name;
  est.seed = config.seed;

  RunStreams streams(config.seed);
  const auto idx = draw_symbol_indices(config.constellation, config.n_symb, streams.symbols);
  const auto x = symbols_from_indices(config.constellation, idx);
  const auto theta =
      simulate_phase_path(config.beta, config.T, config.L_sim, config.n_symb, streams.phase);
  const auto v = mtr_matched_filter(simplified_samples(x, theta, config, streams.noise), config.L);
  try {
    const RateTerms t = evaluate_rate(model, v, idx, config.constellation);
    est.rate_bits = t.rate_bits;
    est.log_q_conditional = t.log_q_conditional;
    est.log_q_marginal = t.log_q_marginal;
  } catch (const NumericalError& e) {
    throw NumericalError(e.what() + context("mtr", est.constellation, est.beta_T, est.snr_db,
                                            est.L, est.S, est.n_symb, est.seed));
  }
  return est;
}

void write_transition_csv(const std::filesystem::path& path, std::size_t S,
                          std::span<const double> row_major) {
  if (row_major.size() != S * S) throw ConfigError("write_transition_csv: matrix must be S x S");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  for (std::size_t r = 0; r < S; ++r) {
    for (std::size_t c = 0; c < S; ++c) out << (c ? "," : "") << row_major[r * S + c];
    out << '\n';
  }
}

std::vector<double> read_transition_csv(const std::filesystem::path& path, std::size_t& S_out) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open transition table " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ": bad number '" + cell + "' in row " +
                          std::to_string(rows.size() + 1));
      }
    }
    rows.push_back(std::move(row));
  }
  const std::size_t S = rows.size();
  if (S < 2) throw ConfigError(path.string() + ": need at least 2 rows");
  std::vector<double> m;
  m.reserve(S * S);
  for (std::size_t r = 0; r < S; ++r) {
    if (rows[r].size() != S)
      throw ConfigError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                        std::to_string(rows[r].size()) + " columns, expected " + std::to_string(S));
    m.insert(m.end(), rows[r].begin(), rows[r].end());
  }
  MtrConfig check;
  check.S = S;
  check.empirical_T = m;
  check.validate();
  S_out = S;
  return m;
}

}  // namespace pnrate
