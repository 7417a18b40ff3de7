#include "pnrate/trellis.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "pnrate/errors.hpp"
#include "pnrate/rng.hpp"

namespace pnrate {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<cplx> rotations(std::span<const double> phases) {
  std::vector<cplx> r;
  r.reserve(phases.size());
  for (double s : phases) r.push_back(std::polar(1.0, s));
  return r;
}

// Multiplies w by the per-state likelihood of one sample and renormalizes w to
// unit sum. Returns the log of the factor taken out, or -inf when the shifted
// product underflowed everywhere (w is then garbage).
double absorb(std::span<double> w, std::span<const cplx> rot, cplx y, cplx mean,
              double noise_var, std::span<double> dist) {
  const std::size_t S = w.size();
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < S; ++s) {
    dist[s] = std::norm(y - mean * rot[s]);
    dmin = std::min(dmin, dist[s]);
  }
  const double inv_var = 1.0 / noise_var;
  double sum = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    w[s] *= std::exp(-(dist[s] - dmin) * inv_var);
    sum += w[s];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) return kNegInf;
  const double inv = 1.0 / sum;
  for (double& v : w) v *= inv;
  return std::log(sum) - dmin * inv_var - std::log(std::numbers::pi * noise_var);
}

// Log-domain variant of absorb(): shifts by the best state among those with
// nonzero prior weight.
double absorb_robust(std::span<double> w, std::span<const cplx> rot, cplx y, cplx mean,
                     double noise_var, std::span<double> logw) {
  const std::size_t S = w.size();
  const double inv_var = 1.0 / noise_var;
  double best = kNegInf;
  for (std::size_t s = 0; s < S; ++s) {
    logw[s] = (w[s] > 0.0) ? std::log(w[s]) - std::norm(y - mean * rot[s]) * inv_var : kNegInf;
    best = std::max(best, logw[s]);
  }
  if (!std::isfinite(best)) return kNegInf;
  double sum = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    w[s] = std::exp(logw[s] - best);
    sum += w[s];
  }
  for (double& v : w) v /= sum;
  return std::log(sum) + best - std::log(std::numbers::pi * noise_var);
}

// out = diag(lik) * T * in, normalized to unit sum. Returns the log factor
// removed, -inf if all mass vanished.
double forward_step(const TrellisModel& model, std::span<const cplx> rot,
                    std::span<const double> in, std::span<double> out, cplx y, cplx mean,
                    std::span<double> scratch) {
  model.transition->apply(in, out);
  double f = absorb(out, rot, y, mean, model.noise_var, scratch);
  if (f == kNegInf) {
    // The likeliest states carried (numerically) zero prior mass.
    model.transition->apply(in, out);
    f = absorb_robust(out, rot, y, mean, model.noise_var, scratch);
  }
  return f;
}

[[noreturn]] void fail_at(const char* where, std::size_t k) {
  throw NumericalError(std::string(where) + ": forward weights vanished or became non-finite at sample " +
                       std::to_string(k));
}

void check_lengths(const TrellisModel& model, std::span<const cplx> y,
                   std::span<const double> log_offsets) {
  model.validate();
  if (y.size() % model.samples_per_symbol() != 0)
    throw ConfigError("observation length is not a multiple of the samples per symbol");
  if (!log_offsets.empty() && log_offsets.size() != y.size())
    throw ConfigError("log_offsets must be empty or match the observation length");
}

double offset_at(std::span<const double> log_offsets, std::size_t k) {
  return log_offsets.empty() ? 0.0 : log_offsets[k];
}

}  // namespace

double likelihood(cplx y, cplx x, double s, double sigma2_N, double delta) {
  const double v = sigma2_N * delta;
  return std::exp(-std::norm(y - x * delta * std::polar(1.0, s)) / v) / (std::numbers::pi * v);
}

void DirectCirculantTransition::apply(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = q_.size();
  if (in.size() != n || out.size() != n) throw ConfigError("transition: length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += q_[(i + n - j) % n] * in[j];
    out[i] = acc;
  }
}

DenseTransition::DenseTransition(std::size_t S, std::vector<double> row_major)
    : S_(S), m_(std::move(row_major)) {
  if (S_ == 0 || m_.size() != S_ * S_)
    throw ConfigError("DenseTransition: matrix must be S x S");
  for (double v : m_)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ConfigError("DenseTransition: entries must be finite and nonnegative");
}

void DenseTransition::apply(std::span<const double> in, std::span<double> out) const {
  if (in.size() != S_ || out.size() != S_) throw ConfigError("transition: length mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t from = 0; from < S_; ++from) {
    const double w = in[from];
    if (w == 0.0) continue;
    const double* row = &m_[from * S_];
    for (std::size_t to = 0; to < S_; ++to) out[to] += w * row[to];
  }
}

void TrellisModel::validate() const {
  if (state_phases.empty()) throw ConfigError("trellis model: no phase states");
  if (!transition || transition->size() != state_phases.size())
    throw ConfigError("trellis model: transition size does not match the state count");
  if (taps.empty()) throw ConfigError("trellis model: need at least one sample per symbol");
  if (!(noise_var > 0.0)) throw ConfigError("trellis model: noise variance must be > 0");
}

TrellisModel multisample_model(const ChannelConfig& config, const PhaseGrid& grid) {
  config.validate();
  TrellisModel m;
  m.state_phases.assign(grid.midpoints().begin(), grid.midpoints().end());
  m.transition = std::make_shared<FftCirculantTransition>(grid.kernel());
  m.taps = receiver_taps(config.pulse, config.L);
  for (double& t : m.taps) t *= config.delta();
  m.noise_var = config.sigma2_N * config.delta();
  return m;
}

ForwardState ForwardState::uniform(std::size_t S) {
  return ForwardState{std::vector<double>(S, 1.0 / static_cast<double>(S)), 0.0};
}

double ForwardState::log_total() const {
  return log_norm + std::log(std::accumulate(weights.begin(), weights.end(), 0.0));
}

double forward_conditional(const TrellisModel& model, std::span<const cplx> y,
                           std::span<const cplx> x_symb, std::span<const double> log_offsets) {
  check_lengths(model, y, log_offsets);
  const std::size_t L = model.samples_per_symbol();
  if (y.size() != x_symb.size() * L)
    throw ConfigError("forward_conditional: |y| must equal n_symb * L");

  const std::size_t S = model.states();
  const auto rot = rotations(model.state_phases);
  ForwardState st = ForwardState::uniform(S);
  std::vector<double> next(S), scratch(S);

  for (std::size_t k = 0; k < y.size(); ++k) {
    const cplx mean = model.taps[k % L] * x_symb[k / L];
    const double f = forward_step(model, rot, st.weights, next, y[k], mean, scratch);
    if (!std::isfinite(f)) fail_at("forward_conditional", k);
    st.log_norm += f + offset_at(log_offsets, k);
    st.weights.swap(next);
  }
  return st.log_total();
}

SymbolBlockKernel block_kernel(const TrellisModel& model, std::span<const cplx> y_block,
                               const Constellation& constellation) {
  model.validate();
  const std::size_t L = model.samples_per_symbol();
  if (y_block.size() != L) throw ConfigError("block_kernel: block must hold exactly L samples");

  const std::size_t S = model.states();
  const std::size_t C = constellation.size();
  const auto rot = rotations(model.state_phases);
  const double inv_var = 1.0 / model.noise_var;
  const double log_prefactor = -std::log(std::numbers::pi * model.noise_var);

  SymbolBlockKernel out;
  out.states = S;
  out.matrices.assign(C, std::vector<double>(S * S, 0.0));
  out.log_scale.assign(C, 0.0);

#pragma omp parallel for schedule(static) if (C * S * S * L > (1u << 18))
  for (std::size_t c = 0; c < C; ++c) {
    auto& M = out.matrices[c];
    for (std::size_t j = 0; j < S; ++j) M[j * S + j] = 1.0;
    double log_scale = 0.0;
    std::vector<double> col(S), dist(S), weight(S);

    for (std::size_t l = 0; l < L && log_scale != kNegInf; ++l) {
      const cplx mean = model.taps[l] * constellation.points[c];
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < S; ++s) {
        dist[s] = std::norm(y_block[l] - mean * rot[s]);
        dmin = std::min(dmin, dist[s]);
      }
      for (std::size_t s = 0; s < S; ++s) weight[s] = std::exp(-(dist[s] - dmin) * inv_var);

      double peak = 0.0;
      for (std::size_t j = 0; j < S; ++j) {
        std::span<double> mcol(&M[j * S], S);
        model.transition->apply(mcol, col);
        for (std::size_t s = 0; s < S; ++s) {
          mcol[s] = col[s] * weight[s];
          peak = std::max(peak, mcol[s]);
        }
      }
      if (!(peak > 0.0) || !std::isfinite(peak)) {
        log_scale = kNegInf;
        break;
      }
      for (double& v : M) v /= peak;
      log_scale += std::log(peak) - dmin * inv_var + log_prefactor;
    }
    out.log_scale[c] = log_scale;
  }
  return out;
}

double forward_marginal(const TrellisModel& model, std::span<const cplx> y,
                        const Constellation& constellation, MarginalRoute route,
                        std::span<const double> log_offsets) {
  check_lengths(model, y, log_offsets);
  const std::size_t L = model.samples_per_symbol();
  const std::size_t n_symb = y.size() / L;
  const std::size_t S = model.states();
  const std::size_t C = constellation.size();
  const auto rot = rotations(model.state_phases);

  std::vector<double> log_prior(C);
  for (std::size_t c = 0; c < C; ++c)
    log_prior[c] = constellation.prior[c] > 0.0 ? std::log(constellation.prior[c]) : kNegInf;

  ForwardState psi = ForwardState::uniform(S);
  std::vector<std::vector<double>> phi(C, std::vector<double>(S));
  std::vector<std::vector<double>> tmp(C, std::vector<double>(S));
  std::vector<std::vector<double>> scratch(C, std::vector<double>(S));
  std::vector<double> cand_log(C);

  for (std::size_t m = 0; m < n_symb; ++m) {
    const auto block = y.subspan(m * L, L);
    double block_offset = 0.0;
    for (std::size_t l = 0; l < L; ++l) block_offset += offset_at(log_offsets, m * L + l);

    if (route == MarginalRoute::propagate) {
#pragma omp parallel for schedule(static) if (C * S * L > (1u << 16))
      for (std::size_t c = 0; c < C; ++c) {
        double lc = log_prior[c];
        std::copy(psi.weights.begin(), psi.weights.end(), phi[c].begin());
        for (std::size_t l = 0; l < L && lc != kNegInf; ++l) {
          const cplx mean = model.taps[l] * constellation.points[c];
          lc += forward_step(model, rot, phi[c], tmp[c], block[l], mean, scratch[c]);
          phi[c].swap(tmp[c]);
        }
        cand_log[c] = lc;
      }
    } else {
      const SymbolBlockKernel K = block_kernel(model, block, constellation);
      for (std::size_t c = 0; c < C; ++c) {
        std::fill(phi[c].begin(), phi[c].end(), 0.0);
        cand_log[c] = log_prior[c] + K.log_scale[c];
        if (cand_log[c] == kNegInf) continue;
        for (std::size_t sp = 0; sp < S; ++sp) {
          const double w = psi.weights[sp];
          if (w == 0.0) continue;
          for (std::size_t s = 0; s < S; ++s) phi[c][s] += K.at(c, s, sp) * w;
        }
        const double total = std::accumulate(phi[c].begin(), phi[c].end(), 0.0);
        if (!(total > 0.0)) {
          cand_log[c] = kNegInf;
          continue;
        }
        for (double& v : phi[c]) v /= total;
        cand_log[c] += std::log(total);
      }
    }

    const double top = *std::max_element(cand_log.begin(), cand_log.end());
    if (!std::isfinite(top)) fail_at("forward_marginal", m * L);
    std::fill(psi.weights.begin(), psi.weights.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      if (cand_log[c] == kNegInf) continue;
      const double w = std::exp(cand_log[c] - top);
      for (std::size_t s = 0; s < S; ++s) psi.weights[s] += w * phi[c][s];
    }
    const double total = std::accumulate(psi.weights.begin(), psi.weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) fail_at("forward_marginal", m * L);
    for (double& v : psi.weights) v /= total;
    psi.log_norm += top + std::log(total) + block_offset;
  }
  return psi.log_total();
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::multisample: return "multisample";
    case ModelKind::baud: return "baud";
    case ModelKind::mtr: return "mtr";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "multisample") return ModelKind::multisample;
  if (name == "baud") return ModelKind::baud;
  if (name == "mtr") return ModelKind::mtr;
  throw ConfigError("unknown model '" + std::string(name) + "' (expected multisample, baud or mtr)");
}

RateTerms evaluate_rate(const TrellisModel& model, std::span<const cplx> y,
                        std::span<const std::size_t> symbol_index,
                        const Constellation& constellation) {
  const auto x_symb = symbols_from_indices(constellation, symbol_index);
  RateTerms t;
  t.log_q_conditional = forward_conditional(model, y, x_symb);
  t.log_q_marginal = forward_marginal(model, y, constellation);
  const double n = static_cast<double>(symbol_index.size());
  t.rate_bits = (t.log_q_conditional - t.log_q_marginal) / (n * std::numbers::ln2);

  double self_info = 0.0;
  for (auto i : symbol_index) self_info -= std::log2(constellation.prior[i]);
  self_info /= n;
  if (!(t.rate_bits <= self_info + 1e-9)) {
    std::ostringstream os;
    os << "rate estimate " << t.rate_bits << " bits exceeds the per-realization bound "
       << self_info << " bits";
    throw NumericalError(os.str());
  }
  return t;
}

RateEstimate estimate_rate(const ChannelConfig& config, const PhaseGrid& grid) {
  RateEstimate est;
  est.model = ModelKind::multisample;
  est.L = config.L;
  est.S = grid.size();
  est.snr_db = config.snr_db();
  est.beta_T = config.beta * config.T;
  est.n_symb = config.n_symb;
  est.pulse = std::string(to_string(config.pulse.kind));
  est.constellation = config.constellation.name;
  est.seed = config.seed;
  try {
    const SampleRecord rec = simulate(config);
    const TrellisModel model = multisample_model(config, grid);
    const RateTerms t = evaluate_rate(model, rec.y, rec.symbol_index, config.constellation);
    est.rate_bits = t.rate_bits;
    est.log_q_conditional = t.log_q_conditional;
    est.log_q_marginal = t.log_q_marginal;
  } catch (const NumericalError& e) {
    std::ostringstream os;
    os << e.what() << " [multisample " << est.constellation << " " << est.pulse
       << " beta_T=" << est.beta_T << " snr_db=" << est.snr_db << " L=" << est.L
       << " S=" << est.S << " n_symb=" << est.n_symb << " seed=" << est.seed << "]";
    throw NumericalError(os.str());
  }
  return est;
}

SeedSummary summarize(std::vector<double> rates, double tolerance_bits) {
  SeedSummary s;
  s.rates = std::move(rates);
  if (s.rates.empty()) return s;
  s.mean = std::accumulate(s.rates.begin(), s.rates.end(), 0.0) / static_cast<double>(s.rates.size());
  const auto [lo, hi] = std::minmax_element(s.rates.begin(), s.rates.end());
  s.min = *lo;
  s.max = *hi;
  s.converged = s.rates.size() >= 2 && s.spread() <= tolerance_bits;
  return s;
}

SeedSummary multi_seed_rate(const ChannelConfig& config, const PhaseGrid& grid,
                            std::size_t n_seeds, double tolerance_bits) {
  if (n_seeds < 2) throw ConfigError("multi_seed_rate: need at least 2 seeds");
  std::vector<double> rates(n_seeds);
  std::vector<std::uint64_t> seeds(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i)
    seeds[i] = derive_seed(config.seed, "seed/" + std::to_string(i));

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n_seeds; ++i) {
    try {
      ChannelConfig c = config;
      c.seed = seeds[i];
      rates[i] = estimate_rate(c, grid).rate_bits;
    } catch (...) {
#pragma omp critical(pnrate_seed_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  SeedSummary s = summarize(std::move(rates), tolerance_bits);
  s.seeds = std::move(seeds);
  return s;
}

}  // namespace pnrate
