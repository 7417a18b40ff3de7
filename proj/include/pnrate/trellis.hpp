#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pnrate/channel.hpp"
#include "pnrate/constellation.hpp"
#include "pnrate/phase_grid.hpp"

namespace pnrate {

/// Per-sample density of the quantized-phase auxiliary channel,
/// (1 / (pi s2 D)) exp(-|y - x D e^{js}|^2 / (s2 D)).
double likelihood(cplx y, cplx x, double s, double sigma2_N, double delta);

/// Transition step of the phase-state chain: out[s] = sum_t in[t] P(s | t).
class TransitionOperator {
 public:
  virtual ~TransitionOperator() = default;
  virtual std::size_t size() const = 0;
  virtual void apply(std::span<const double> in, std::span<double> out) const = 0;
};

/// Circulant kernel applied by FFT.
class FftCirculantTransition final : public TransitionOperator {
 public:
  explicit FftCirculantTransition(CirculantKernel kernel) : kernel_(std::move(kernel)) {}
  std::size_t size() const override { return kernel_.size(); }
  void apply(std::span<const double> in, std::span<double> out) const override {
    kernel_.apply(in, out);
  }

 private:
  CirculantKernel kernel_;
};

/// Circulant kernel applied by the O(S^2) sum; serial reference path.
class DirectCirculantTransition final : public TransitionOperator {
 public:
  explicit DirectCirculantTransition(std::vector<double> q_row) : q_(std::move(q_row)) {}
  std::size_t size() const override { return q_.size(); }
  void apply(std::span<const double> in, std::span<double> out) const override;

 private:
  std::vector<double> q_;
};

/// Arbitrary row-stochastic matrix, row = previous state, column = next.
class DenseTransition final : public TransitionOperator {
 public:
  DenseTransition(std::size_t S, std::vector<double> row_major);
  std::size_t size() const override { return S_; }
  void apply(std::span<const double> in, std::span<double> out) const override;
  double operator()(std::size_t from, std::size_t to) const { return m_[from * S_ + to]; }
  std::span<const double> data() const { return m_; }

 private:
  std::size_t S_;
  std::vector<double> m_;
};

/// Everything the forward recursions need to know about an auxiliary channel
/// y_k = taps[(k mod L)] * x_symb * e^{j s_k} + CN(0, noise_var), with s_k a
/// Markov chain on `state_phases`.
struct TrellisModel {
  std::vector<double> state_phases;
  std::shared_ptr<const TransitionOperator> transition;
  std::vector<double> taps;  ///< one per sample position in a symbol
  double noise_var = 1.0;

  std::size_t samples_per_symbol() const { return taps.size(); }
  std::size_t states() const { return state_phases.size(); }
  void validate() const;
};

/// Auxiliary channel of the multi-sample receiver: taps Delta * g(l Delta),
/// noise sigma2_N * Delta, circulant FFT transitions from `grid`.
TrellisModel multisample_model(const ChannelConfig& config, const PhaseGrid& grid);

/// Nonnegative weights with an accumulated natural-log normalizer; the
/// represented vector is exp(log_norm) * weights.
struct ForwardState {
  std::vector<double> weights;
  double log_norm = 0.0;

  static ForwardState uniform(std::size_t S);
  double log_total() const;
};

/// log q(y^n | x^n) in nats. `log_offsets`, when non-empty, adds a constant
/// per sample to every state's log-likelihood.
double forward_conditional(const TrellisModel& model, std::span<const cplx> y,
                           std::span<const cplx> x_symb,
                           std::span<const double> log_offsets = {});

enum class MarginalRoute {
  propagate,     ///< push the state vector through each candidate's L steps
  block_kernel,  ///< build the S x S block kernel per candidate, then multiply
};

/// log q(y^n) in nats for i.i.d. symbols drawn from the constellation prior.
double forward_marginal(const TrellisModel& model, std::span<const cplx> y,
                        const Constellation& constellation,
                        MarginalRoute route = MarginalRoute::propagate,
                        std::span<const double> log_offsets = {});

/// Per-candidate S x S kernels mapping the state before a symbol block to the
/// state after it, with the block's likelihoods absorbed. The true kernel is
/// exp(log_scale[c]) * at(c, s, s_prev).
struct SymbolBlockKernel {
  std::size_t states = 0;
  std::vector<std::vector<double>> matrices;  ///< column-major: (s, s_prev) at s_prev*S + s
  std::vector<double> log_scale;

  double at(std::size_t candidate, std::size_t s, std::size_t s_prev) const {
    return matrices[candidate][s_prev * states + s];
  }
};

SymbolBlockKernel block_kernel(const TrellisModel& model, std::span<const cplx> y_block,
                               const Constellation& constellation);

enum class ModelKind { multisample, baud, mtr };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct RateTerms {
  double log_q_conditional = 0.0;  ///< nats
  double log_q_marginal = 0.0;     ///< nats
  double rate_bits = 0.0;
};

/// Evaluates (1/n_symb) log2 q(y|x)/q(y) and enforces the per-realization
/// bound rate <= (1/n_symb) log2 1/p(x^n); throws NumericalError otherwise.
RateTerms evaluate_rate(const TrellisModel& model, std::span<const cplx> y,
                        std::span<const std::size_t> symbol_index,
                        const Constellation& constellation);

struct RateEstimate {
  double rate_bits = 0.0;
  ModelKind model = ModelKind::multisample;
  std::size_t L = 1;
  std::size_t S = 0;
  double snr_db = 0.0;
  double beta_T = 0.0;
  std::size_t n_symb = 0;
  std::string pulse;
  std::string constellation;
  std::uint64_t seed = 0;
  double log_q_conditional = 0.0;
  double log_q_marginal = 0.0;
};

/// Draws one realization of the waveform channel and returns its lower-bound
/// estimate. Errors carry the configuration in the message.
RateEstimate estimate_rate(const ChannelConfig& config, const PhaseGrid& grid);

struct SeedSummary {
  std::vector<double> rates;
  std::vector<std::uint64_t> seeds;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool converged = false;  ///< max - min <= tolerance

  double spread() const { return max - min; }
};

/// Seed i uses derive_seed(config.seed, "seed/i"). Seeds run in parallel.
SeedSummary multi_seed_rate(const ChannelConfig& config, const PhaseGrid& grid,
                            std::size_t n_seeds, double tolerance_bits = 0.05);

SeedSummary summarize(std::vector<double> rates, double tolerance_bits);

}  // namespace pnrate
