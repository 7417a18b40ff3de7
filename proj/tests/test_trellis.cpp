#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "pnrate/errors.hpp"
#include "pnrate/trellis.hpp"

using namespace pnrate;
using std::numbers::pi;

namespace {

TrellisModel small_model(std::size_t S, double sigma2_W, std::vector<double> taps, double noise_var) {
  TrellisModel m;
  m.state_phases = phase_midpoints(S);
  m.transition = std::make_shared<FftCirculantTransition>(CirculantKernel(transition_row(S, sigma2_W)));
  m.taps = std::move(taps);
  m.noise_var = noise_var;
  return m;
}

std::vector<cplx> random_obs(std::size_t n, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<cplx> y(n);
  for (auto& v : y) v = cplx(g(rng), g(rng));
  return y;
}

// log q(y) by summing exp(forward_conditional) over every input sequence.
double enumerate_marginal(const TrellisModel& m, std::span<const cplx> y, const Constellation& c) {
  const std::size_t n = y.size() / m.samples_per_symbol();
  std::vector<std::size_t> idx(n, 0);
  double top = -INFINITY;
  std::vector<double> terms;
  while (true) {
    double lp = 0.0;
    for (auto i : idx) lp += std::log(c.prior[i]);
    const auto x = symbols_from_indices(c, idx);
    terms.push_back(lp + forward_conditional(m, y, x));
    top = std::max(top, terms.back());
    std::size_t k = 0;
    while (k < n && ++idx[k] == c.size()) idx[k++] = 0;
    if (k == n) break;
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("per-sample likelihood") {
  CHECK(likelihood(cplx(0, 0), cplx(0, 0), 0.0, 1.0, 1.0) == doctest::Approx(1.0 / pi));
  CHECK(likelihood(cplx(1, 0), cplx(1, 0), 0.0, 2.0, 0.5) ==
        doctest::Approx(std::exp(-0.25) / pi));
  CHECK(likelihood(cplx(0, 1), cplx(1, 0), pi / 2, 1.0, 1.0) == doctest::Approx(1.0 / pi));
}

TEST_CASE("single-sample recursions have closed forms") {
  const auto m = small_model(4, 0.3, {0.8}, 0.5);
  const cplx y(0.3, -0.4), x(1.0, 0.0);
  const std::vector<cplx> ys{y}, xs{x};
  // Q from a uniform start is still uniform.
  double expect = 0.0;
  for (double s : m.state_phases)
    expect += 0.25 * std::exp(-std::norm(y - 0.8 * x * std::polar(1.0, s)) / 0.5) / (pi * 0.5);
  CHECK(forward_conditional(m, ys, xs) == doctest::Approx(std::log(expect)).epsilon(1e-13));

  const auto bpsk = make_constellation("BPSK");
  double mix = 0.0;
  for (std::size_t c = 0; c < 2; ++c)
    for (double s : m.state_phases)
      mix += 0.5 * 0.25 *
             std::exp(-std::norm(y - 0.8 * bpsk.points[c] * std::polar(1.0, s)) / 0.5) / (pi * 0.5);
  CHECK(forward_marginal(m, ys, bpsk) == doctest::Approx(std::log(mix)).epsilon(1e-13));
}

TEST_CASE("forward conditional equals the exhaustive state-path sum") {
  struct Case { std::size_t n, S, L; double s2; };
  for (Case c : {Case{3, 4, 1, 0.4}, Case{4, 8, 1, 0.1}, Case{4, 4, 2, 1.0}, Case{6, 2, 3, 0.5}}) {
    CAPTURE(c.S);
    CAPTURE(c.n);
    std::vector<double> taps(c.L);
    for (std::size_t l = 0; l < c.L; ++l) taps[l] = 0.5 + 0.25 * l;
    const auto m = small_model(c.S, c.s2, taps, 0.7);
    const auto y = random_obs(c.n, 100 + c.S);
    const auto q = make_constellation("QPSK");
    std::vector<cplx> x;
    for (std::size_t i = 0; i < c.n / c.L; ++i) x.push_back(q.points[i % 4]);
    const auto P = oracle::dense_from_circulant(transition_row(c.S, c.s2));
    const double ref = oracle::path_sum_log_conditional(P, m.state_phases, taps, 0.7, y, x);
    CHECK(rel(forward_conditional(m, y, x), ref) <= 1e-8);
  }
}

TEST_CASE("forward marginal equals enumeration over inputs") {
  struct Case { std::size_t n_symb, C, L, S; };
  for (Case c : {Case{3, 2, 2, 4}, Case{2, 4, 2, 8}, Case{4, 2, 1, 16}, Case{2, 16, 3, 4}}) {
    CAPTURE(c.S);
    CAPTURE(c.C);
    const auto con = c.C == 2 ? make_constellation("BPSK")
                     : c.C == 4 ? make_constellation("QPSK") : make_constellation("16-QAM");
    std::vector<double> taps(c.L, 0.6);
    const auto m = small_model(c.S, 0.2, taps, 0.4);
    const auto y = random_obs(c.n_symb * c.L, 7 + c.S);
    const double ref = enumerate_marginal(m, y, con);
    for (auto route : {MarginalRoute::propagate, MarginalRoute::block_kernel})
      CHECK(rel(forward_marginal(m, y, con, route), ref) <= 1e-8);
  }
}

TEST_CASE("forward marginal matches the flat product-chain recursion with a skewed prior") {
  const auto con = custom_constellation("tri", {cplx(1, 0), cplx(-0.5, 0.8), cplx(0, -1)}, {0.5, 0.3, 0.2});
  const std::vector<double> taps{0.3, 0.9, 0.5};
  const auto m = small_model(16, 0.05, taps, 0.2);
  const auto y = random_obs(60, 99, 0.7);
  const auto P = oracle::dense_from_circulant(transition_row(16, 0.05));
  const double ref = oracle::product_chain_log_marginal(P, m.state_phases, taps, 0.2, y, con.points, con.prior);
  CHECK(rel(forward_marginal(m, y, con), ref) <= 1e-9);
  CHECK(rel(forward_marginal(m, y, con, MarginalRoute::block_kernel), ref) <= 1e-9);
}

TEST_CASE("FFT and direct transitions give the same recursion") {
  const auto cfg = make_channel_config(PulseKind::square, make_constellation("QPSK"), 0.25, 15.0, 2, 64, 100, 6);
  const PhaseGrid grid(64, cfg.sigma2_W());
  const auto fft = multisample_model(cfg, grid);
  auto direct = fft;
  direct.transition = std::make_shared<DirectCirculantTransition>(transition_row(64, cfg.sigma2_W()));
  auto dense = fft;
  dense.transition = std::make_shared<DenseTransition>(64, oracle::dense_from_circulant(transition_row(64, cfg.sigma2_W())));
  const auto rec = simulate(cfg);
  const double a = forward_conditional(fft, rec.y, rec.x_symb);
  CHECK(rel(forward_conditional(direct, rec.y, rec.x_symb), a) <= 1e-9);
  CHECK(rel(forward_conditional(dense, rec.y, rec.x_symb), a) <= 1e-9);
  const double b = forward_marginal(fft, rec.y, cfg.constellation);
  CHECK(rel(forward_marginal(direct, rec.y, cfg.constellation), b) <= 1e-9);
}

TEST_CASE("block kernel matches explicit sums over intermediate states") {
  const std::size_t S = 4;
  const auto con = make_constellation("QPSK");
  const auto q = transition_row(S, 0.5);
  const auto ph = phase_midpoints(S);
  for (std::size_t L : {1u, 2u}) {
    std::vector<double> taps(L);
    for (std::size_t l = 0; l < L; ++l) taps[l] = 0.4 + 0.3 * l;
    const auto m = small_model(S, 0.5, taps, 0.3);
    const auto y = random_obs(L, 31 + L);
    const auto K = block_kernel(m, y, con);
    auto lik = [&](std::size_t l, std::size_t c, std::size_t s) {
      return std::exp(-std::norm(y[l] - taps[l] * con.points[c] * std::polar(1.0, ph[s])) / 0.3) / (pi * 0.3);
    };
    for (std::size_t c = 0; c < con.size(); ++c)
      for (std::size_t sp = 0; sp < S; ++sp)
        for (std::size_t s = 0; s < S; ++s) {
          double ref = 0.0;
          if (L == 1) {
            ref = q[(s + S - sp) % S] * lik(0, c, s);
          } else {
            for (std::size_t mid = 0; mid < S; ++mid)
              ref += q[(mid + S - sp) % S] * lik(0, c, mid) * q[(s + S - mid) % S] * lik(1, c, s);
          }
          CHECK(std::exp(K.log_scale[c]) * K.at(c, s, sp) == doctest::Approx(ref).epsilon(1e-12));
        }
  }
}

TEST_CASE("per-sample constant offsets shift both log terms equally") {
  const auto m = small_model(32, 0.05, {0.5, 0.5}, 0.2);
  const auto q = make_constellation("QPSK");
  const auto y = random_obs(40, 12);
  std::vector<cplx> x(20, q.points[1]);
  std::vector<double> off(40);
  double total = 0.0;
  for (std::size_t k = 0; k < 40; ++k) total += off[k] = std::sin(static_cast<double>(k)) * 3.0;
  const double c0 = forward_conditional(m, y, x), c1 = forward_conditional(m, y, x, off);
  const double m0 = forward_marginal(m, y, q), m1 = forward_marginal(m, y, q, MarginalRoute::propagate, off);
  CHECK(std::abs((c1 - c0) - total) < 1e-12 * std::max(1.0, std::abs(c0)));
  CHECK(std::abs((c1 - m1) - (c0 - m0)) < 1e-12 * std::max(1.0, std::abs(c0)));
}

TEST_CASE("rotation ambiguity costs log2 of the rotation group") {
  // Aligned 16-PSK states with identity transitions: q(y|x) is invariant
  // under the 16 rotations of x, so q(y) >= 16 q(y|x) / 16^n.
  const auto con = make_constellation("16-PSK");
  TrellisModel m;
  m.state_phases = phase_midpoints(16);
  m.transition = std::make_shared<FftCirculantTransition>(CirculantKernel(transition_row(16, 0.0)));
  m.taps = {1.0};
  m.noise_var = 0.01;
  std::vector<std::size_t> idx(12);
  std::vector<cplx> y(12);
  for (std::size_t i = 0; i < 12; ++i) {
    idx[i] = (3 * i) % 16;
    y[i] = con.points[idx[i]] * std::polar(1.0, pi / 16);
  }
  const auto t = evaluate_rate(m, y, idx, con);
  CHECK(t.rate_bits <= 4.0 - 4.0 / 12.0 + 1e-9);
  CHECK(t.rate_bits == doctest::Approx(4.0 - 4.0 / 12.0).epsilon(1e-3));
}

TEST_CASE("single-point alphabet gives zero rate") {
  const auto one = custom_constellation("one", {cplx(1, 0)});
  const auto m = small_model(16, 0.1, {0.5, 0.5}, 0.3);
  const auto y = random_obs(50, 8);
  const std::vector<std::size_t> idx(25, 0);
  const auto t = evaluate_rate(m, y, idx, one);
  CHECK(std::abs(t.rate_bits) < 1e-12);
}

TEST_CASE("rate is near zero at very low SNR") {
  auto cfg = make_channel_config(PulseKind::square, make_constellation("QPSK"), 0.0, -20.0, 1, 16, 2000, 3);
  const PhaseGrid grid(16, cfg.sigma2_W());
  const auto est = estimate_rate(cfg, grid);
  CHECK(std::abs(est.rate_bits) < 0.05);
  CHECK(est.rate_bits <= 2.0);
}

TEST_CASE("rate estimate metadata and determinism") {
  auto cfg = make_channel_config(PulseKind::square, make_constellation("QPSK"), 0.25, 10.0, 4, 64, 500, 9);
  const PhaseGrid grid(32, cfg.sigma2_W());
  const auto a = estimate_rate(cfg, grid);
  const auto b = estimate_rate(cfg, grid);
  CHECK(a.rate_bits == b.rate_bits);
  CHECK(a.L == 4);
  CHECK(a.S == 32);
  CHECK(a.snr_db == doctest::Approx(10.0));
  CHECK(a.beta_T == doctest::Approx(0.25));
  CHECK(a.pulse == "square");
  CHECK(a.rate_bits > 0.5);
  CHECK(a.rate_bits < 2.0);
  CHECK(a.rate_bits == doctest::Approx((a.log_q_conditional - a.log_q_marginal) / (500 * std::log(2.0))));
}

TEST_CASE("multi-seed estimate") {
  auto cfg = make_channel_config(PulseKind::square, make_constellation("QPSK"), 0.25, 10.0, 2, 64, 400, 1);
  const PhaseGrid grid(16, cfg.sigma2_W());
  const auto s = multi_seed_rate(cfg, grid, 4, 10.0);
  REQUIRE(s.rates.size() == 4);
  CHECK(s.converged);
  CHECK(s.min <= s.mean);
  CHECK(s.mean <= s.max);
  for (std::size_t i = 0; i < 4; ++i) {
    auto c = cfg;
    c.seed = s.seeds[i];
    CHECK(estimate_rate(c, grid).rate_bits == s.rates[i]);
  }
  CHECK_THROWS_AS(multi_seed_rate(cfg, grid, 1), ConfigError);
  CHECK_FALSE(summarize({1.0, 1.2}, 0.1).converged);
  CHECK_FALSE(summarize({1.0}, 0.1).converged);
}

TEST_CASE("model validation and length checks") {
  auto m = small_model(8, 0.1, {1.0, 1.0}, 0.5);
  const auto q = make_constellation("QPSK");
  const auto y = random_obs(3, 1);
  std::vector<cplx> x(1, q.points[0]);
  CHECK_THROWS_AS(forward_conditional(m, y, x), ConfigError);
  m.noise_var = 0.0;
  CHECK_THROWS_AS(forward_marginal(m, random_obs(2, 1), q), ConfigError);
  CHECK_THROWS_AS(parse_model_kind("viterbi"), ConfigError);
  CHECK(parse_model_kind("mtr") == ModelKind::mtr);
}

TEST_CASE("extreme observations do not underflow the recursion") {
  const auto m = small_model(64, 1e-6, {1.0}, 1e-6);
  const auto q = make_constellation("QPSK");
  std::vector<cplx> y(20);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = (k % 2 ? 1.0 : -1.0) * std::polar(1.0, pi / 4 + 0.3 * k);
  std::vector<cplx> x(20, q.points[0]);
  double c = 0.0;
  CHECK_NOTHROW(c = forward_conditional(m, y, x));
  CHECK(std::isfinite(c));
  CHECK(std::isfinite(forward_marginal(m, y, q)));
}
