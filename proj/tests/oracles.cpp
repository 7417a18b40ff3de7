#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace oracle {

namespace {
constexpr double kPi = std::numbers::pi;

double lik(cplx y, cplx mean, double s, double v) {
  return std::exp(-std::norm(y - mean * std::polar(1.0, s)) / v) / (kPi * v);
}
}  // namespace

std::vector<double> dense_from_circulant(std::span<const double> q_row) {
  const std::size_t S = q_row.size();
  std::vector<double> P(S * S);
  for (std::size_t from = 0; from < S; ++from)
    for (std::size_t to = 0; to < S; ++to) P[from * S + to] = q_row[(to + S - from) % S];
  return P;
}

std::vector<double> dense_circulant_product(std::span<const double> q_row, std::span<const double> v) {
  const std::size_t S = q_row.size();
  const auto P = dense_from_circulant(q_row);
  std::vector<double> u(S, 0.0);
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = 0; j < S; ++j) u[i] += P[j * S + i] * v[j];
  return u;
}

double path_sum_log_conditional(std::span<const double> P, std::span<const double> phases,
                                std::span<const double> taps, double noise_var,
                                std::span<const cplx> y, std::span<const cplx> x_symb) {
  const std::size_t S = phases.size();
  const std::size_t n = y.size();
  const std::size_t L = taps.size();
  std::vector<std::size_t> path(n, 0);
  long double total = 0.0L;
  while (true) {
    // p(s_1) = sum_{s_0} (1/S) P(s_1 | s_0)
    long double prob = 0.0L;
    for (std::size_t s0 = 0; s0 < S; ++s0) prob += P[s0 * S + path[0]] / static_cast<long double>(S);
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) prob *= P[path[k - 1] * S + path[k]];
      prob *= lik(y[k], taps[k % L] * x_symb[k / L], phases[path[k]], noise_var);
    }
    total += prob;
    std::size_t k = 0;
    while (k < n && ++path[k] == S) path[k++] = 0;
    if (k == n) break;
  }
  return static_cast<double>(std::log(total));
}

double product_chain_log_marginal(std::span<const double> P, std::span<const double> phases,
                                  std::span<const double> taps, double noise_var,
                                  std::span<const cplx> y, std::span<const cplx> points,
                                  std::span<const double> prior) {
  const std::size_t S = phases.size();
  const std::size_t C = points.size();
  const std::size_t L = taps.size();
  // alpha[s * C + c]
  std::vector<double> alpha(S * C, 0.0), next(S * C);
  for (std::size_t s = 0; s < S; ++s) alpha[s * C] = 1.0 / static_cast<double>(S);
  double log_norm = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    const bool new_symbol = (k % L) == 0;
    for (std::size_t sp = 0; sp < S; ++sp)
      for (std::size_t cp = 0; cp < C; ++cp) {
        const double a = alpha[sp * C + cp];
        if (a == 0.0) continue;
        for (std::size_t s = 0; s < S; ++s) {
          const double t = a * P[sp * S + s];
          if (new_symbol) {
            for (std::size_t c = 0; c < C; ++c) next[s * C + c] += t * prior[c];
          } else {
            next[s * C + cp] += t;
          }
        }
      }
    double sum = 0.0;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t c = 0; c < C; ++c) {
        next[s * C + c] *= lik(y[k], taps[k % L] * points[c], phases[s], noise_var);
        sum += next[s * C + c];
      }
    for (double& v : next) v /= sum;
    log_norm += std::log(sum);
    alpha.swap(next);
  }
  return log_norm;
}

double awgn_mutual_information(std::span<const cplx> points, double noise_var, int nodes) {
  const double sd = std::sqrt(noise_var / 2.0);
  const double lim = 8.0 * sd;
  const double h = 2.0 * lim / (nodes - 1);
  const std::size_t M = points.size();
  double acc = 0.0;
  for (int a = 0; a < nodes; ++a)
    for (int b = 0; b < nodes; ++b) {
      const cplx z(-lim + a * h, -lim + b * h);
      const double w = std::exp(-std::norm(z) / noise_var) / (kPi * noise_var) * h * h;
      for (std::size_t i = 0; i < M; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < M; ++j)
          d += std::exp(-(std::norm(points[i] - points[j] + z) - std::norm(z)) / noise_var);
        acc += w * std::log2(d);
      }
    }
  return std::log2(static_cast<double>(M)) - acc / static_cast<double>(M);
}

double wrapped_gaussian(double w, double sigma2) {
  double sum = 0.0;
  for (int i = -60; i <= 60; ++i) {
    const double d = w - 2.0 * kPi * i;
    sum += std::exp(-d * d / (2.0 * sigma2)) / std::sqrt(2.0 * kPi * sigma2);
  }
  return sum;
}

std::vector<double> transition_row_simpson(std::size_t S, double sigma2, int nodes) {
  const double h = 2.0 * kPi / static_cast<double>(S);
  std::vector<double> q(S);
  auto simpson = [&](double a, double b, auto&& f) {
    const double step = (b - a) / nodes;
    double s = f(a) + f(b);
    for (int i = 1; i < nodes; ++i) s += f(a + i * step) * ((i % 2) ? 4.0 : 2.0);
    return s * step / 3.0;
  };
  for (std::size_t d = 0; d < S; ++d) {
    const double c = h * static_cast<double>(d);
    auto tri = [&](double u) { return wrapped_gaussian(u, sigma2) * (1.0 - std::abs(u - c) / h); };
    q[d] = simpson(c - h, c, tri) + simpson(c, c + h, tri);
  }
  return q;
}

std::vector<double> transition_row_monte_carlo(std::size_t S, double sigma2, std::size_t draws,
                                               unsigned seed) {
  std::mt19937_64 rng(seed);
  const double h = 2.0 * kPi / static_cast<double>(S);
  std::uniform_real_distribution<double> start(-kPi, -kPi + h);  // cell of the first midpoint
  std::normal_distribution<double> inc(0.0, std::sqrt(sigma2));
  std::vector<double> counts(S, 0.0);
  for (std::size_t i = 0; i < draws; ++i) {
    double phi = start(rng) + inc(rng) + kPi;
    phi = std::fmod(phi, 2.0 * kPi);
    if (phi < 0) phi += 2.0 * kPi;
    auto cell = static_cast<std::size_t>(phi / h);
    if (cell >= S) cell = S - 1;
    counts[cell] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(draws);
  return counts;
}

}  // namespace oracle
