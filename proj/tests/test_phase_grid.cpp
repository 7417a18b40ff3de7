#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pnrate/errors.hpp"
#include "pnrate/phase_grid.hpp"

using namespace pnrate;
using std::numbers::pi;

namespace {
const std::size_t kSizes[] = {4, 16, 64, 128};
const double kVariances[] = {0.0, 1e-4, 0.1, 1.0, 10.0};
}  // namespace

TEST_CASE("wrapped Gaussian density") {
  CHECK_THROWS_AS(wrapped_gaussian_pdf(0.0, 0.0), ConfigError);
  // Narrow: matches the unwrapped Gaussian.
  CHECK(wrapped_gaussian_pdf(0.01, 1e-3) ==
        doctest::Approx(std::exp(-0.01 * 0.01 / 2e-3) / std::sqrt(2 * pi * 1e-3)));
  // Wide: uniform on the circle.
  CHECK(wrapped_gaussian_pdf(1.0, 100.0) == doctest::Approx(1.0 / (2 * pi)).epsilon(1e-9));
  for (double s2 : {1e-2, 0.5, 3.0, 20.0}) {
    const int n = 4000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += wrapped_gaussian_pdf(-pi + (i + 0.5) * 2 * pi / n, s2);
    CHECK(acc * 2 * pi / n == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(wrapped_gaussian_pdf(0.7, s2) == doctest::Approx(oracle::wrapped_gaussian(0.7, s2)).epsilon(1e-12));
    CHECK(wrapped_gaussian_pdf(0.7 + 2 * pi, s2) == doctest::Approx(wrapped_gaussian_pdf(0.7, s2)));
  }
}

TEST_CASE("phase midpoints and quantizer") {
  const auto mid = phase_midpoints(4);
  REQUIRE(mid.size() == 4);
  CHECK(mid[0] == doctest::Approx(-3 * pi / 4));
  CHECK(mid[3] == doctest::Approx(3 * pi / 4));
  for (std::size_t S : kSizes) {
    const auto m = phase_midpoints(S);
    for (std::size_t i = 0; i < S; ++i) {
      CHECK(quantize_phase(m[i], S) == i);
      CHECK(quantize_phase(m[i] + 2 * pi, S) == i);
      CHECK(quantize_phase(m[i] - 6 * pi, S) == i);
    }
  }
  CHECK(quantize_phase(-pi, 8) == 0);
  CHECK(quantize_phase(pi - 1e-12, 8) == 7);
}

TEST_CASE("transition row invariants across the size and variance matrix") {
  for (std::size_t S : kSizes)
    for (double s2 : kVariances) {
      CAPTURE(S);
      CAPTURE(s2);
      const auto q = transition_row(S, s2);
      REQUIRE(q.size() == S);
      CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      for (std::size_t d = 0; d < S; ++d) {
        CHECK(q[d] >= 0.0);
        CHECK(q[d] == q[(S - d) % S]);
      }
      if (s2 == 0.0) {
        CHECK(q[0] == 1.0);
        for (std::size_t d = 1; d < S; ++d) CHECK(q[d] == 0.0);
      }
    }
  for (std::size_t S : kSizes) {
    const auto q = transition_row(S, 100.0);
    for (double v : q) CHECK(std::abs(v - 1.0 / static_cast<double>(S)) < 1e-6);
  }
  CHECK_THROWS_AS(transition_row(48, 0.1), ConfigError);
  CHECK_THROWS_AS(transition_row(1, 0.1), ConfigError);
  CHECK_THROWS_AS(transition_row(16, -1.0), ConfigError);
}

TEST_CASE("closed-form transition row matches Simpson quadrature") {
  for (std::size_t S : {4u, 16u, 64u})
    for (double s2 : {1e-2, 0.1, 1.0, 10.0}) {
      CAPTURE(S);
      CAPTURE(s2);
      const auto q = transition_row(S, s2);
      const auto ref = oracle::transition_row_simpson(S, s2, 2048);
      const double ref_sum = std::accumulate(ref.begin(), ref.end(), 0.0);
      CHECK(ref_sum == doctest::Approx(1.0).epsilon(1e-6));
      for (std::size_t d = 0; d < S; ++d) CHECK(std::abs(q[d] - ref[d]) < 1e-8);
    }
}

TEST_CASE("transition row matches a Monte Carlo cell-to-cell histogram") {
  const std::size_t S = 4, draws = 10'000'000;
  const auto q = transition_row(S, 1.0);
  const auto mc = oracle::transition_row_monte_carlo(S, 1.0, draws, 2024);
  for (std::size_t d = 0; d < S; ++d) {
    const double se = std::sqrt(q[d] * (1 - q[d]) / static_cast<double>(draws));
    CHECK(std::abs(mc[d] - q[d]) < 3 * se);
  }
}

TEST_CASE("FFT circulant product matches the dense matrix product") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial)
    for (std::size_t S : kSizes) {
      std::vector<double> q(S), v(S);
      for (auto& x : q) x = u(rng);
      for (auto& x : v) x = u(rng);
      const auto fast = circulant_apply(q, v);
      const auto direct = circulant_apply_direct(q, v);
      const auto dense = oracle::dense_circulant_product(q, v);
      for (std::size_t i = 0; i < S; ++i) {
        CHECK(std::abs(fast[i] - dense[i]) <= 1e-10 * std::abs(dense[i]));
        CHECK(std::abs(direct[i] - dense[i]) <= 1e-12 * std::abs(dense[i]));
      }
    }
}

TEST_CASE("circulant kernel preserves mass and may run in place") {
  const PhaseGrid grid(64, 0.05);
  std::vector<double> v(64, 0.0);
  v[5] = 0.25;
  v[40] = 0.75;
  const auto u = grid.kernel().apply(v);
  CHECK(std::accumulate(u.begin(), u.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : u) CHECK(x >= 0.0);
  grid.kernel().apply(v, v);
  for (std::size_t i = 0; i < 64; ++i) CHECK(v[i] == doctest::Approx(u[i]).epsilon(1e-14));
  CHECK_THROWS_AS(grid.kernel().apply(std::vector<double>(32, 0.0)), ConfigError);
}

TEST_CASE("phase grid exposes midpoints and kernel row") {
  const PhaseGrid grid(16, 0.3);
  CHECK(grid.size() == 16);
  CHECK(grid.sigma2_W() == 0.3);
  const auto row = transition_row(16, 0.3);
  for (std::size_t d = 0; d < 16; ++d) CHECK(grid.q_row()[d] == row[d]);
  CHECK(grid.midpoints()[0] == doctest::Approx(-pi + pi / 16));
}
