#include "pnrate/phase_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include "pnrate/errors.hpp"

namespace pnrate {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

int wrap_count(double sigma2) {
  return static_cast<int>(std::ceil((6.0 * std::sqrt(sigma2) + kPi) / kTwoPi)) + 1;
}

double reduce_angle(double w) {
  double r = std::fmod(w + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r - kPi;
}

double normal_pdf(double z, double sigma) {
  const double t = z / sigma;
  return std::exp(-0.5 * t * t) / (sigma * std::sqrt(kTwoPi));
}

// P(lo < Z < hi) for Z ~ N(0, sigma^2), without cancellation in the tails.
double normal_mass(double lo, double hi, double sigma) {
  const double a = lo / (sigma * std::numbers::sqrt2);
  const double b = hi / (sigma * std::numbers::sqrt2);
  if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
  if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
  return 1.0 - 0.5 * (std::erfc(-a) + std::erfc(b));
}

// Integral of the unit-height triangle of half-width h centered at a against
// N(0, sigma^2), split at the apex and integrated in closed form.
double triangle_mass(double a, double h, double sigma) {
  const double s2 = sigma * sigma;
  const double lo = a - h;
  const double hi = a + h;
  const double left = s2 * (normal_pdf(lo, sigma) - normal_pdf(a, sigma)) -
                      lo * normal_mass(lo, a, sigma);
  const double right = hi * normal_mass(a, hi, sigma) -
                       s2 * (normal_pdf(a, sigma) - normal_pdf(hi, sigma));
  return (left + right) / h;
}

}  // namespace

double wrapped_gaussian_pdf(double w, double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("wrapped_gaussian_pdf: sigma2 must be > 0");
  const double r = reduce_angle(w);
  const double sigma = std::sqrt(sigma2);
  const int I = wrap_count(sigma2);
  double sum = 0.0;
  for (int i = -I; i <= I; ++i) sum += normal_pdf(r - kTwoPi * i, sigma);
  return sum;
}

std::vector<double> phase_midpoints(std::size_t S) {
  std::vector<double> s(S);
  const double step = kTwoPi / static_cast<double>(S);
  for (std::size_t i = 1; i <= S; ++i)
    s[i - 1] = static_cast<double>(i) * step - step / 2.0 - kPi;
  return s;
}

std::size_t quantize_phase(double phase, std::size_t S) {
  double r = std::fmod(phase + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  auto idx = static_cast<std::size_t>(std::floor(r / (kTwoPi / static_cast<double>(S))));
  return std::min(idx, S - 1);
}

std::vector<double> transition_row(std::size_t S, double sigma2_W) {
  if (S < 2 || !std::has_single_bit(S))
    throw ConfigError("transition_row: S must be a power of two >= 2, got " + std::to_string(S));
  if (!(sigma2_W >= 0.0)) throw ConfigError("transition_row: sigma2_W must be >= 0");

  std::vector<double> q(S, 0.0);
  if (sigma2_W == 0.0) {
    q[0] = 1.0;
    return q;
  }

  // (S/2pi) * double integral over two cells == integral of p_W against a
  // unit-height triangle of half-width 2pi/S centered at the state offset.
  const double h = kTwoPi / static_cast<double>(S);
  const double sigma = std::sqrt(sigma2_W);
  const int I = wrap_count(sigma2_W) + 1;
  for (std::size_t d = 0; d < S; ++d) {
    const double c = h * static_cast<double>(d);
    double acc = 0.0;
    for (int i = -I; i <= I; ++i) acc += triangle_mass(c - kTwoPi * i, h, sigma);
    q[d] = std::max(acc, 0.0);
  }
  // Enforce the reflection symmetry q[d] == q[S-d] exactly.
  for (std::size_t d = 1; d < S / 2; ++d) {
    const double m = 0.5 * (q[d] + q[S - d]);
    q[d] = q[S - d] = m;
  }
  const double total = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& v : q) v /= total;
  return q;
}

namespace detail {

struct FftPlans {
  explicit FftPlans(std::size_t n) : n(n) {
    auto* real = fftw_alloc_real(n);
    auto* spec = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    forward = fftw_plan_dft_r2c_1d(len, real, spec, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(len, spec, real, FFTW_ESTIMATE);
    fftw_free(real);
    fftw_free(spec);
  }
  ~FftPlans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  // The FFTW planner is not thread-safe; execution with new arrays is.
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t n;
  fftw_plan forward;
  fftw_plan inverse;
};

namespace {

std::shared_ptr<const FftPlans> plans_for(std::size_t n) {
  // Mutex first so it outlives the cache during static destruction.
  auto& mutex = FftPlans::planner_mutex();
  static std::map<std::size_t, std::shared_ptr<const FftPlans>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const FftPlans>(n);
  return slot;
}

// Per-thread FFTW-aligned buffers, grown on demand.
struct Workspace {
  std::size_t capacity = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;

  void reserve(std::size_t n) {
    if (n <= capacity) return;
    release();
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    capacity = n;
  }
  void release() {
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
    real = nullptr;
    spec = nullptr;
    capacity = 0;
  }
  ~Workspace() { release(); }
};

Workspace& workspace(std::size_t n) {
  thread_local Workspace ws;
  ws.reserve(n);
  return ws;
}

}  // namespace
}  // namespace detail

CirculantKernel::CirculantKernel(std::vector<double> generator)
    : generator_(std::move(generator)) {
  const std::size_t n = generator_.size();
  if (n == 0) throw ConfigError("CirculantKernel: empty generator");
  plans_ = detail::plans_for(n);
  auto& ws = detail::workspace(n);
  std::copy(generator_.begin(), generator_.end(), ws.real);
  fftw_execute_dft_r2c(plans_->forward, ws.real, ws.spec);
  spectrum_.resize(n / 2 + 1);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < spectrum_.size(); ++k)
    spectrum_[k] = std::complex<double>(ws.spec[k][0], ws.spec[k][1]) * inv;
}

void CirculantKernel::apply(std::span<const double> v, std::span<double> u) const {
  const std::size_t n = size();
  if (v.size() != n || u.size() != n)
    throw ConfigError("circulant apply: vector length " + std::to_string(v.size()) +
                      " does not match kernel size " + std::to_string(n));
  auto& ws = detail::workspace(n);
  std::copy(v.begin(), v.end(), ws.real);
  fftw_execute_dft_r2c(plans_->forward, ws.real, ws.spec);
  for (std::size_t k = 0; k < spectrum_.size(); ++k) {
    const double re = ws.spec[k][0];
    const double im = ws.spec[k][1];
    const double sr = spectrum_[k].real();
    const double si = spectrum_[k].imag();
    ws.spec[k][0] = re * sr - im * si;
    ws.spec[k][1] = re * si + im * sr;
  }
  fftw_execute_dft_c2r(plans_->inverse, ws.spec, ws.real);
  for (std::size_t i = 0; i < n; ++i) u[i] = std::max(ws.real[i], 0.0);
}

std::vector<double> CirculantKernel::apply(std::span<const double> v) const {
  std::vector<double> u(size());
  apply(v, u);
  return u;
}

std::vector<double> circulant_apply(std::span<const double> q_row, std::span<const double> v) {
  if (q_row.size() != v.size())
    throw ConfigError("circulant_apply: generator and vector lengths differ");
  return CirculantKernel(std::vector<double>(q_row.begin(), q_row.end())).apply(v);
}

std::vector<double> circulant_apply_direct(std::span<const double> q_row,
                                           std::span<const double> v) {
  const std::size_t n = q_row.size();
  if (v.size() != n) throw ConfigError("circulant_apply_direct: generator and vector lengths differ");
  std::vector<double> u(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += q_row[(i + n - j) % n] * v[j];
    u[i] = acc;
  }
  return u;
}

PhaseGrid::PhaseGrid(std::size_t S, double sigma2_W)
    : sigma2_W_(sigma2_W),
      midpoints_(phase_midpoints(S)),
      kernel_(transition_row(S, sigma2_W)) {}

}  // namespace pnrate
