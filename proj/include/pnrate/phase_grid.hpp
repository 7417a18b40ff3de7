#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace pnrate {

/// Density of a zero-mean Gaussian of variance `sigma2` reduced mod 2*pi.
/// Throws ConfigError when sigma2 <= 0.
double wrapped_gaussian_pdf(double w, double sigma2);

/// Interval centers i*2pi/S - pi/S - pi, i = 1..S, of the equal partition of
/// [-pi, pi).
std::vector<double> phase_midpoints(std::size_t S);

/// Index (0-based) of the partition interval containing `phase` mod 2*pi.
std::size_t quantize_phase(double phase, std::size_t S);

/// Generator of the circulant phase-state transition kernel:
/// q[d] = Q(s_{1+d} | s_1), the probability that a wrapped-Gaussian increment
/// moves a phase uniformly placed in one cell into the cell d steps ahead.
/// sigma2_W == 0 yields the identity row. S must be a power of two >= 2.
std::vector<double> transition_row(std::size_t S, double sigma2_W);

namespace detail {
struct FftPlans;
}

/// Circulant operator u[i] = sum_j q[(i - j) mod S] v[j], applied through a
/// real-to-complex FFT. Immutable after construction and safe to share
/// between threads.
class CirculantKernel {
 public:
  explicit CirculantKernel(std::vector<double> generator);

  std::size_t size() const { return generator_.size(); }
  std::span<const double> generator() const { return generator_; }

  /// u = C v; negative round-off is clamped to zero. `u` may alias `v`.
  void apply(std::span<const double> v, std::span<double> u) const;
  std::vector<double> apply(std::span<const double> v) const;

 private:
  std::vector<double> generator_;
  std::vector<std::complex<double>> spectrum_;  // pre-scaled by 1/S
  std::shared_ptr<const detail::FftPlans> plans_;
};

/// FFT circulant product for a one-off generator.
std::vector<double> circulant_apply(std::span<const double> q_row, std::span<const double> v);

/// O(S^2) reference product; kept as the test oracle for the FFT path.
std::vector<double> circulant_apply_direct(std::span<const double> q_row,
                                           std::span<const double> v);

/// Quantized phase state space together with its transition kernel.
class PhaseGrid {
 public:
  PhaseGrid(std::size_t S, double sigma2_W);

  std::size_t size() const { return midpoints_.size(); }
  double sigma2_W() const { return sigma2_W_; }
  std::span<const double> midpoints() const { return midpoints_; }
  std::span<const double> q_row() const { return kernel_.generator(); }
  const CirculantKernel& kernel() const { return kernel_; }

 private:
  double sigma2_W_;
  std::vector<double> midpoints_;
  CirculantKernel kernel_;
};

}  // namespace pnrate
