#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pnrate/rng.hpp"

namespace pnrate {

using cplx = std::complex<double>;

/// Finite input alphabet with its prior. Points are scaled so that the
/// prior-weighted average power equals `avg_power` exactly.
struct Constellation {
  std::string name;
  std::vector<cplx> points;
  std::vector<double> prior;
  double avg_power = 1.0;

  std::size_t size() const { return points.size(); }

  /// Entropy of the prior in bits; equals log2(size()) for i.u.d. inputs.
  double entropy_bits() const;
};

/// Named alphabets: "BPSK", "QPSK", "16-QAM", "16-PSK" (case-insensitive).
Constellation make_constellation(std::string_view name, double avg_power = 1.0);

/// Arbitrary point set; uniform prior when `prior` is empty.
Constellation custom_constellation(std::string name, std::vector<cplx> points,
                                   std::vector<double> prior = {},
                                   double avg_power = 1.0);

/// Draws `n` i.i.d. symbol indices from the prior.
std::vector<std::size_t> draw_symbol_indices(const Constellation& c,
                                             std::size_t n, Engine& rng);

std::vector<cplx> symbols_from_indices(const Constellation& c,
                                       std::span<const std::size_t> idx);

}  // namespace pnrate
