#include "pnrate/constellation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pnrate/errors.hpp"

namespace pnrate {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::vector<cplx> psk(std::size_t m, double offset) {
  std::vector<cplx> pts;
  for (std::size_t i = 0; i < m; ++i) {
    double a = offset + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(m);
    pts.push_back(std::polar(1.0, a));
  }
  return pts;
}

std::vector<cplx> square_qam(int side) {
  std::vector<cplx> pts;
  for (int i = 0; i < side; ++i)
    for (int q = 0; q < side; ++q)
      pts.emplace_back(2 * i - side + 1, 2 * q - side + 1);
  return pts;
}

}  // namespace

double Constellation::entropy_bits() const {
  double h = 0.0;
  for (double p : prior)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

Constellation custom_constellation(std::string name, std::vector<cplx> points,
                                   std::vector<double> prior, double avg_power) {
  if (points.empty()) throw ConfigError("constellation: empty point set");
  if (!(avg_power > 0.0)) throw ConfigError("constellation: avg_power must be > 0");
  if (prior.empty()) prior.assign(points.size(), 1.0 / static_cast<double>(points.size()));
  if (prior.size() != points.size())
    throw ConfigError("constellation: prior and points differ in length");
  for (double p : prior)
    if (!(p >= 0.0)) throw ConfigError("constellation: negative prior entry");
  double total = std::accumulate(prior.begin(), prior.end(), 0.0);
  if (!(total > 0.0)) throw ConfigError("constellation: prior sums to zero");
  for (double& p : prior) p /= total;

  double power = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) power += prior[i] * std::norm(points[i]);
  if (!(power > 0.0)) throw ConfigError("constellation: zero average power");
  const double scale = std::sqrt(avg_power / power);
  for (auto& p : points) p *= scale;

  return Constellation{std::move(name), std::move(points), std::move(prior), avg_power};
}

Constellation make_constellation(std::string_view name, double avg_power) {
  const std::string key = upper(name);
  if (key == "BPSK") return custom_constellation("BPSK", psk(2, 0.0), {}, avg_power);
  if (key == "QPSK")
    return custom_constellation("QPSK", psk(4, std::numbers::pi / 4), {}, avg_power);
  if (key == "16-QAM" || key == "16QAM")
    return custom_constellation("16-QAM", square_qam(4), {}, avg_power);
  if (key == "16-PSK" || key == "16PSK")
    return custom_constellation("16-PSK", psk(16, 0.0), {}, avg_power);
  throw ConfigError("unknown constellation '" + std::string(name) +
                    "' (expected QPSK, 16-QAM, 16-PSK or BPSK)");
}

std::vector<std::size_t> draw_symbol_indices(const Constellation& c, std::size_t n,
                                             Engine& rng) {
  std::discrete_distribution<std::size_t> dist(c.prior.begin(), c.prior.end());
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = dist(rng);
  return idx;
}

std::vector<cplx> symbols_from_indices(const Constellation& c,
                                       std::span<const std::size_t> idx) {
  std::vector<cplx> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(c.points.at(i));
  return out;
}

}  // namespace pnrate
