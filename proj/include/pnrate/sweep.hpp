#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pnrate/baseline.hpp"
#include "pnrate/channel.hpp"
#include "pnrate/trellis.hpp"

namespace pnrate {

/// One sweep over (model, SNR, L, S, seed) cells. Symbol interval T = 1 and
/// unit average power throughout; SNR alone sets the noise level.
struct SweepSpec {
  std::vector<ModelKind> models{ModelKind::multisample};
  std::vector<double> snr_db{10.0};
  std::vector<std::size_t> L{4};
  std::vector<std::size_t> S{32};
  PulseKind pulse = PulseKind::square;
  std::string constellation = "QPSK";
  double beta_T = 0.25;  ///< f_FWHM * T; f_HWHM * T = beta_T / 2
  std::size_t n_symb = 10000;
  std::size_t L_sim = 1024;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output = "rates.csv";
  std::size_t mtr_n_cal = 10000;
  double mtr_cal_snr_db = 30.0;
  std::uint64_t mtr_cal_seed = 2013;
  std::filesystem::path mtr_cal_dir;  ///< empty: calibrations are not persisted
  int threads = 0;                    ///< 0: OpenMP default

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Applies one `key = value` setting; lists are comma-separated. Used for both
/// config files and command-line flags.
void apply_setting(SweepSpec& spec, std::string_view key, std::string_view value);

/// "desk": n_symb = 2000, L_sim = 256. "paper": n_symb = 10^4, L_sim = 1024.
void apply_preset(SweepSpec& spec, std::string_view preset);

/// Parses `key = value` lines; '#' starts a comment; blank lines ignored.
/// Errors name the line number and key.
SweepSpec parse_config_text(std::string_view text, SweepSpec base = {});
SweepSpec parse_config_file(const std::filesystem::path& path, SweepSpec base = {});

struct CellKey {
  ModelKind model = ModelKind::multisample;
  double snr_db = 0.0;
  std::size_t L = 1;
  std::size_t S = 0;
  std::uint64_t seed = 0;
};

/// Cells in canonical order (model, snr, L, S, seed). The baud-rate model
/// ignores L and contributes L = 1 cells only.
std::vector<CellKey> enumerate_cells(const SweepSpec& spec);

inline constexpr std::string_view kResultHeader =
    "model,constellation,pulse,beta_T,snr_db,L,S,n_symb,seed,rate_bits,wall_time_s";

struct ResultRow {
  std::string model;
  std::string constellation;
  std::string pulse;
  double beta_T = 0.0;
  double snr_db = 0.0;
  std::size_t L = 0;
  std::size_t S = 0;
  std::size_t n_symb = 0;
  std::uint64_t seed = 0;
  std::optional<double> rate_bits;  ///< empty: the cell failed ("error" in the CSV)
  double wall_time_s = 0.0;

  /// Identity of the cell: every column except rate_bits and wall_time_s.
  std::string key() const;
  /// Identity without the seed; groups seeds of one cell for reports.
  std::string group_key() const;
};

std::string format_row(const ResultRow& row);
ResultRow parse_row(std::string_view line);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

/// Seed of the channel realization for a cell. It depends on the seed and the
/// channel parameters only, so cells that differ only in the receiver (L, S)
/// share symbols and phase path.
std::uint64_t channel_seed(const SweepSpec& spec, const CellKey& cell);

/// Calibration for one (L, S), loaded from or stored to mtr_cal_dir when set.
MtrConfig mtr_calibration_for(const SweepSpec& spec, std::size_t L, std::size_t S);

/// Runs one cell; numerical failures come back as a row without a rate.
ResultRow run_cell(const SweepSpec& spec, const CellKey& cell, const MtrConfig* mtr = nullptr,
                   std::string* error_message = nullptr);

struct SweepOutcome {
  std::vector<ResultRow> rows;  ///< canonical order
  std::size_t computed = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
};

/// Runs every missing cell in parallel, appending rows to spec.output as they
/// finish, then rewrites the file in canonical order. Rows already present
/// with a rate are reused, so an interrupted sweep resumes where it stopped.
SweepOutcome run_sweep(const SweepSpec& spec, std::ostream* log = nullptr);

struct CellSpread {
  std::string cell;  ///< group key
  std::size_t n_seeds = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::string status;  ///< "ok", "exceeds tolerance", "insufficient seeds", "failed seeds"

  double spread() const { return max - min; }
  bool flagged() const { return status != "ok"; }
};

std::vector<CellSpread> convergence_report(std::span<const ResultRow> rows, double tolerance_bits);
std::vector<CellSpread> convergence_report(const std::filesystem::path& csv, double tolerance_bits);

}  // namespace pnrate
