// Command-line front end: parameter sweeps, convergence reports, MTR
// calibration and single-cell estimates.

#include <array>
#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "pnrate/baseline.hpp"
#include "pnrate/errors.hpp"
#include "pnrate/sweep.hpp"

namespace {

// Flags that map one-to-one onto config-file keys. Applied after the file so
// that the command line wins.
struct SettingFlags {
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> storage = std::vector<std::string>(kKeys.size());

  static constexpr std::array<std::pair<const char*, const char*>, 17> kKeys{{
      {"model", "multisample, baud, mtr (comma-separated)"},
      {"snr", "SNR list in dB, e.g. 0,10,20 or 0:5:30"},
      {"L", "receiver samples per symbol (list)"},
      {"S", "phase states (list, powers of two)"},
      {"pulse", "square or cosine_squared"},
      {"constellation", "QPSK, 16-QAM or 16-PSK"},
      {"beta-T", "linewidth f_FWHM*T"},
      {"fhwhm-T", "linewidth f_HWHM*T (alias, = beta-T/2)"},
      {"n-symb", "symbols per run"},
      {"L-sim", "fine simulation samples per symbol"},
      {"seeds", "seed list"},
      {"output", "result CSV path"},
      {"threads", "worker threads (0 = OpenMP default)"},
      {"mtr-n-cal", "MTR calibration symbols"},
      {"mtr-cal-snr", "MTR calibration SNR in dB"},
      {"mtr-cal-seed", "MTR calibration seed"},
      {"mtr-cal-dir", "directory to persist/reuse MTR calibrations"},
  }};

  void attach(CLI::App& app) {
    for (std::size_t i = 0; i < kKeys.size(); ++i)
      app.add_option(std::string("--") + kKeys[i].first, storage[i], kKeys[i].second);
  }

  void apply(CLI::App& app, pnrate::SweepSpec& spec) const {
    for (std::size_t i = 0; i < kKeys.size(); ++i)
      if (app.count(std::string("--") + kKeys[i].first) > 0)
        pnrate::apply_setting(spec, kKeys[i].first, storage[i]);
  }
};

pnrate::SweepSpec build_spec(CLI::App& app, const std::string& config, const std::string& preset,
                             const SettingFlags& flags) {
  pnrate::SweepSpec spec;
  if (!preset.empty()) pnrate::apply_preset(spec, preset);
  if (!config.empty()) spec = pnrate::parse_config_file(config, spec);
  flags.apply(app, spec);
  spec.validate();
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information-rate lower bounds for Wiener phase noise channels"};
  app.require_subcommand(1);

  std::string config, preset;
  SettingFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep and write a result CSV");
  sweep->add_option("-c,--config", config, "key = value config file")->check(CLI::ExistingFile);
  sweep->add_option("--preset", preset, "desk (n_symb=2000, L_sim=256) or paper");
  sweep_flags.attach(*sweep);

  std::string est_config, est_preset;
  SettingFlags est_flags;
  auto* estimate = app.add_subcommand("estimate", "print the rate of every cell without writing a CSV");
  estimate->add_option("-c,--config", est_config, "key = value config file")->check(CLI::ExistingFile);
  estimate->add_option("--preset", est_preset, "desk or paper");
  est_flags.attach(*estimate);

  std::string report_csv;
  double tolerance = 0.05;
  bool strict = false;
  auto* report = app.add_subcommand("report", "per-cell spread over seeds");
  report->add_option("csv", report_csv, "result CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--tolerance", tolerance, "spread tolerance in bits")->capture_default_str();
  report->add_flag("--strict", strict, "exit with status 1 when any cell is flagged");

  std::string cal_config, cal_preset, cal_out;
  SettingFlags cal_flags;
  auto* calibrate = app.add_subcommand("calibrate-mtr", "estimate and export MTR transition tables");
  calibrate->add_option("-c,--config", cal_config, "key = value config file")->check(CLI::ExistingFile);
  calibrate->add_option("--preset", cal_preset, "desk or paper");
  calibrate->add_option("--out", cal_out, "output CSV (single L and S) or directory")->required();
  cal_flags.attach(*calibrate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      const auto spec = build_spec(*sweep, config, preset, sweep_flags);
      const auto outcome = pnrate::run_sweep(spec, &std::cerr);
      std::cerr << "cells: " << outcome.rows.size() << " computed: " << outcome.computed
                << " reused: " << outcome.reused << " failed: " << outcome.failed << "\n"
                << "wrote " << spec.output.string() << "\n";
      return outcome.failed == 0 ? 0 : 1;
    }
    if (*estimate) {
      const auto spec = build_spec(*estimate, est_config, est_preset, est_flags);
      std::cout << pnrate::kResultHeader << "\n";
      int status = 0;
      for (const auto& cell : pnrate::enumerate_cells(spec)) {
        std::string err;
        const auto row = pnrate::run_cell(spec, cell, nullptr, &err);
        std::cout << pnrate::format_row(row) << std::endl;
        if (!row.rate_bits) {
          std::cerr << err << "\n";
          status = 1;
        }
      }
      return status;
    }
    if (*report) {
      const auto cells = pnrate::convergence_report(report_csv, tolerance);
      bool flagged = false;
      std::printf("%-60s %6s %10s %10s %10s %10s  %s\n", "cell", "seeds", "mean", "min", "max",
                  "spread", "status");
      for (const auto& c : cells) {
        std::printf("%-60s %6zu %10.5f %10.5f %10.5f %10.5f  %s\n", c.cell.c_str(), c.n_seeds,
                    c.mean, c.min, c.max, c.spread(), c.status.c_str());
        flagged = flagged || c.flagged();
      }
      return (strict && flagged) ? 1 : 0;
    }
    if (*calibrate) {
      auto spec = build_spec(*calibrate, cal_config, cal_preset, cal_flags);
      const bool single = spec.L.size() == 1 && spec.S.size() == 1 &&
                          !std::filesystem::is_directory(cal_out);
      for (auto L : spec.L)
        for (auto S : spec.S) {
          auto local = spec;
          local.mtr_cal_dir.clear();
          const auto m = pnrate::mtr_calibration_for(local, L, S);
          std::filesystem::path path = cal_out;
          if (!single) {
            std::filesystem::create_directories(cal_out);
            path /= "mtr_L" + std::to_string(L) + "_S" + std::to_string(S) + ".csv";
          }
          pnrate::write_transition_csv(path, m.S, m.empirical_T);
          std::cerr << "wrote " << path.string() << "\n";
        }
      return 0;
    }
  } catch (const pnrate::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
