#include "pnrate/sweep.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "pnrate/errors.hpp"
#include "pnrate/phase_grid.hpp"

namespace pnrate {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("setting '" + std::string(key) + "': cannot parse '" + std::string(t) +
                      "' as a number");
  return value;
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  for (auto item : split(text, ',')) {
    if (item.empty()) continue;
    out.push_back(parse_number<T>(key, item));
  }
  if (out.empty()) throw ConfigError("setting '" + std::string(key) + "': empty list");
  return out;
}

// Accepts "a,b,c" and "start:step:stop" (inclusive).
std::vector<double> parse_snr_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  for (auto item : split(text, ',')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() == 1) {
      out.push_back(parse_number<double>(key, item));
    } else if (parts.size() == 3) {
      const double a = parse_number<double>(key, parts[0]);
      const double step = parse_number<double>(key, parts[1]);
      const double b = parse_number<double>(key, parts[2]);
      if (!(step > 0.0) || b < a)
        throw ConfigError("setting '" + std::string(key) + "': bad range '" + std::string(item) + "'");
      const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
      for (std::size_t i = 0; i <= n; ++i) out.push_back(a + step * static_cast<double>(i));
    } else {
      throw ConfigError("setting '" + std::string(key) + "': bad item '" + std::string(item) + "'");
    }
  }
  if (out.empty()) throw ConfigError("setting '" + std::string(key) + "': empty list");
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string calibration_file_name(const SweepSpec& spec, std::size_t L, std::size_t S) {
  std::ostringstream os;
  os << "mtr_" << make_constellation(spec.constellation).name << "_" << to_string(spec.pulse)
     << "_bT" << num(spec.beta_T) << "_Lsim" << spec.L_sim << "_L" << L << "_S" << S << "_cal"
     << spec.mtr_n_cal << "_snr" << num(spec.mtr_cal_snr_db) << "_seed" << spec.mtr_cal_seed
     << ".csv";
  return os.str();
}

}  // namespace

void SweepSpec::validate() const {
  if (models.empty()) throw ConfigError("model: at least one model is required");
  if (snr_db.empty()) throw ConfigError("snr_db: at least one SNR is required");
  if (L.empty()) throw ConfigError("L: at least one value is required");
  if (S.empty()) throw ConfigError("S: at least one value is required");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (L_sim < 1) throw ConfigError("L_sim: must be >= 1");
  for (auto l : L) {
    if (l < 1) throw ConfigError("L: must be >= 1");
    if (L_sim % l != 0)
      throw ConfigError("L: L=" + std::to_string(l) + " does not divide L_sim=" +
                        std::to_string(L_sim));
  }
  for (auto s : S)
    if (s < 2 || !std::has_single_bit(s))
      throw ConfigError("S: S=" + std::to_string(s) + " is not a power of two >= 2");
  try {
    (void)make_constellation(constellation);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("constellation: ") + e.what());
  }
  if (!(beta_T >= 0.0)) throw ConfigError("beta_T: must be >= 0");
  if (n_symb < 1) throw ConfigError("n_symb: must be >= 1");
  if (output.empty()) throw ConfigError("output: path is empty");
  if (std::find(models.begin(), models.end(), ModelKind::mtr) != models.end() && mtr_n_cal < 10000)
    throw ConfigError("mtr_n_cal: must be >= 10000");
  if (threads < 0) throw ConfigError("threads: must be >= 0");
}

void apply_preset(SweepSpec& spec, std::string_view preset) {
  if (preset == "desk") {
    spec.n_symb = 2000;
    spec.L_sim = 256;
  } else if (preset == "paper") {
    spec.n_symb = 10000;
    spec.L_sim = 1024;
  } else {
    throw ConfigError("preset: unknown preset '" + std::string(preset) + "' (expected desk or paper)");
  }
}

void apply_setting(SweepSpec& spec, std::string_view key_in, std::string_view value_in) {
  std::string key(trim(key_in));
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string_view value = trim(value_in);
  if (value.empty()) throw ConfigError("setting '" + key + "': missing value");

  if (key == "model" || key == "models") {
    spec.models.clear();
    for (auto m : split(value, ','))
      if (!m.empty()) spec.models.push_back(parse_model_kind(m));
  } else if (key == "snr" || key == "snr_db") {
    spec.snr_db = parse_snr_list(key, value);
  } else if (key == "L") {
    spec.L = parse_list<std::size_t>(key, value);
  } else if (key == "S") {
    spec.S = parse_list<std::size_t>(key, value);
  } else if (key == "pulse") {
    spec.pulse = parse_pulse_kind(value);
  } else if (key == "constellation") {
    spec.constellation = std::string(value);
  } else if (key == "beta_T" || key == "fFWHM_T" || key == "ffwhm_T") {
    spec.beta_T = parse_number<double>(key, value);
  } else if (key == "fHWHM_T" || key == "fhwhm_T") {
    spec.beta_T = 2.0 * parse_number<double>(key, value);
  } else if (key == "n_symb") {
    spec.n_symb = parse_number<std::size_t>(key, value);
  } else if (key == "L_sim") {
    spec.L_sim = parse_number<std::size_t>(key, value);
  } else if (key == "seed" || key == "seeds") {
    spec.seeds = parse_list<std::uint64_t>(key, value);
  } else if (key == "output") {
    spec.output = std::string(value);
  } else if (key == "mtr_n_cal") {
    spec.mtr_n_cal = parse_number<std::size_t>(key, value);
  } else if (key == "mtr_cal_snr" || key == "mtr_cal_snr_db") {
    spec.mtr_cal_snr_db = parse_number<double>(key, value);
  } else if (key == "mtr_cal_seed") {
    spec.mtr_cal_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "mtr_cal_dir") {
    spec.mtr_cal_dir = std::string(value);
  } else if (key == "threads") {
    spec.threads = parse_number<int>(key, value);
  } else if (key == "preset") {
    apply_preset(spec, value);
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

SweepSpec parse_config_text(std::string_view text, SweepSpec base) {
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    try {
      apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

SweepSpec parse_config_file(const std::filesystem::path& path, SweepSpec base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<CellKey> enumerate_cells(const SweepSpec& spec) {
  std::vector<CellKey> cells;
  for (auto model : spec.models)
    for (double snr : spec.snr_db) {
      std::vector<std::size_t> Ls = spec.L;
      if (model == ModelKind::baud) Ls = {1};
      for (auto L : Ls)
        for (auto S : spec.S)
          for (auto seed : spec.seeds) cells.push_back({model, snr, L, S, seed});
    }
  return cells;
}

std::string ResultRow::group_key() const {
  std::ostringstream os;
  os << model << ',' << constellation << ',' << pulse << ',' << num(beta_T) << ','
     << num(snr_db) << ',' << L << ',' << S << ',' << n_symb;
  return os.str();
}

std::string ResultRow::key() const { return group_key() + ',' + std::to_string(seed); }

std::string format_row(const ResultRow& row) {
  std::ostringstream os;
  os << row.key() << ',' << (row.rate_bits ? num(*row.rate_bits) : std::string("error")) << ',';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", row.wall_time_s);
  os << buf;
  return os.str();
}

ResultRow parse_row(std::string_view line) {
  const auto f = split(trim(line), ',');
  if (f.size() != 11)
    throw ConfigError("result row has " + std::to_string(f.size()) + " fields, expected 11");
  ResultRow r;
  r.model = std::string(f[0]);
  r.constellation = std::string(f[1]);
  r.pulse = std::string(f[2]);
  r.beta_T = parse_number<double>("beta_T", f[3]);
  r.snr_db = parse_number<double>("snr_db", f[4]);
  r.L = parse_number<std::size_t>("L", f[5]);
  r.S = parse_number<std::size_t>("S", f[6]);
  r.n_symb = parse_number<std::size_t>("n_symb", f[7]);
  r.seed = parse_number<std::uint64_t>("seed", f[8]);
  if (f[9] != "error") r.rate_bits = parse_number<double>("rate_bits", f[9]);
  r.wall_time_s = parse_number<double>("wall_time_s", f[10]);
  if (r.model.empty() || r.constellation.empty() || r.pulse.empty())
    throw ConfigError("result row has empty key fields");
  return r;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open results file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kResultHeader)
    throw ConfigError(path.string() + ": missing or unexpected CSV header");
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(parse_row(line));
    } catch (const ConfigError& e) {
      // A partially written last line from an interrupted run is skipped.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::uint64_t channel_seed(const SweepSpec& spec, const CellKey& cell) {
  std::ostringstream os;
  os << (cell.model == ModelKind::baud ? "baud" : "waveform") << '|'
     << make_constellation(spec.constellation).name << '|' << to_string(spec.pulse) << '|'
     << num(spec.beta_T) << '|' << num(cell.snr_db) << '|' << spec.n_symb << '|' << spec.L_sim;
  return derive_seed(cell.seed, os.str());
}

MtrConfig mtr_calibration_for(const SweepSpec& spec, std::size_t L, std::size_t S) {
  std::filesystem::path file;
  if (!spec.mtr_cal_dir.empty()) {
    file = spec.mtr_cal_dir / calibration_file_name(spec, L, S);
    if (std::filesystem::exists(file)) {
      MtrConfig m;
      m.L = L;
      m.empirical_T = read_transition_csv(file, m.S);
      if (m.S != S) throw ConfigError(file.string() + ": table size does not match S");
      m.n_cal = spec.mtr_n_cal;
      m.cal_seed = spec.mtr_cal_seed;
      return m;
    }
  }
  const Constellation con = make_constellation(spec.constellation);
  const ChannelConfig ch =
      make_channel_config(spec.pulse, con, spec.beta_T, spec.mtr_cal_snr_db, L, spec.L_sim,
                          spec.mtr_n_cal, spec.mtr_cal_seed);
  std::ostringstream key;
  key << "mtr-cal|L" << L << "|S" << S;
  MtrCalibrationOptions opts;
  opts.snr_db = spec.mtr_cal_snr_db;
  MtrConfig m = mtr_calibrate(ch, S, spec.mtr_n_cal, derive_seed(spec.mtr_cal_seed, key.str()), opts);
  if (!file.empty()) {
    std::filesystem::create_directories(spec.mtr_cal_dir);
    write_transition_csv(file, m.S, m.empirical_T);
  }
  return m;
}

ResultRow run_cell(const SweepSpec& spec, const CellKey& cell, const MtrConfig* mtr,
                   std::string* error_message) {
  const auto t0 = std::chrono::steady_clock::now();
  const Constellation con = make_constellation(spec.constellation);
  ResultRow row;
  row.model = std::string(to_string(cell.model));
  row.constellation = con.name;
  row.pulse = std::string(to_string(spec.pulse));
  row.beta_T = spec.beta_T;
  row.snr_db = cell.snr_db;
  row.L = cell.L;
  row.S = cell.S;
  row.n_symb = spec.n_symb;
  row.seed = cell.seed;

  try {
    ChannelConfig ch = make_channel_config(spec.pulse, con, spec.beta_T, cell.snr_db, cell.L,
                                           spec.L_sim, spec.n_symb, channel_seed(spec, cell));
    switch (cell.model) {
      case ModelKind::multisample: {
        const PhaseGrid grid(cell.S, ch.sigma2_W());
        row.rate_bits = estimate_rate(ch, grid).rate_bits;
        break;
      }
      case ModelKind::baud:
        row.rate_bits = baud_rate_estimate(BaudRateConfig::from_channel(ch, cell.S)).rate_bits;
        break;
      case ModelKind::mtr: {
        if (mtr) {
          row.rate_bits = mtr_rate_estimate(ch, *mtr).rate_bits;
        } else {
          const MtrConfig cal = mtr_calibration_for(spec, cell.L, cell.S);
          row.rate_bits = mtr_rate_estimate(ch, cal).rate_bits;
        }
        break;
      }
    }
  } catch (const std::exception& e) {
    row.rate_bits.reset();
    if (error_message) *error_message = e.what();
  }
  row.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

SweepOutcome run_sweep(const SweepSpec& spec, std::ostream* log) {
  spec.validate();
  const auto cells = enumerate_cells(spec);

  std::map<std::string, ResultRow> done;
  std::vector<ResultRow> foreign;
  const bool exists = std::filesystem::exists(spec.output);
  if (exists) {
    for (auto& r : read_results(spec.output))
      if (r.rate_bits) done[r.key()] = r;
  }

  // Keys of this sweep, in canonical order.
  std::vector<ResultRow> canonical(cells.size());
  std::vector<std::size_t> todo;
  std::set<std::string> own_keys;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    ResultRow probe;
    probe.model = std::string(to_string(cells[i].model));
    probe.constellation = make_constellation(spec.constellation).name;
    probe.pulse = std::string(to_string(spec.pulse));
    probe.beta_T = spec.beta_T;
    probe.snr_db = cells[i].snr_db;
    probe.L = cells[i].L;
    probe.S = cells[i].S;
    probe.n_symb = spec.n_symb;
    probe.seed = cells[i].seed;
    const auto key = probe.key();
    own_keys.insert(key);
    if (auto it = done.find(key); it != done.end()) {
      canonical[i] = it->second;
    } else {
      todo.push_back(i);
    }
  }
  for (auto& [key, row] : done)
    if (!own_keys.count(key)) foreign.push_back(row);

  // Calibrations are shared by every MTR cell with the same (L, S).
  std::map<std::pair<std::size_t, std::size_t>, MtrConfig> calibrations;
  for (auto i : todo)
    if (cells[i].model == ModelKind::mtr) {
      const auto k = std::make_pair(cells[i].L, cells[i].S);
      if (!calibrations.count(k)) calibrations[k] = mtr_calibration_for(spec, k.first, k.second);
    }

  if (!spec.output.parent_path().empty())
    std::filesystem::create_directories(spec.output.parent_path());
  std::ofstream out;
  if (exists) {
    out.open(spec.output, std::ios::app);
  } else {
    out.open(spec.output);
    out << kResultHeader << '\n' << std::flush;
  }
  if (!out) throw ConfigError("cannot open " + spec.output.string() + " for writing");

  SweepOutcome outcome;
  outcome.reused = cells.size() - todo.size();
  const int threads = spec.threads > 0 ? spec.threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t t = 0; t < todo.size(); ++t) {
    const CellKey& cell = cells[todo[t]];
    const MtrConfig* cal = nullptr;
    if (cell.model == ModelKind::mtr) cal = &calibrations.at({cell.L, cell.S});
    std::string err;
    ResultRow row = run_cell(spec, cell, cal, &err);
#pragma omp critical(pnrate_sweep_writer)
    {
      canonical[todo[t]] = row;
      out << format_row(row) << '\n' << std::flush;
      ++outcome.computed;
      if (!row.rate_bits) ++outcome.failed;
      if (log) {
        *log << format_row(row);
        if (!err.empty()) *log << "  (" << err << ")";
        *log << '\n' << std::flush;
      }
    }
  }
  out.close();

  // Final rewrite in canonical order.
  const auto tmp = std::filesystem::path(spec.output.string() + ".tmp");
  {
    std::ofstream final_out(tmp);
    final_out << kResultHeader << '\n';
    for (const auto& r : canonical) final_out << format_row(r) << '\n';
    for (const auto& r : foreign) final_out << format_row(r) << '\n';
    if (!final_out) throw ConfigError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, spec.output);

  outcome.rows = std::move(canonical);
  return outcome;
}

std::vector<CellSpread> convergence_report(std::span<const ResultRow> rows, double tolerance_bits) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    auto key = r.group_key();
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<CellSpread> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    CellSpread c;
    c.cell = key;
    c.n_seeds = g.size();
    std::vector<double> rates;
    bool failed = false;
    for (const auto* r : g) {
      if (r->rate_bits) {
        rates.push_back(*r->rate_bits);
      } else {
        failed = true;
      }
    }
    if (!rates.empty()) {
      const auto s = summarize(rates, tolerance_bits);
      c.mean = s.mean;
      c.min = s.min;
      c.max = s.max;
    }
    if (failed) {
      c.status = "failed seeds";
    } else if (c.n_seeds < 2) {
      c.status = "insufficient seeds";
    } else if (c.spread() > tolerance_bits) {
      c.status = "exceeds tolerance";
    } else {
      c.status = "ok";
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<CellSpread> convergence_report(const std::filesystem::path& csv, double tolerance_bits) {
  const auto rows = read_results(csv);
  return convergence_report(std::span<const ResultRow>(rows), tolerance_bits);
}

}  // namespace pnrate
