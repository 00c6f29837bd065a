#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "temcodec/decoder.hpp"
#include "temcodec/encoder.hpp"
#include "temcodec/error.hpp"
#include "temcodec/metrics.hpp"
#include "temcodec/signal.hpp"

namespace temcodec {

struct ShiftPolicy {
  enum class Kind { equal, explicit_list, log_spaced };
  Kind kind = Kind::equal;
  std::vector<double> values;  // alpha_1 / delta for explicit lists
  double min = 1e-8;           // log-spaced range of alpha_1 / delta
  double max = 1e-1;
  std::size_t count = 8;

  /// alpha_1 / delta per shift cell; empty optional means equal shifts.
  std::vector<std::optional<double>> expand() const {
    switch (kind) {
      case Kind::equal: return {std::nullopt};
      case Kind::explicit_list: {
        std::vector<std::optional<double>> out(values.begin(), values.end());
        return out;
      }
      case Kind::log_spaced: {
        std::vector<std::optional<double>> out;
        if (count == 1) return {max};
        const double l0 = std::log10(max);
        const double l1 = std::log10(min);
        for (std::size_t i = 0; i < count; ++i)
          out.emplace_back(std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(i) /
                                                  static_cast<double>(count - 1)));
        return out;
      }
    }
    return {};
  }
};

struct DecoderSpec {
  DecodeMethod method = DecodeMethod::closed_form;
  std::size_t max_iter = 2000;
  double tol = 1e-9;
  double rel_cutoff = 1e-12;
};

struct SweepSpec {
  std::vector<double> omega_list;
  std::vector<std::size_t> m_list;
  ShiftPolicy shift_policy;
  std::vector<double> snr_db_list{std::numeric_limits<double>::infinity()};  // +inf: no jitter
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  TimeWindow window{0.0, 10.0};
  std::size_t grid_points = kDefaultGridPoints;
  DecoderSpec decoder;
  double kappa = 1.0;
  double delta = 1.0;
  double bias_margin = 1.0;  // b = c + bias_margin

  void validate() const {
    if (omega_list.empty() || m_list.empty() || snr_db_list.empty())
      throw DataError("sweep lists must be non-empty");
    if (trials < 1) throw DataError("trials must be at least 1");
    for (double o : omega_list)
      if (!(o > 0.0) || !std::isfinite(o)) throw DataError("omega values must be positive");
    for (auto m : m_list)
      if (m < 1) throw DataError("channel counts must be at least 1");
    for (double s : snr_db_list)
      if (std::isnan(s) || s == -std::numeric_limits<double>::infinity())
        throw DataError("snr_db values must be finite or none");
    if (shift_policy.kind == ShiftPolicy::Kind::explicit_list && shift_policy.values.empty())
      throw DataError("explicit shift list is empty");
    if (shift_policy.kind == ShiftPolicy::Kind::log_spaced &&
        (!(shift_policy.min > 0.0) || !(shift_policy.max >= shift_policy.min) || shift_policy.count < 1))
      throw DataError("log-spaced shifts need 0 < min <= max and count >= 1");
    validate_window(window);
    if (grid_points < 2) throw DataError("grid_points must be at least 2");
    TemParams{kappa, delta, bias_margin}.validate();
  }
};

namespace detail {

inline double snr_from_json(const nlohmann::json& v) {
  if (v.is_null() || (v.is_string() && v.get<std::string>() == "none"))
    return std::numeric_limits<double>::infinity();
  return v.get<double>();
}

}  // namespace detail

inline SweepSpec sweep_from_json(const nlohmann::json& j) {
  try {
    SweepSpec s;
    s.omega_list = j.at("omega_list").get<std::vector<double>>();
    s.m_list = j.at("m_list").get<std::vector<std::size_t>>();
    if (j.contains("shift_policy")) {
      const auto& p = j["shift_policy"];
      const std::string type = p.is_string() ? p.get<std::string>() : p.at("type").get<std::string>();
      if (type == "equal") {
        s.shift_policy.kind = ShiftPolicy::Kind::equal;
      } else if (type == "explicit") {
        s.shift_policy.kind = ShiftPolicy::Kind::explicit_list;
        s.shift_policy.values = p.at("values").get<std::vector<double>>();
      } else if (type == "log_spaced") {
        s.shift_policy.kind = ShiftPolicy::Kind::log_spaced;
        s.shift_policy.min = p.value("min", 1e-8);
        s.shift_policy.max = p.value("max", 1e-1);
        s.shift_policy.count = p.value("count", std::size_t{8});
      } else {
        throw DataError("unknown shift_policy type '" + type + "'");
      }
    }
    if (j.contains("snr_db_list")) {
      s.snr_db_list.clear();
      for (const auto& v : j["snr_db_list"]) s.snr_db_list.push_back(detail::snr_from_json(v));
    }
    s.trials = j.value("trials", s.trials);
    s.seed = j.value("seed", s.seed);
    if (j.contains("window")) {
      const auto w = j["window"].get<std::vector<double>>();
      if (w.size() != 2) throw DataError("window must be [t_start, t_end]");
      s.window = {w[0], w[1]};
    }
    s.grid_points = j.value("grid_points", s.grid_points);
    if (j.contains("decoder")) {
      const auto& d = j["decoder"];
      if (d.is_string()) {
        s.decoder.method = parse_method(d.get<std::string>());
      } else {
        s.decoder.method = parse_method(d.at("method").get<std::string>());
        s.decoder.max_iter = d.value("max_iter", s.decoder.max_iter);
        s.decoder.tol = d.value("tol", s.decoder.tol);
        s.decoder.rel_cutoff = d.value("rel_cutoff", s.decoder.rel_cutoff);
      }
    }
    s.kappa = j.value("kappa", s.kappa);
    s.delta = j.value("delta", s.delta);
    s.bias_margin = j.value("bias_margin", s.bias_margin);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed sweep spec: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
}

struct SweepCell {
  std::size_t index = 0;
  double omega = 0.0;
  std::size_t m = 1;
  std::optional<double> shift;  // alpha_1 / delta; empty: equal shifts
  double snr_db = std::numeric_limits<double>::infinity();
};

/// Cells in omega, M, shift, snr order.
inline std::vector<SweepCell> expand_cells(const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  const auto shifts = spec.shift_policy.expand();
  for (double o : spec.omega_list)
    for (auto m : spec.m_list)
      for (const auto& a : shifts)
        for (double snr : spec.snr_db_list) cells.push_back({cells.size(), o, m, a, snr});
  return cells;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t base, std::uint64_t cell, std::uint64_t trial) {
  return splitmix64(splitmix64(splitmix64(base) ^ cell) ^ trial);
}

struct TrialRecord {
  std::size_t cell = 0;
  std::size_t trial = 0;
  double omega = 0.0;
  std::size_t m = 1;
  std::optional<double> shift;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  double bound_ratio = 0.0;  // omega / (M pi (b - c) / (2 kappa delta))
  std::size_t spikes = 0;
  double mse_mid90 = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  double condition_number = std::numeric_limits<double>::quiet_NaN();
  double sampling_condition_number = std::numeric_limits<double>::quiet_NaN();
  std::size_t rank = 0;
  bool rate_ok = false;
  bool interleaved = false;
  bool separation_ok = false;
  std::string status = "ok";
  std::string error;
  double runtime_ms = 0.0;
};

inline MultiChannelConfig shift_config(const TemParams& p, std::size_t m, std::optional<double> shift) {
  if (m == 1 || !shift) return MultiChannelConfig::equal(p, m);
  return MultiChannelConfig::leading_shift(p, m, *shift * p.delta);
}

inline TrialRecord run_trial(const SweepSpec& spec, const SweepCell& cell, std::size_t trial) {
  TrialRecord r;
  r.cell = cell.index;
  r.trial = trial;
  r.omega = cell.omega;
  r.m = cell.m;
  r.shift = cell.shift;
  r.snr_db = cell.snr_db;
  r.seed = trial_seed(spec.seed, cell.index, trial);
  const auto start = std::chrono::steady_clock::now();
  try {
    const auto signal = generate_random_signal(cell.omega, spec.window, r.seed);
    const double c = signal_bound(signal);
    const TemParams params{spec.kappa, spec.delta, c + spec.bias_margin};
    r.bound_ratio = cell.omega / bandwidth_bound(params, c, cell.m);
    const auto config = shift_config(params, cell.m, cell.shift);
    MultiSpikeTrain train = encode_multi(signal, config, {c});
    const RateReport rep = diagnostics(train, c);
    r.rate_ok = rep.rate_ok;
    r.interleaved = rep.interleaved;
    r.separation_ok = rep.separation_ok;
    if (std::isfinite(cell.snr_db))
      train = add_time_jitter(train, cell.snr_db, splitmix64(r.seed ^ 0x6a09e667f3bcc909ULL));
    r.spikes = train.events.size();

    const GridSpec grid{spec.window, spec.grid_points};
    DecodeResult d;
    switch (spec.decoder.method) {
      case DecodeMethod::closed_form:
        d = decode_closed_form(train, cell.omega, grid, {spec.decoder.rel_cutoff, true});
        break;
      case DecodeMethod::midpoint_closed_form:
        d = decode_closed_form_midpoint(train, cell.omega, grid, {spec.decoder.rel_cutoff, false});
        break;
      case DecodeMethod::iterative:
        d = decode_iterative(train, cell.omega, grid, {spec.decoder.max_iter, spec.decoder.tol, std::nullopt});
        break;
    }
    r.mse_mid90 = mse_mid90(d.estimate, to_grid(signal, grid));
    r.iterations = d.iterations;
    r.condition_number = d.condition_number;
    r.sampling_condition_number = d.sampling_condition_number;
    r.rank = d.rank;
    if (d.status == "aborted") r.status = "aborted";
  } catch (const std::exception& e) {
    r.status = "error";
    r.error = e.what();
  }
  r.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// TEMCODEC_THREADS if set to a positive integer, else the hardware concurrency.
inline std::size_t sweep_threads() {
  if (const char* env = std::getenv("TEMCODEC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct CellSummary {
  SweepCell cell;
  std::size_t ok = 0;
  std::size_t failed = 0;
  double mean_mse = std::numeric_limits<double>::quiet_NaN();
  double median_mse = std::numeric_limits<double>::quiet_NaN();
  double median_condition = std::numeric_limits<double>::quiet_NaN();
  double median_sampling_condition = std::numeric_limits<double>::quiet_NaN();
  double median_iterations = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepCell> cells;
  std::vector<TrialRecord> records;  // cell-major, then trial
  std::vector<CellSummary> summaries;
};

inline double median(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<CellSummary> summarize(const std::vector<SweepCell>& cells,
                                          const std::vector<TrialRecord>& records) {
  std::vector<CellSummary> out;
  for (const auto& c : cells) {
    CellSummary s{c};
    std::vector<double> mse, cond, scond, iters;
    double sum = 0.0;
    for (const auto& r : records) {
      if (r.cell != c.index) continue;
      if (r.status == "error" || std::isnan(r.mse_mid90)) {
        ++s.failed;
        continue;
      }
      ++s.ok;
      mse.push_back(r.mse_mid90);
      sum += r.mse_mid90;
      cond.push_back(r.condition_number);
      scond.push_back(r.sampling_condition_number);
      iters.push_back(static_cast<double>(r.iterations));
    }
    if (s.ok > 0) s.mean_mse = sum / static_cast<double>(s.ok);
    s.median_mse = median(mse);
    s.median_condition = median(cond);
    s.median_sampling_condition = median(scond);
    s.median_iterations = median(iters);
    out.push_back(s);
  }
  return out;
}

inline SweepResult run_sweep(const SweepSpec& spec, std::optional<std::size_t> threads = std::nullopt) {
  spec.validate();
  SweepResult res{spec, expand_cells(spec), {}, {}};
  const std::size_t total = res.cells.size() * spec.trials;
  res.records.resize(total);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++)
      res.records[i] = run_trial(spec, res.cells[i / spec.trials], i % spec.trials);
  };
  const std::size_t n = std::min(threads ? std::max<std::size_t>(1, *threads) : sweep_threads(), total);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  res.summaries = summarize(res.cells, res.records);
  return res;
}

// ---- CSV output ----

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt("%.10g", v);
}

inline std::string metric(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt("%.6e", v);
}

inline std::string shift_label(const std::optional<double>& s) { return s ? num(*s) : "equal"; }
inline std::string snr_label(double s) { return std::isinf(s) ? "none" : num(s); }

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << body;
}

}  // namespace detail

inline std::string trials_csv(const SweepResult& r) {
  std::string s =
      "cell,trial,omega,m,shift,snr_db,seed,bound_ratio,spikes,mse_mid90,iterations,condition_number,"
      "sampling_condition_number,rank,rate_ok,interleaved,separation_ok,status,error\n";
  for (const auto& t : r.records) {
    s += std::to_string(t.cell) + ',' + std::to_string(t.trial) + ',' + detail::num(t.omega) + ',' +
         std::to_string(t.m) + ',' + detail::shift_label(t.shift) + ',' + detail::snr_label(t.snr_db) + ',' +
         std::to_string(t.seed) + ',' + detail::num(t.bound_ratio) + ',' + std::to_string(t.spikes) + ',' +
         detail::metric(t.mse_mid90) + ',' + std::to_string(t.iterations) + ',' +
         detail::metric(t.condition_number) + ',' + detail::metric(t.sampling_condition_number) + ',' +
         std::to_string(t.rank) + ',' + (t.rate_ok ? "1" : "0") + ',' + (t.interleaved ? "1" : "0") + ',' +
         (t.separation_ok ? "1" : "0") + ',' + t.status + ',' + detail::quote(t.error) + '\n';
  }
  return s;
}

inline std::string timings_csv(const SweepResult& r) {
  std::string s = "cell,trial,runtime_ms\n";
  for (const auto& t : r.records)
    s += std::to_string(t.cell) + ',' + std::to_string(t.trial) + ',' + detail::fmt("%.3f", t.runtime_ms) + '\n';
  return s;
}

inline std::string cells_csv(const SweepResult& r) {
  std::string s =
      "cell,omega,m,shift,snr_db,trials_ok,trials_failed,mean_mse_mid90,median_mse_mid90,"
      "median_condition_number,median_sampling_condition_number,median_iterations\n";
  for (const auto& c : r.summaries)
    s += std::to_string(c.cell.index) + ',' + detail::num(c.cell.omega) + ',' + std::to_string(c.cell.m) + ',' +
         detail::shift_label(c.cell.shift) + ',' + detail::snr_label(c.cell.snr_db) + ',' + std::to_string(c.ok) +
         ',' + std::to_string(c.failed) + ',' + detail::metric(c.mean_mse) + ',' + detail::metric(c.median_mse) +
         ',' + detail::metric(c.median_condition) + ',' + detail::metric(c.median_sampling_condition) + ',' +
         detail::num(c.median_iterations) + '\n';
  return s;
}

enum class SweepDim { omega, m, shift, snr };

/// Median-MSE table with `col` spread across columns; remaining dimensions stay as keys.
inline std::string pivot_csv(const SweepResult& r, SweepDim row, SweepDim col,
                             double CellSummary::*value = &CellSummary::median_mse) {
  static const char* names[] = {"omega", "m", "shift", "snr_db"};
  const auto label = [](const SweepCell& c, SweepDim d) -> std::string {
    switch (d) {
      case SweepDim::omega: return detail::num(c.omega);
      case SweepDim::m: return std::to_string(c.m);
      case SweepDim::shift: return detail::shift_label(c.shift);
      case SweepDim::snr: return detail::snr_label(c.snr_db);
    }
    return "";
  };
  std::vector<SweepDim> keys;
  for (auto d : {SweepDim::omega, SweepDim::m, SweepDim::shift, SweepDim::snr})
    if (d != row && d != col) keys.push_back(d);
  keys.push_back(row);

  std::vector<std::string> cols;
  std::vector<std::string> row_order;
  std::map<std::string, std::map<std::string, double>> table;
  for (const auto& s : r.summaries) {
    const std::string cl = label(s.cell, col);
    if (std::find(cols.begin(), cols.end(), cl) == cols.end()) cols.push_back(cl);
    std::string rk;
    for (std::size_t i = 0; i < keys.size(); ++i) rk += (i ? "," : "") + label(s.cell, keys[i]);
    if (!table.count(rk)) row_order.push_back(rk);
    table[rk][cl] = s.*value;
  }
  std::string out;
  for (std::size_t i = 0; i < keys.size(); ++i) out += (i ? "," : "") + std::string(names[static_cast<int>(keys[i])]);
  for (const auto& c : cols) out += ',' + std::string(names[static_cast<int>(col)]) + '=' + c;
  out += '\n';
  for (const auto& rk : row_order) {
    out += rk;
    for (const auto& c : cols) {
      const auto it = table[rk].find(c);
      out += ',' + (it == table[rk].end() ? std::string("") : detail::metric(it->second));
    }
    out += '\n';
  }
  return out;
}

inline void write_sweep_outputs(const SweepResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "trials.csv", trials_csv(r));
  detail::write_file(dir / "timings.csv", timings_csv(r));
  detail::write_file(dir / "cells.csv", cells_csv(r));
  detail::write_file(dir / "fig8.csv", pivot_csv(r, SweepDim::omega, SweepDim::m));
  detail::write_file(dir / "fig9.csv", pivot_csv(r, SweepDim::omega, SweepDim::shift));
  detail::write_file(dir / "fig10.csv", pivot_csv(r, SweepDim::omega, SweepDim::shift));
  detail::write_file(dir / "fig10_condition.csv",
                     pivot_csv(r, SweepDim::omega, SweepDim::shift, &CellSummary::median_condition));
  detail::write_file(dir / "fig11a.csv", pivot_csv(r, SweepDim::omega, SweepDim::snr));
  detail::write_file(dir / "fig11b.csv", pivot_csv(r, SweepDim::shift, SweepDim::snr));
}

}  // namespace temcodec
