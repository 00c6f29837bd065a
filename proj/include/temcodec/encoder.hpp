#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "temcodec/error.hpp"
#include "temcodec/signal.hpp"

namespace temcodec {

inline constexpr const char* kToolVersion = "0.1.0";

/// Integrate-and-fire machine: integrate (x + b)/kappa, fire at +delta, reset to -delta.
struct TemParams {
  double kappa = 1.0;
  double delta = 1.0;
  double bias = 1.0;

  void validate() const {
    if (!(kappa > 0.0) || !(delta > 0.0) || !(bias > 0.0) || !std::isfinite(kappa) ||
        !std::isfinite(delta) || !std::isfinite(bias))
      throw DataError("TemParams: kappa, delta and bias must be finite and positive");
  }
  double cycle() const { return 2.0 * kappa * delta; }
};

/// Largest bandwidth with uniqueness guarantees for M channels: M pi (b - c) / (2 kappa delta).
inline double bandwidth_bound(const TemParams& p, double c, std::size_t channels) {
  return static_cast<double>(channels) * std::numbers::pi * (p.bias - c) / p.cycle();
}

struct JitterInfo {
  double snr_db = std::numeric_limits<double>::infinity();
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t inversions = 0;  // adjacent pairs out of order before re-sorting
  std::size_t dropped = 0;     // events pushed outside the window
};

struct SpikeTrain {
  std::vector<double> times;
  TemParams params;
  TimeWindow window;
  double y0 = -1.0;
  std::vector<std::string> warnings;
  std::optional<JitterInfo> jitter;
};

struct EncodeOptions {
  // Known bound c >= max|x| on the window. Estimated from the signal when absent.
  std::optional<double> signal_bound;
  double time_tol = 1e-13;
};

namespace detail {

inline void add_warning(std::vector<std::string>& w, const std::string& msg) {
  if (std::find(w.begin(), w.end(), msg) == w.end()) w.push_back(msg);
}

template <TimeSignal S>
double max_abs_estimate(const S& s) {
  if constexpr (std::is_same_v<S, ConstantSignal>) {
    return std::abs(s.eval(0.0));
  } else {
    return signal_bound(s) / 1.01;
  }
}

}  // namespace detail

/// Single-channel encoding by bisection on the analytic primitive.
template <TimeSignal S>
SpikeTrain encode(const S& signal, const TemParams& params, double y0,
                  const EncodeOptions& opts = {}) {
  params.validate();
  const TimeWindow w = signal.window();
  validate_window(w);
  if (!(y0 >= -params.delta && y0 < params.delta))
    throw DataError("initial integrator value must lie in [-delta, delta)");

  const double c = opts.signal_bound ? *opts.signal_bound : detail::max_abs_estimate(signal);
  if (!std::isfinite(c)) throw DataError("signal is not finite on the window");
  SpikeTrain train{{}, params, w, y0, {}, std::nullopt};
  const bool guaranteed = params.bias > c;
  if (!guaranteed)
    detail::add_warning(train.warnings,
                        "bias does not exceed max|x|: spiking may stall (best-effort encoding)");

  const double kappa = params.kappa;
  const double b = params.bias;
  double tp = w.t_start;
  double need = params.delta - y0;
  double p_prev = signal.primitive(tp);

  for (;;) {
    const auto phi = [&](double t) {
      return (signal.primitive(t) - p_prev + b * (t - tp)) / kappa - need;
    };
    if (phi(w.t_end) < 0.0 && guaranteed) break;

    double lo = tp;
    double hi = w.t_end;
    if (guaranteed) {
      lo = std::min(tp + need * kappa / (b + c), w.t_end);
      hi = std::min(tp + need * kappa / (b - c), w.t_end);
      if (phi(lo) > 0.0) lo = tp;
      if (phi(hi) < 0.0) hi = w.t_end;
    } else {
      // First crossing: phi' <= (b + c)/kappa, so no root hides inside a step.
      const double slope = (b + c) / kappa;
      const double min_step = 1e-9 * w.length();
      double t = tp;
      double f = -need;
      bool found = false;
      while (t < w.t_end) {
        const double next = std::min(t + std::max(-f / slope, min_step), w.t_end);
        const double fn = phi(next);
        if (fn >= 0.0) {
          lo = t;
          hi = next;
          found = true;
          break;
        }
        t = next;
        f = fn;
      }
      if (!found) break;
    }

    while (hi - lo > opts.time_tol) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (phi(mid) < 0.0 ? lo : hi) = mid;
    }
    const double t_spike = 0.5 * (lo + hi);
    if (!(t_spike > tp) && !train.times.empty())
      throw NumericalError("encoder failed to advance: spike times not increasing");
    train.times.push_back(t_spike);
    tp = t_spike;
    p_prev = signal.primitive(tp);
    need = 2.0 * params.delta;
    if (tp >= w.t_end) break;
  }
  return train;
}

/// Cumulative-sum encoding with a fixed step, used to cross-check the analytic path.
template <TimeSignal S>
SpikeTrain encode_discrete(const S& signal, const TemParams& params, double y0,
                           std::size_t steps = 100000) {
  params.validate();
  const TimeWindow w = signal.window();
  if (steps < 2) throw DataError("encode_discrete: need at least 2 steps");
  const double dt = w.length() / static_cast<double>(steps);
  SpikeTrain train{{}, params, w, y0, {}, std::nullopt};
  double y = y0;
  double f_prev = signal.eval(w.t_start);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double t = w.t_start + dt * static_cast<double>(i);
    const double f = signal.eval(t);
    const double inc = 0.5 * (f_prev + f) * dt / params.kappa + params.bias * dt / params.kappa;
    if (y + inc >= params.delta && inc > 0.0) {
      const double frac = (params.delta - y) / inc;
      train.times.push_back(t - dt + frac * dt);
      y = y + inc - 2.0 * params.delta;
    } else {
      y += inc;
    }
    f_prev = f;
  }
  return train;
}

/// Integrator value at t reconstructed from the train and the signal primitive.
template <TimeSignal S>
double integrator_state(const S& signal, const SpikeTrain& train, double t) {
  const auto it = std::upper_bound(train.times.begin(), train.times.end(), t);
  const auto& p = train.params;
  if (it == train.times.begin())
    return train.y0 + (signal.primitive(t) - signal.primitive(train.window.t_start) +
                       p.bias * (t - train.window.t_start)) /
                          p.kappa;
  const double tk = *(it - 1);
  return -p.delta + (signal.primitive(t) - signal.primitive(tk) + p.bias * (t - tk)) / p.kappa;
}

/// Map v into [-delta, delta) modulo 2 delta.
inline double wrap_state(double v, double delta) {
  const double period = 2.0 * delta;
  double r = v - period * std::floor((v + delta) / period);
  if (r >= delta) r -= period;
  if (r < -delta) r += period;
  return r;
}

struct MultiChannelConfig {
  TemParams params;
  std::vector<double> shifts;          // alpha_1..alpha_M
  std::vector<double> initial_values;  // y_i(t_start)

  std::size_t channels() const { return initial_values.size(); }
  double min_shift() const { return *std::min_element(shifts.begin(), shifts.end()); }

  /// Builds the initial values y_{i+1} = wrap(y_i + alpha_i), starting from y1.
  static MultiChannelConfig from_shifts(const TemParams& params, std::vector<double> shifts,
                                        std::optional<double> y1 = std::nullopt) {
    params.validate();
    if (shifts.empty()) throw DataError("at least one channel is required");
    const double d = params.delta;
    const double period = 2.0 * d;
    double total = 0.0;
    for (const double a : shifts) {
      if (!std::isfinite(a)) throw DataError("shifts must be finite");
      const double r = a - period * std::floor(a / period);
      if (shifts.size() > 1 && (r <= 1e-15 * period || period - r <= 1e-15 * period))
        throw DataError("zero shift: channels degenerate");
      total += a;
    }
    const double rem = total - period * std::round(total / period);
    if (std::abs(rem) > 1e-9 * period)
      throw DataError("shifts must sum to a multiple of 2*delta");

    MultiChannelConfig cfg{params, shifts, {}};
    double y = y1 ? *y1 : -d;
    if (!(y >= -d && y < d)) throw DataError("initial integrator value must lie in [-delta, delta)");
    cfg.initial_values.push_back(y);
    for (std::size_t i = 0; i + 1 < shifts.size(); ++i) {
      y = wrap_state(y + shifts[i], d);
      cfg.initial_values.push_back(y);
    }
    return cfg;
  }

  /// All shifts equal to 2 delta / M.
  static MultiChannelConfig equal(const TemParams& params, std::size_t m) {
    if (m == 0) throw DataError("at least one channel is required");
    return from_shifts(params,
                       std::vector<double>(m, 2.0 * params.delta / static_cast<double>(m)));
  }

  /// alpha_1 given, the remaining M-1 shifts share what is left of 2 delta.
  static MultiChannelConfig leading_shift(const TemParams& params, std::size_t m, double alpha1) {
    if (m == 1) return equal(params, 1);
    const double rest = (2.0 * params.delta - alpha1) / static_cast<double>(m - 1);
    std::vector<double> s(m, rest);
    s[0] = alpha1;
    return from_shifts(params, std::move(s));
  }
};

struct SpikeEvent {
  double time;
  std::size_t channel;  // 0-based
};

struct MultiSpikeTrain {
  std::vector<SpikeEvent> events;
  MultiChannelConfig config;
  TimeWindow window;
  std::vector<std::string> warnings;
  std::optional<JitterInfo> jitter;

  std::size_t channels() const { return config.channels(); }

  std::vector<double> merged_times() const {
    std::vector<double> t(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) t[i] = events[i].time;
    return t;
  }

  std::vector<double> channel_times(std::size_t ch) const {
    std::vector<double> t;
    for (const auto& e : events)
      if (e.channel == ch) t.push_back(e.time);
    return t;
  }

  SpikeTrain channel(std::size_t ch) const {
    return {channel_times(ch), config.params, window, config.initial_values.at(ch), {}, jitter};
  }
};

/// Channel labels repeat with period M and the first M labels are distinct.
inline bool is_interleaved(const std::vector<SpikeEvent>& events, std::size_t m) {
  if (m <= 1) return true;
  std::vector<bool> seen(m, false);
  for (std::size_t k = 0; k < std::min(m, events.size()); ++k) {
    if (events[k].channel >= m || seen[events[k].channel]) return false;
    seen[events[k].channel] = true;
  }
  for (std::size_t k = 0; k + m < events.size(); ++k)
    if (events[k + m].channel != events[k].channel) return false;
  return true;
}

inline void sort_events(std::vector<SpikeEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const SpikeEvent& a, const SpikeEvent& b) {
    return a.time < b.time || (a.time == b.time && a.channel < b.channel);
  });
}

template <TimeSignal S>
MultiSpikeTrain encode_multi(const S& signal, const MultiChannelConfig& config,
                             EncodeOptions opts = {}) {
  if (config.channels() == 0) throw DataError("at least one channel is required");
  if (!opts.signal_bound) opts.signal_bound = detail::max_abs_estimate(signal);
  MultiSpikeTrain out{{}, config, signal.window(), {}, std::nullopt};
  for (std::size_t ch = 0; ch < config.channels(); ++ch) {
    SpikeTrain t = encode(signal, config.params, config.initial_values[ch], opts);
    for (double v : t.times) out.events.push_back({v, ch});
    for (const auto& w : t.warnings) detail::add_warning(out.warnings, w);
  }
  sort_events(out.events);
  if (!is_interleaved(out.events, config.channels()))
    detail::add_warning(out.warnings, "spike trains are not interleaved");
  return out;
}

inline std::vector<double> interval_integrals(const std::vector<double>& times,
                                              const TemParams& p, std::size_t stride = 1) {
  if (stride == 0) throw DataError("stride must be positive");
  if (times.size() < stride + 1) throw DataError("too few spikes for interval integrals");
  std::vector<double> q(times.size() - stride);
  for (std::size_t k = 0; k < q.size(); ++k)
    q[k] = p.cycle() - p.bias * (times[k + stride] - times[k]);
  return q;
}

inline std::vector<double> interval_integrals(const SpikeTrain& train) {
  return interval_integrals(train.times, train.params);
}

/// Merged-order integrals: consecutive spikes of one machine are M apart.
inline std::vector<double> interval_integrals(const MultiSpikeTrain& train) {
  return interval_integrals(train.merged_times(), train.config.params, train.channels());
}

struct RateReport {
  std::vector<double> channel_rates;
  double combined_rate = 0.0;
  double required_rate = 0.0;  // M (b - c) / (2 kappa delta)
  bool rate_ok = false;        // combined >= 0.95 * required
  double max_gap = 0.0;        // largest same-channel gap
  double gap_bound = 0.0;      // 2 kappa delta / (b - c)
  bool gap_ok = false;
  double min_separation = 0.0;    // smallest merged gap
  double separation_bound = 0.0;  // kappa * min(alpha) / (b + c)
  bool separation_ok = false;
  bool interleaved = false;
};

namespace detail {

inline double rate_of(const std::vector<double>& t) {
  if (t.size() < 2 || !(t.back() > t.front())) return 0.0;
  return static_cast<double>(t.size() - 1) / (t.back() - t.front());
}

}  // namespace detail

inline RateReport diagnostics(const MultiSpikeTrain& train, double c) {
  const auto& p = train.config.params;
  const std::size_t m = train.channels();
  RateReport r;
  r.required_rate = static_cast<double>(m) * (p.bias - c) / p.cycle();
  r.gap_bound = p.bias > c ? p.cycle() / (p.bias - c) : std::numeric_limits<double>::infinity();
  r.separation_bound = p.kappa * train.config.min_shift() / (p.bias + c);
  for (std::size_t ch = 0; ch < m; ++ch) {
    const auto t = train.channel_times(ch);
    r.channel_rates.push_back(detail::rate_of(t));
    for (std::size_t k = 0; k + 1 < t.size(); ++k) r.max_gap = std::max(r.max_gap, t[k + 1] - t[k]);
  }
  const auto merged = train.merged_times();
  r.combined_rate = detail::rate_of(merged);
  r.min_separation = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < merged.size(); ++k)
    r.min_separation = std::min(r.min_separation, merged[k + 1] - merged[k]);
  r.rate_ok = r.combined_rate >= 0.95 * r.required_rate;
  r.gap_ok = r.max_gap <= r.gap_bound * (1.0 + 1e-12) + 1e-12;
  r.separation_ok = r.min_separation >= r.separation_bound * (1.0 - 1e-9) - 1e-12;
  r.interleaved = is_interleaved(train.events, m);
  return r;
}

inline RateReport diagnostics(const SpikeTrain& train, double c) {
  MultiSpikeTrain m{{}, MultiChannelConfig::from_shifts(train.params, {2.0 * train.params.delta}),
                    train.window, {}, std::nullopt};
  for (double t : train.times) m.events.push_back({t, 0});
  return diagnostics(m, c);
}

namespace detail {

inline double rms_gap(const std::vector<double>& t) {
  if (t.size() < 2) throw DataError("jitter needs at least 2 spikes");
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) s += (t[k + 1] - t[k]) * (t[k + 1] - t[k]);
  return std::sqrt(s / static_cast<double>(t.size() - 1));
}

}  // namespace detail

/// Gaussian timing noise with sigma = RMS(merged inter-spike interval) * 10^(-snr/20).
inline MultiSpikeTrain add_time_jitter(const MultiSpikeTrain& train, double snr_db,
                                       std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw DataError("snr_db must be finite or +inf");
  MultiSpikeTrain out = train;
  JitterInfo info;
  info.snr_db = snr_db;
  info.seed = seed;
  if (std::isinf(snr_db)) {
    out.jitter = info;
    return out;
  }
  info.sigma = detail::rms_gap(train.merged_times()) * std::pow(10.0, -snr_db / 20.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, info.sigma);
  for (auto& e : out.events) e.time += noise(rng);
  for (std::size_t k = 0; k + 1 < out.events.size(); ++k)
    if (out.events[k + 1].time < out.events[k].time) ++info.inversions;
  sort_events(out.events);
  const auto before = out.events.size();
  std::erase_if(out.events, [&](const SpikeEvent& e) { return !train.window.contains(e.time); });
  info.dropped = before - out.events.size();
  if (info.inversions > 0)
    detail::add_warning(out.warnings, "jitter reordered spikes; merged order re-sorted");
  if (!is_interleaved(out.events, out.channels()))
    detail::add_warning(out.warnings, "spike trains are not interleaved");
  out.jitter = info;
  return out;
}

inline SpikeTrain add_time_jitter(const SpikeTrain& train, double snr_db, std::uint64_t seed) {
  MultiSpikeTrain m{{}, MultiChannelConfig::from_shifts(train.params, {2.0 * train.params.delta},
                                                        train.y0),
                    train.window, {}, std::nullopt};
  for (double t : train.times) m.events.push_back({t, 0});
  const MultiSpikeTrain j = add_time_jitter(m, snr_db, seed);
  SpikeTrain out = train;
  out.times = j.merged_times();
  out.jitter = j.jitter;
  for (const auto& w : j.warnings) detail::add_warning(out.warnings, w);
  return out;
}

// ---- spike-stream files ----

struct SpikeMetadata {
  TemParams params;
  std::vector<double> shifts;
  std::vector<double> initial_values;
  TimeWindow window;
  std::optional<double> signal_bound;
  std::optional<double> omega;
  std::optional<std::uint64_t> seed;
  std::optional<JitterInfo> jitter;
};

inline nlohmann::json to_json(const SpikeMetadata& m) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["params"] = {{"kappa", m.params.kappa}, {"delta", m.params.delta}, {"bias", m.params.bias}};
  j["channels"] = m.initial_values.size();
  j["shifts"] = m.shifts;
  j["initial_values"] = m.initial_values;
  j["window"] = {{"t_start", m.window.t_start}, {"t_end", m.window.t_end}};
  j["signal_bound"] = m.signal_bound ? nlohmann::json(*m.signal_bound) : nlohmann::json(nullptr);
  j["omega"] = m.omega ? nlohmann::json(*m.omega) : nlohmann::json(nullptr);
  j["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
  if (m.jitter) {
    j["snr_db"] = std::isinf(m.jitter->snr_db) ? nlohmann::json("none") : nlohmann::json(m.jitter->snr_db);
    j["sigma"] = m.jitter->sigma;
    j["jitter_seed"] = m.jitter->seed;
    j["inversions"] = m.jitter->inversions;
    j["dropped"] = m.jitter->dropped;
  } else {
    j["snr_db"] = "none";
    j["sigma"] = 0.0;
  }
  return j;
}

inline SpikeMetadata metadata_from_json(const nlohmann::json& j) {
  try {
    SpikeMetadata m;
    const auto& p = j.at("params");
    m.params = {p.at("kappa").get<double>(), p.at("delta").get<double>(), p.at("bias").get<double>()};
    m.params.validate();
    m.shifts = j.at("shifts").get<std::vector<double>>();
    m.initial_values = j.at("initial_values").get<std::vector<double>>();
    if (m.shifts.size() != m.initial_values.size() || m.shifts.empty())
      throw DataError("metadata: shifts and initial_values must be non-empty and equal length");
    m.window = {j.at("window").at("t_start").get<double>(), j.at("window").at("t_end").get<double>()};
    validate_window(m.window);
    if (j.contains("signal_bound") && j["signal_bound"].is_number())
      m.signal_bound = j["signal_bound"].get<double>();
    if (j.contains("omega") && j["omega"].is_number()) m.omega = j["omega"].get<double>();
    if (j.contains("seed") && j["seed"].is_number_unsigned()) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("snr_db") && j["snr_db"].is_number()) {
      JitterInfo info;
      info.snr_db = j["snr_db"].get<double>();
      info.sigma = j.value("sigma", 0.0);
      info.seed = j.value("jitter_seed", std::uint64_t{0});
      info.inversions = j.value("inversions", std::size_t{0});
      info.dropped = j.value("dropped", std::size_t{0});
      m.jitter = info;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed spike metadata: ") + e.what());
  }
}

inline SpikeMetadata metadata_of(const MultiSpikeTrain& t) {
  SpikeMetadata m;
  m.params = t.config.params;
  m.shifts = t.config.shifts;
  m.initial_values = t.config.initial_values;
  m.window = t.window;
  m.jitter = t.jitter;
  return m;
}

inline std::string spikes_to_csv(const std::vector<SpikeEvent>& events) {
  std::string out = "channel,time\n";
  char buf[64];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%zu,%.15g\n", e.channel, e.time);
    out += buf;
  }
  return out;
}

inline std::vector<SpikeEvent> spikes_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("spike CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "channel,time") throw DataError("spike CSV header must be 'channel,time'");
  std::vector<SpikeEvent> events;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("spike CSV row " + std::to_string(row) + ": missing comma");
    try {
      std::size_t used = 0;
      const long ch = std::stol(line.substr(0, comma), &used);
      if (used != comma || ch < 0) throw std::invalid_argument("channel");
      const std::string ts = line.substr(comma + 1);
      const double t = std::stod(ts, &used);
      if (used != ts.size() || !std::isfinite(t)) throw std::invalid_argument("time");
      events.push_back({t, static_cast<std::size_t>(ch)});
    } catch (const std::logic_error&) {
      throw DataError("spike CSV row " + std::to_string(row) + ": cannot parse '" + line + "'");
    }
  }
  for (std::size_t k = 1; k < events.size(); ++k)
    if (events[k].time < events[k - 1].time) throw DataError("spike CSV rows must be sorted by time");
  return events;
}

inline void write_spikes(const MultiSpikeTrain& train, const SpikeMetadata& meta,
                         const std::string& csv_path, const std::string& meta_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw DataError("cannot write " + csv_path);
  csv << spikes_to_csv(train.events);
  std::ofstream js(meta_path, std::ios::binary);
  if (!js) throw DataError("cannot write " + meta_path);
  js << to_json(meta).dump(2) << '\n';
}

/// Reassemble a train from CSV rows plus the metadata sidecar.
inline MultiSpikeTrain read_spikes(const std::string& csv_path, const std::string& meta_path,
                                   SpikeMetadata* meta_out = nullptr) {
  std::ifstream js(meta_path);
  if (!js) throw DataError("missing spike metadata: " + meta_path);
  nlohmann::json j;
  try {
    js >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + meta_path + ": " + e.what());
  }
  SpikeMetadata meta = metadata_from_json(j);
  std::ifstream csv(csv_path);
  if (!csv) throw DataError("cannot read " + csv_path);
  MultiSpikeTrain t;
  t.events = spikes_from_csv(csv);
  t.config = {meta.params, meta.shifts, meta.initial_values};
  t.window = meta.window;
  t.jitter = meta.jitter;
  for (const auto& e : t.events)
    if (e.channel >= t.channels()) throw DataError("spike CSV channel index exceeds metadata channel count");
  if (meta_out) *meta_out = meta;
  return t;
}

}  // namespace temcodec
