#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "temcodec/error.hpp"
#include "temcodec/linalg.hpp"

namespace temcodec {

inline constexpr std::size_t kDefaultGridPoints = 2000;

struct TimeWindow {
  double t_start = 0.0;
  double t_end = 1.0;

  double length() const { return t_end - t_start; }
  bool contains(double t) const { return t >= t_start && t <= t_end; }
};

inline void validate_window(const TimeWindow& w) {
  if (!std::isfinite(w.t_start) || !std::isfinite(w.t_end) || !(w.t_end > w.t_start))
    throw DataError("window must satisfy t_start < t_end (finite)");
}

/// Uniformly sampled signal.
struct GridSignal {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(dt * s);
  }
};

/// Grid layout: n points spanning [t_start, t_end] inclusive.
struct GridSpec {
  TimeWindow window;
  std::size_t n_points = kDefaultGridPoints;

  double dt() const { return window.length() / static_cast<double>(n_points - 1); }
  double time(std::size_t i) const { return window.t_start + dt() * static_cast<double>(i); }
  GridSignal zeros() const { return {window.t_start, dt(), std::vector<double>(n_points, 0.0)}; }
};

inline void validate_grid(const GridSpec& g) {
  validate_window(g.window);
  if (g.n_points < 2) throw DataError("grid needs at least 2 points");
}

/// Anything with point evaluation and a running integral from -infinity.
template <typename S>
concept TimeSignal = requires(const S& s, double t) {
  { s.eval(t) } -> std::convertible_to<double>;
  { s.primitive(t) } -> std::convertible_to<double>;
  { s.window() } -> std::convertible_to<TimeWindow>;
};

/// Finite sinc expansion  x(t) = sum_i c_i g(t - s_i),  g(t) = sin(omega t)/(pi t).
class BandlimitedSignal {
 public:
  BandlimitedSignal() = default;
  BandlimitedSignal(double omega, TimeWindow window, std::vector<double> centers,
                    std::vector<double> coeffs)
      : omega_(omega), window_(window), centers_(std::move(centers)), coeffs_(std::move(coeffs)) {
    if (!(omega_ > 0.0) || !std::isfinite(omega_)) throw DataError("omega must be positive");
    validate_window(window_);
    if (centers_.size() != coeffs_.size())
      throw DataError("centers and coeffs must have equal length");
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      if (!std::isfinite(centers_[i]) || !std::isfinite(coeffs_[i]))
        throw DataError("signal has non-finite centers or coeffs");
      if (i > 0 && !(centers_[i] > centers_[i - 1]))
        throw DataError("centers must be strictly increasing");
    }
  }

  double omega() const { return omega_; }
  TimeWindow window() const { return window_; }
  const std::vector<double>& centers() const { return centers_; }
  const std::vector<double>& coeffs() const { return coeffs_; }

  double eval(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < centers_.size(); ++i) s += coeffs_[i] * kernel(t - centers_[i]);
    return s;
  }

  double primitive(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < centers_.size(); ++i)
      s += coeffs_[i] * (si(omega_ * (t - centers_[i])) / std::numbers::pi + 0.5);
    return s;
  }

  double kernel(double u) const {
    if (u == 0.0) return omega_ / std::numbers::pi;
    return std::sin(omega_ * u) / (std::numbers::pi * u);
  }

  BandlimitedSignal scaled(double factor) const {
    std::vector<double> c = coeffs_;
    for (double& v : c) v *= factor;
    return {omega_, window_, centers_, std::move(c)};
  }

 private:
  double omega_ = 1.0;
  TimeWindow window_{};
  std::vector<double> centers_;
  std::vector<double> coeffs_;
};

/// x(t) = level on the whole line; primitive is taken from t_start.
class ConstantSignal {
 public:
  ConstantSignal(double level, TimeWindow window) : level_(level), window_(window) {
    validate_window(window_);
    if (!std::isfinite(level_)) throw DataError("constant level must be finite");
  }
  double eval(double) const { return level_; }
  double primitive(double t) const { return level_ * (t - window_.t_start); }
  TimeWindow window() const { return window_; }

 private:
  double level_;
  TimeWindow window_;
};

template <TimeSignal S>
GridSignal to_grid(const S& signal, const GridSpec& grid) {
  validate_grid(grid);
  GridSignal g{grid.window.t_start, grid.dt(), std::vector<double>(grid.n_points)};
  for (std::size_t i = 0; i < grid.n_points; ++i) g.values[i] = signal.eval(grid.time(i));
  return g;
}

template <TimeSignal S>
GridSignal to_grid(const S& signal, std::size_t n_points) {
  return to_grid(signal, GridSpec{signal.window(), n_points});
}

/// 1.01 * max |x| on a grid ten times denser than the default.
template <TimeSignal S>
double signal_bound(const S& signal) {
  const GridSignal g = to_grid(signal, 10 * kDefaultGridPoints);
  double m = 0.0;
  for (double v : g.values) m = std::max(m, std::abs(v));
  return 1.01 * m;
}

/// Uniform double on [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline BandlimitedSignal generate_random_signal(double omega, TimeWindow window,
                                                std::uint64_t seed) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw DataError("omega must be positive");
  validate_window(window);
  const double spacing = std::numbers::pi / omega;
  if (window.length() < spacing) throw DataError("window too short for one sinc center");

  const auto count =
      static_cast<std::size_t>(std::floor(window.length() / spacing * (1.0 + 1e-12))) + 1;
  std::vector<double> centers(count);
  std::vector<double> coeffs(count);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    centers[k] = window.t_start + static_cast<double>(k) * spacing;
    coeffs[k] = unit_uniform(rng);
  }
  BandlimitedSignal raw(omega, window, std::move(centers), std::move(coeffs));
  const double n = to_grid(raw, kDefaultGridPoints).norm();
  if (!(n > 0.0)) throw NumericalError("generated signal has zero norm");
  return raw.scaled(1.0 / n);
}

inline nlohmann::json to_json(const BandlimitedSignal& s) {
  return {{"omega", s.omega()},           {"t_start", s.window().t_start},
          {"t_end", s.window().t_end},    {"centers", s.centers()},
          {"coeffs", s.coeffs()}};
}

inline BandlimitedSignal signal_from_json(const nlohmann::json& j) {
  try {
    return {j.at("omega").get<double>(),
            TimeWindow{j.at("t_start").get<double>(), j.at("t_end").get<double>()},
            j.at("centers").get<std::vector<double>>(), j.at("coeffs").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed signal JSON: ") + e.what());
  }
}

inline void save_signal(const BandlimitedSignal& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(s).dump(2) << '\n';
}

inline BandlimitedSignal load_signal(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path + ": " + e.what());
  }
  return signal_from_json(j);
}

}  // namespace temcodec
