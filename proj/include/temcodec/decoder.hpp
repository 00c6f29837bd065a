#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "temcodec/encoder.hpp"
#include "temcodec/error.hpp"
#include "temcodec/linalg.hpp"
#include "temcodec/signal.hpp"

namespace temcodec {

/// Same-channel spike intervals with their target integrals.
struct ConsistencyConstraint {
  std::vector<std::pair<double, double>> intervals;
  std::vector<double> targets;
  std::size_t channel = 0;
};

inline ConsistencyConstraint make_constraint(const std::vector<double>& times, const TemParams& p,
                                             std::size_t channel = 0) {
  ConsistencyConstraint c;
  c.channel = channel;
  if (times.size() < 2) return c;
  c.targets = interval_integrals(times, p);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) c.intervals.emplace_back(times[k], times[k + 1]);
  return c;
}

inline std::vector<ConsistencyConstraint> make_constraints(const MultiSpikeTrain& train) {
  std::vector<ConsistencyConstraint> out;
  for (std::size_t ch = 0; ch < train.channels(); ++ch) {
    auto c = make_constraint(train.channel_times(ch), train.config.params, ch);
    if (!c.intervals.empty()) out.push_back(std::move(c));
  }
  return out;
}

/// Grid realization of B1 and the consistency projection for one channel.
///
/// Grid point i carries the cell [t_i - dt/2, t_i + dt/2). Interval k is measured by
/// mu_k(y) = dt * sum_i w_ki y_i with w_ki the covered fraction of cell i. B1 is the
/// orthogonal projection (grid inner product) onto span{w_k}, so interval integrals are
/// preserved exactly and I - 2 B1 is an isometry.
class ConsistencyProjector {
 public:
  ConsistencyProjector(const GridSpec& grid, const ConsistencyConstraint& constraint)
      : grid_(grid), dt_(grid.dt()) {
    validate_grid(grid);
    if (constraint.intervals.size() != constraint.targets.size())
      throw DataError("constraint intervals and targets differ in length");
    const double lo_edge = grid.window.t_start - 0.5 * dt_;
    const double hi_edge = grid.window.t_end + 0.5 * dt_;
    for (std::size_t k = 0; k < constraint.intervals.size(); ++k) {
      const auto [a, b] = constraint.intervals[k];
      if (!std::isfinite(constraint.targets[k]) || !std::isfinite(a) || !std::isfinite(b))
        throw DataError("constraint has non-finite entries");
      if (b - a < 1e-12) {
        detail::add_warning(warnings_, "degenerate interval skipped");
        continue;
      }
      if (a < lo_edge - 1e-12 || b > hi_edge + 1e-12)
        throw DataError("constraint interval outside the grid window");
      if (!rows_.empty() && a < rows_.back().b - 1e-12)
        throw DataError("constraint intervals overlap or are unordered");
      Row r{a, b, 0, {}};
      const double pos_a = (a - lo_edge) / dt_;
      const double pos_b = (b - lo_edge) / dt_;
      const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(pos_a)));
      const auto last = std::min(grid.n_points - 1,
                                 static_cast<std::size_t>(std::max(0.0, std::ceil(pos_b) - 1.0)));
      r.first = first;
      for (std::size_t i = first; i <= last; ++i) {
        const double c0 = lo_edge + dt_ * static_cast<double>(i);
        const double overlap = std::min(c0 + dt_, b) - std::max(c0, a);
        r.w.push_back(std::max(0.0, overlap) / dt_);
      }
      rows_.push_back(std::move(r));
      targets_.push_back(constraint.targets[k]);
    }
    const auto n = static_cast<Eigen::Index>(rows_.size());
    DenseMatrix g = DenseMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& rk = rows_[static_cast<std::size_t>(k)];
      for (Eigen::Index j = k; j < n; ++j) {
        const auto& rj = rows_[static_cast<std::size_t>(j)];
        if (rj.first >= rk.first + rk.w.size()) break;
        g(k, j) = g(j, k) = dot_rows(rk, rj);
      }
    }
    gram_.compute(g);
    if (n > 0 && gram_.info() != Eigen::Success)
      throw NumericalError("consistency Gram matrix is not positive definite");
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<double>& targets() const { return targets_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::vector<double> measure(const std::vector<double>& y) const {
    check(y);
    std::vector<double> mu(rows_.size());
    for (std::size_t k = 0; k < rows_.size(); ++k) {
      double s = 0.0;
      for (std::size_t m = 0; m < rows_[k].w.size(); ++m) s += rows_[k].w[m] * y[rows_[k].first + m];
      mu[k] = dt_ * s;
    }
    return mu;
  }

  /// targets - measure(y)
  std::vector<double> residual(const std::vector<double>& y) const {
    auto mu = measure(y);
    for (std::size_t k = 0; k < mu.size(); ++k) mu[k] = targets_[k] - mu[k];
    return mu;
  }

  std::vector<double> apply_B1(const std::vector<double>& y) const { return synthesize(measure(y)); }

  /// Minimum-norm grid correction whose interval integrals equal the given values.
  std::vector<double> synthesize(const std::vector<double>& integrals) const {
    std::vector<double> out(grid_.n_points, 0.0);
    if (rows_.empty()) return out;
    DenseVector rhs(static_cast<Eigen::Index>(integrals.size()));
    for (std::size_t k = 0; k < integrals.size(); ++k) rhs(static_cast<Eigen::Index>(k)) = integrals[k];
    const DenseVector c = gram_.solve(rhs);
    for (std::size_t k = 0; k < rows_.size(); ++k)
      for (std::size_t m = 0; m < rows_[k].w.size(); ++m)
        out[rows_[k].first + m] += c(static_cast<Eigen::Index>(k)) * rows_[k].w[m];
    return out;
  }

  /// y + B1(x - y) with B1 x known only through the targets.
  std::vector<double> project(const std::vector<double>& y) const {
    auto corr = synthesize(residual(y));
    for (std::size_t i = 0; i < corr.size(); ++i) corr[i] += y[i];
    return corr;
  }

 private:
  struct Row {
    double a, b;
    std::size_t first;
    std::vector<double> w;
  };

  double dot_rows(const Row& r, const Row& s) const {
    const std::size_t lo = std::max(r.first, s.first);
    const std::size_t hi = std::min(r.first + r.w.size(), s.first + s.w.size());
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += r.w[i - r.first] * s.w[i - s.first];
    return dt_ * acc;
  }

  void check(const std::vector<double>& y) const {
    if (y.size() != grid_.n_points) throw DataError("grid signal does not match projector grid");
  }

  GridSpec grid_;
  double dt_;
  std::vector<Row> rows_;
  std::vector<double> targets_;
  std::vector<std::string> warnings_;
  Eigen::LDLT<DenseMatrix> gram_;
};

namespace detail {

inline GridSpec grid_of(const GridSignal& y) {
  return {{y.t0, y.t0 + y.dt * static_cast<double>(y.size() - 1)}, y.size()};
}

}  // namespace detail

/// Ideal low-pass via the grid DFT.
inline GridSignal project_bandlimit(const GridSignal& y, double omega) {
  if (y.size() < 2) throw DataError("grid needs at least 2 points");
  if (!(std::numbers::pi / y.dt > omega)) throw DataError("grid cannot represent bandwidth");
  return {y.t0, y.dt, spectral_mask(y.values, y.dt, omega)};
}

inline GridSignal apply_B1(const GridSignal& y, const ConsistencyConstraint& c) {
  ConsistencyProjector p(detail::grid_of(y), c);
  return {y.t0, y.dt, p.apply_B1(y.values)};
}

inline GridSignal project_consistency(const GridSignal& y, const ConsistencyConstraint& c) {
  ConsistencyProjector p(detail::grid_of(y), c);
  return {y.t0, y.dt, p.project(y.values)};
}

enum class DecodeMethod { iterative, closed_form, midpoint_closed_form };

inline const char* to_string(DecodeMethod m) {
  switch (m) {
    case DecodeMethod::iterative: return "iterative";
    case DecodeMethod::closed_form: return "closed_form";
    case DecodeMethod::midpoint_closed_form: return "midpoint_closed_form";
  }
  return "unknown";
}

inline DecodeMethod parse_method(const std::string& s) {
  if (s == "iterative") return DecodeMethod::iterative;
  if (s == "closed_form") return DecodeMethod::closed_form;
  if (s == "midpoint_closed_form" || s == "midpoint") return DecodeMethod::midpoint_closed_form;
  throw UsageError("unknown decode method '" + s + "'");
}

struct DecodeResult {
  GridSignal estimate;
  DecodeMethod method = DecodeMethod::closed_form;
  std::string status = "ok";  // ok | converged | max_iter | aborted
  std::size_t iterations = 0;
  std::vector<double> residual_history;     // max-channel interval residual, infinity norm
  std::vector<double> residual_l2_history;  // same residuals, Euclidean norm (monitored)
  double final_residual = 0.0;
  std::vector<double> coefficients;
  double condition_number = std::numeric_limits<double>::quiet_NaN();
  double sampling_condition_number = std::numeric_limits<double>::quiet_NaN();
  std::size_t rank = 0;
  std::vector<std::string> warnings;
};

struct IterativeOptions {
  std::size_t max_iter = 2000;
  double tol = 1e-9;
  std::optional<GridSignal> initial;
};

/// Averaged projections x_{l+1} = x_l + (1/M) sum_i P_Omega(B1_i (x - x_l)).
inline DecodeResult decode_iterative(const std::vector<ConsistencyConstraint>& constraints,
                                     double omega, const GridSpec& grid,
                                     const IterativeOptions& opts = {}) {
  validate_grid(grid);
  if (constraints.empty()) throw DataError("iterative decoding needs at least one channel with 2 spikes");
  if (!(std::numbers::pi / grid.dt() > omega)) throw DataError("grid cannot represent bandwidth");
  if (!(opts.tol > 0.0)) throw UsageError("tol must be positive");

  DecodeResult res;
  res.method = DecodeMethod::iterative;
  std::vector<ConsistencyProjector> proj;
  for (const auto& c : constraints) {
    proj.emplace_back(grid, c);
    for (const auto& w : proj.back().warnings()) detail::add_warning(res.warnings, w);
  }
  SincConvolution lowpass(grid.n_points, grid.dt(), omega);
  const double inv_m = 1.0 / static_cast<double>(proj.size());

  std::vector<double> x(grid.n_points, 0.0);
  if (opts.initial) {
    if (opts.initial->size() != grid.n_points) throw DataError("initial guess does not match grid");
    x = opts.initial->values;
  }

  std::size_t increases = 0;
  res.status = "max_iter";
  std::vector<double> corr(grid.n_points);
  for (std::size_t it = 0;; ++it) {
    std::fill(corr.begin(), corr.end(), 0.0);
    double r = 0.0;
    double r2 = 0.0;
    for (const auto& p : proj) {
      const auto e = p.residual(x);
      for (double v : e) {
        r = std::max(r, std::abs(v));
        r2 += v * v;
      }
      const auto s = p.synthesize(e);
      for (std::size_t i = 0; i < s.size(); ++i) corr[i] += inv_m * s[i];
    }
    if (!std::isfinite(r)) throw NumericalError("iterative decoder diverged (non-finite residual)");
    res.residual_history.push_back(r);
    res.residual_l2_history.push_back(std::sqrt(r2));
    if (r < opts.tol) {
      res.status = "converged";
      break;
    }
    const auto& l2 = res.residual_l2_history;
    if (it >= 3 && l2[it] > l2[it - 1] * (1.0 + 1e-12)) {
      if (++increases == 1)
        detail::add_warning(res.warnings, "consistency residual increased after iteration 3");
      if (increases > 10) {
        res.status = "aborted";
        detail::add_warning(res.warnings,
                            "residual non-monotone for more than 10 iterations: bandwidth or bias bound likely violated");
        break;
      }
    } else {
      increases = 0;
    }
    if (it >= opts.max_iter) break;
    const auto px = lowpass.apply(corr);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += px[i];
    res.iterations = it + 1;
  }
  res.final_residual = res.residual_history.back();
  const auto& h = res.residual_history;
  if (res.status == "max_iter" && h.size() >= 20 && h[h.size() / 2] < 2.0 * h.back())
    detail::add_warning(res.warnings, "consistency residual plateau");
  res.estimate = {grid.window.t_start, grid.dt(), std::move(x)};
  return res;
}

inline DecodeResult decode_iterative(const MultiSpikeTrain& train, double omega, const GridSpec& grid,
                                     const IterativeOptions& opts = {}) {
  auto r = decode_iterative(make_constraints(train), omega, grid, opts);
  for (const auto& w : train.warnings) detail::add_warning(r.warnings, w);
  return r;
}

inline DecodeResult decode_iterative(const SpikeTrain& train, double omega, const GridSpec& grid,
                                     const IterativeOptions& opts = {}) {
  return decode_iterative(std::vector{make_constraint(train.times, train.params)}, omega, grid, opts);
}

struct ClosedFormOptions {
  double rel_cutoff = 1e-12;
  bool sampling_condition = true;
};

/// Integral over [c, d] of (1_[a,b) * g)(u).
inline double kernel_integral(double omega, double a, double b, double c, double d) {
  const auto f = [omega](double x) { return si_antiderivative(omega * x); };
  return (f(d - a) - f(d - b) - f(c - a) + f(c - b)) / (std::numbers::pi * omega);
}

/// (1_[a,b) * g)(t)
inline double smoothed_indicator(double omega, double a, double b, double t) {
  return (si(omega * (t - a)) - si(omega * (t - b))) / std::numbers::pi;
}

/// Condition number of the stride-M interval measurements on a Nyquist-spaced sinc basis
/// covering the window plus two spacings on each side. Infinite when underdetermined.
inline double sampling_condition_number(const std::vector<double>& merged, std::size_t m,
                                        double omega, TimeWindow window) {
  if (merged.size() < m + 1) return std::numeric_limits<double>::infinity();
  const double h = std::numbers::pi / omega;
  std::vector<double> s;
  for (double t = window.t_start - 2.0 * h; t <= window.t_end + 2.0 * h + 1e-12 * h; t += h) s.push_back(t);
  const auto rows = static_cast<Eigen::Index>(merged.size() - m);
  const auto cols = static_cast<Eigen::Index>(s.size());
  if (rows < cols) return std::numeric_limits<double>::infinity();
  DenseMatrix a(rows, cols);
  for (Eigen::Index l = 0; l < rows; ++l)
    for (Eigen::Index j = 0; j < cols; ++j)
      a(l, j) = (si(omega * (merged[l + m] - s[j])) - si(omega * (merged[l] - s[j]))) / std::numbers::pi;
  return condition_number(a);
}

/// x = sum_j c_j (1_[t_j, t_{j+1}) * g) with c = pinv(H) q over merged stride-M intervals.
inline DecodeResult decode_closed_form(const std::vector<double>& merged, std::size_t m,
                                       const TemParams& params, double omega, const GridSpec& grid,
                                       const ClosedFormOptions& opts = {}) {
  validate_grid(grid);
  params.validate();
  if (m == 0) throw DataError("channel count must be positive");
  if (!(omega > 0.0)) throw DataError("omega must be positive");
  if (merged.size() < m + 1 || merged.size() < 2)
    throw DataError("closed form needs at least M+1 merged spikes");
  for (std::size_t k = 1; k < merged.size(); ++k)
    if (!(merged[k] >= merged[k - 1])) throw DataError("merged spike times must be sorted");

  DecodeResult res;
  res.method = DecodeMethod::closed_form;
  const auto q = interval_integrals(merged, params, m);
  const auto rows = static_cast<Eigen::Index>(q.size());
  const auto cols = static_cast<Eigen::Index>(merged.size() - 1);
  DenseMatrix h(rows, cols);
  for (Eigen::Index l = 0; l < rows; ++l)
    for (Eigen::Index j = 0; j < cols; ++j)
      h(l, j) = kernel_integral(omega, merged[j], merged[j + 1], merged[l], merged[l + m]);
  const DenseVector qv = Eigen::Map<const DenseVector>(q.data(), rows);
  const PinvResult pi = pinv_truncated(h, opts.rel_cutoff);
  const DenseVector c = pi.pinv * qv;
  res.condition_number = pi.condition_number;
  res.rank = static_cast<std::size_t>(pi.rank);
  res.final_residual = (qv - h * c).lpNorm<Eigen::Infinity>();
  res.coefficients.assign(c.data(), c.data() + c.size());
  if (pi.rank < std::min(rows, cols))
    res.warnings.push_back("truncated pseudoinverse: effective rank " + std::to_string(pi.rank) + " of " +
                           std::to_string(std::min(rows, cols)));
  if (opts.sampling_condition)
    res.sampling_condition_number =
        sampling_condition_number(merged, m, omega, grid.window);

  // sum_j c_j [S(t - t_j) - S(t - t_{j+1})] = sum_i S(t - t_i) (c_i - c_{i-1})
  std::vector<double> w(merged.size(), 0.0);
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double cur = i < static_cast<std::size_t>(cols) ? c(static_cast<Eigen::Index>(i)) : 0.0;
    const double prev = i > 0 ? c(static_cast<Eigen::Index>(i - 1)) : 0.0;
    w[i] = (cur - prev) / std::numbers::pi;
  }
  GridSignal est = grid.zeros();
  for (std::size_t n = 0; n < grid.n_points; ++n) {
    const double t = grid.time(n);
    double s = 0.0;
    for (std::size_t i = 0; i < merged.size(); ++i)
      if (w[i] != 0.0) s += w[i] * si(omega * (t - merged[i]));
    est.values[n] = s;
  }
  res.estimate = std::move(est);
  return res;
}

inline DecodeResult decode_closed_form(const MultiSpikeTrain& train, double omega, const GridSpec& grid,
                                       const ClosedFormOptions& opts = {}) {
  auto r = decode_closed_form(train.merged_times(), train.channels(), train.config.params, omega, grid, opts);
  for (const auto& w : train.warnings) detail::add_warning(r.warnings, w);
  return r;
}

/// Single channel, sinc basis at interval midpoints: H_lk = int_{t_l}^{t_{l+1}} g(u - s_k) du.
inline DecodeResult decode_closed_form_midpoint(const SpikeTrain& train, double omega, const GridSpec& grid,
                                                const ClosedFormOptions& opts = {}) {
  validate_grid(grid);
  train.params.validate();
  const auto& t = train.times;
  if (t.size() < 2) throw DataError("midpoint closed form needs at least 2 spikes");
  DecodeResult res;
  res.method = DecodeMethod::midpoint_closed_form;
  const auto q = interval_integrals(t, train.params);
  const auto n = static_cast<Eigen::Index>(q.size());
  std::vector<double> mid(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) mid[k] = 0.5 * (t[k] + t[k + 1]);
  DenseMatrix h(n, n);
  for (Eigen::Index l = 0; l < n; ++l)
    for (Eigen::Index k = 0; k < n; ++k)
      h(l, k) = (si(omega * (t[l + 1] - mid[k])) - si(omega * (t[l] - mid[k]))) / std::numbers::pi;
  const DenseVector qv = Eigen::Map<const DenseVector>(q.data(), n);
  const PinvResult pi = pinv_truncated(h, opts.rel_cutoff);
  const DenseVector c = pi.pinv * qv;
  res.condition_number = pi.condition_number;
  res.rank = static_cast<std::size_t>(pi.rank);
  res.final_residual = (qv - h * c).lpNorm<Eigen::Infinity>();
  res.coefficients.assign(c.data(), c.data() + c.size());
  if (pi.rank < n)
    res.warnings.push_back("truncated pseudoinverse: effective rank " + std::to_string(pi.rank) + " of " +
                           std::to_string(n));
  GridSignal est = grid.zeros();
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double u = grid.time(i);
    double s = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double d = u - mid[static_cast<std::size_t>(k)];
      s += c(k) * (d == 0.0 ? omega / std::numbers::pi : std::sin(omega * d) / (std::numbers::pi * d));
    }
    est.values[i] = s;
  }
  res.estimate = std::move(est);
  return res;
}

inline DecodeResult decode_closed_form_midpoint(const MultiSpikeTrain& train, double omega,
                                                const GridSpec& grid, const ClosedFormOptions& opts = {}) {
  if (train.channels() != 1) throw DataError("midpoint closed form is single-channel only");
  return decode_closed_form_midpoint(train.channel(0), omega, grid, opts);
}

}  // namespace temcodec
