#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "temcodec/decoder.hpp"
#include "temcodec/encoder.hpp"
#include "temcodec/linalg.hpp"
#include "temcodec/metrics.hpp"
#include "temcodec/signal.hpp"

namespace temcodec {

struct SelfTestResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline std::vector<SelfTestResult> selftest_checks() {
  std::vector<SelfTestResult> out;
  const auto check = [&](const std::string& name, double err, double tol) {
    out.push_back({name, err <= tol, "error " + sci(err) + " (tol " + sci(tol) + ")"});
  };

  {
    double err = 0.0;
    for (double x : {0.5, std::numbers::pi, 7.0, 25.0}) {
      const double q = quad_adaptive([](double u) { return u == 0.0 ? 1.0 : std::sin(u) / u; }, 0.0, x, 1e-14);
      err = std::max(err, std::abs(si(x) - q));
    }
    check("si matches quadrature", err, 1e-12);
  }
  {
    std::mt19937_64 rng(11);
    DenseMatrix a(8, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = random_vector(rng, 1)[0];
    const auto p = pinv_truncated(a, 1e-8);
    check("pinv Penrose identity A A+ A = A", (a * p.pinv * a - a).cwiseAbs().maxCoeff(), 1e-8);
  }
  {
    std::mt19937_64 rng(12);
    const auto v = random_vector(rng, 500);
    const auto once = spectral_mask(v, 0.02, 20.0);
    const auto twice = spectral_mask(once, 0.02, 20.0);
    double err = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) err = std::max(err, std::abs(once[i] - twice[i]));
    check("spectral mask idempotent", err, 1e-12);
  }
  const TimeWindow w{0.0, 10.0};
  const auto sig = generate_random_signal(std::numbers::pi / 2.0, w, 5);
  const double c = signal_bound(sig);
  const TemParams p{1.0, 1.0, c + 1.0};
  const auto train = encode_multi(sig, MultiChannelConfig::equal(p, 2), {c});
  {
    double err = 0.0;
    for (std::size_t ch = 0; ch < 2; ++ch) {
      const auto t = train.channel_times(ch);
      const auto q = interval_integrals(t, p);
      for (std::size_t k = 0; k < q.size(); ++k)
        err = std::max(err, std::abs(q[k] - (sig.primitive(t[k + 1]) - sig.primitive(t[k]))));
    }
    check("interval integrals match primitive", err, 1e-8);
  }
  {
    const auto rep = diagnostics(train, c);
    out.push_back({"rate, gap and interleaving diagnostics", rep.rate_ok && rep.gap_ok && rep.interleaved &&
                                                                 rep.separation_ok,
                   "combined rate " + sci(rep.combined_rate) + ", max gap " + sci(rep.max_gap)});
  }
  {
    const GridSpec g{w, 2000};
    const auto cons = make_constraints(train);
    ConsistencyProjector proj(g, cons[0]);
    std::mt19937_64 rng(13);
    const auto y = random_vector(rng, g.n_points);
    const auto b = proj.apply_B1(y);
    double ny = 0.0, nr = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      ny += y[i] * y[i];
      nr += (y[i] - 2.0 * b[i]) * (y[i] - 2.0 * b[i]);
    }
    check("(I - 2 B1) isometry", std::abs(std::sqrt(nr) - std::sqrt(ny)) / std::sqrt(ny), 1e-8);
    const auto once = proj.project(y);
    const auto twice = proj.project(once);
    double err = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) err = std::max(err, std::abs(once[i] - twice[i]));
    check("consistency projection idempotent", err, 1e-10);
    const auto d = decode_closed_form(train, sig.omega(), g);
    check("closed-form round trip mse_mid90", mse_mid90(d.estimate, to_grid(sig, g)), 1e-4);
  }
  return out;
}

}  // namespace detail

/// Quick invariant checks; prints one line per check.
inline bool run_selftest(std::FILE* out = stdout) {
  bool ok = true;
  for (const auto& r : detail::selftest_checks()) {
    std::fprintf(out, "%s  %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.pass;
  }
  return ok;
}

}  // namespace temcodec
