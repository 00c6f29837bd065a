#pragma once

// Numerical kernels shared by the codec: the sine integral and its
// antiderivative, a truncated-SVD pseudoinverse, grid spectral masking, the
// linear sinc convolution used by the iterative decoder, and an adaptive
// Gauss-Kronrod quadrature used as an oracle by the test suites.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "temcodec/error.hpp"

namespace temcodec {

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

namespace detail {

// Power series, accurate for |x| <= 4 where cancellation stays below ~1e-15.
inline double si_series(double x) {
  const double x2 = x * x;
  double power = x;  // x^(2n+1) / (2n+1)!
  double sum = 0.0;
  for (int n = 0; n < 60; ++n) {
    const double term = power / (2 * n + 1);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    power *= -x2 / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
  }
  return sum;
}

// Modified Lentz evaluation of the continued fraction for E1(i t), t > 0.
// Returns Si(t) = pi/2 + Im(E1(i t) e^{i t}) after the phase correction.
inline double si_continued_fraction(double t) {
  using cplx = std::complex<double>;
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  cplx b(1.0, t);
  cplx c(1.0 / tiny, 0.0);
  cplx d = 1.0 / b;
  cplx h = d;
  for (int i = 2; i < 100000; ++i) {
    const double a = -static_cast<double>((i - 1) * (i - 1));
    b += 2.0;
    d = 1.0 / (a * d + b);
    c = b + a / c;
    const cplx del = c * d;
    h *= del;
    if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < eps) break;
  }
  h *= cplx(std::cos(t), -std::sin(t));
  return std::numbers::pi / 2.0 + h.imag();
}

}  // namespace detail

/// Sine integral Si(x) = \int_0^x sin(u)/u du. Odd; |error| <= 1e-12 for |x| <= 1e3.
inline double si(double x) {
  if (std::isnan(x)) return x;
  if (std::isinf(x)) return std::copysign(std::numbers::pi / 2.0, x);
  const double ax = std::abs(x);
  const double v = ax <= 4.0 ? detail::si_series(ax) : detail::si_continued_fraction(ax);
  return std::copysign(v, x);
}

/// Antiderivative of Si: d/dx [x Si(x) + cos x] = Si(x). Even function.
inline double si_antiderivative(double x) { return x * si(x) + std::cos(x); }

/// Result of a truncated-SVD pseudoinverse.
struct PinvResult {
  DenseMatrix pinv;
  DenseVector singular_values;  // descending
  Eigen::Index rank = 0;        // singular values kept
  double condition_number = 0.0;  // sigma_max / sigma_min over all singular values
};

/// Moore-Penrose pseudoinverse with singular values below rel_cutoff * sigma_max zeroed.
inline PinvResult pinv_truncated(const DenseMatrix& a, double rel_cutoff) {
  if (a.rows() == 0 || a.cols() == 0) throw DataError("pinv_truncated: empty matrix");
  if (!(rel_cutoff > 0.0 && rel_cutoff < 1.0))
    throw DataError("pinv_truncated: rel_cutoff must lie in (0,1)");
  if (!a.allFinite()) throw NumericalError("pinv_truncated: matrix has non-finite entries");

  Eigen::JacobiSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const DenseVector& s = svd.singularValues();
  PinvResult out;
  out.singular_values = s;
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double smin = s.size() > 0 ? s(s.size() - 1) : 0.0;
  out.condition_number =
      smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

  const double cut = rel_cutoff * smax;
  DenseVector inv_s = DenseVector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut && s(i) > 0.0) {
      inv_s(i) = 1.0 / s(i);
      ++out.rank;
    }
  }
  out.pinv = svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
  return out;
}

/// Condition number sigma_max / sigma_min of a dense matrix (singular values only).
inline double condition_number(const DenseMatrix& a) {
  if (a.rows() == 0 || a.cols() == 0) throw DataError("condition_number: empty matrix");
  Eigen::JacobiSVD<DenseMatrix> svd(a);
  const DenseVector& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

/// Ideal low-pass on a uniform grid: zero every DFT bin with |omega_k| > omega.
/// The operation is an orthogonal projection on R^n (periodic interpretation).
inline std::vector<double> spectral_mask(std::span<const double> values, double dt,
                                         double omega) {
  const std::size_t n = values.size();
  if (n < 2) throw DataError("spectral_mask: need at least 2 samples");
  if (!(dt > 0.0)) throw DataError("spectral_mask: dt must be positive");

  std::vector<std::complex<double>> in(values.begin(), values.end());
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, in);
  const double bin = 2.0 * std::numbers::pi / (static_cast<double>(n) * dt);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t m = std::min(k, n - k);
    if (static_cast<double>(m) * bin > omega) spec[k] = 0.0;
  }
  std::vector<std::complex<double>> back;
  fft.inv(back, spec);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = back[i].real();
  return out;
}

/// Linear (non-circular) convolution of window-supported grid data with the
/// sampled kernel dt*sin(omega t)/(pi t), read back on the same grid.
/// Its DTFT over the infinite grid is the indicator of [-omega, omega].
class SincConvolution {
 public:
  SincConvolution(std::size_t n, double dt, double omega) : n_(n) {
    if (n < 2) throw DataError("SincConvolution: need at least 2 samples");
    if (!(dt > 0.0) || !(omega > 0.0)) throw DataError("SincConvolution: dt and omega must be positive");
    len_ = 1;
    while (len_ < 2 * n_) len_ <<= 1;
    std::vector<std::complex<double>> kernel(len_, 0.0);
    kernel[0] = omega * dt / std::numbers::pi;
    for (std::size_t m = 1; m < n_; ++m) {
      const double h = std::sin(omega * dt * static_cast<double>(m)) /
                       (std::numbers::pi * static_cast<double>(m));
      kernel[m] = h;
      kernel[len_ - m] = h;
    }
    fft_.fwd(kernel_spec_, kernel);
  }

  std::size_t size() const { return n_; }

  std::vector<double> apply(std::span<const double> u) {
    if (u.size() != n_) throw DataError("SincConvolution: size mismatch");
    std::vector<std::complex<double>> buf(len_, 0.0);
    std::copy(u.begin(), u.end(), buf.begin());
    std::vector<std::complex<double>> spec;
    fft_.fwd(spec, buf);
    for (std::size_t k = 0; k < len_; ++k) spec[k] *= kernel_spec_[k];
    fft_.inv(buf, spec);
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = buf[i].real();
    return out;
  }

 private:
  std::size_t n_;
  std::size_t len_ = 0;
  Eigen::FFT<double> fft_;
  std::vector<std::complex<double>> kernel_spec_;
};

namespace detail {

struct GaussKronrodPanel {
  double a, b, value, error;
};

inline GaussKronrodPanel gauss_kronrod_15(const std::function<double(double)>& f, double a,
                                          double b) {
  // Kronrod nodes/weights on [-1,1]; odd-indexed nodes are the 7-point Gauss nodes.
  static constexpr double xk[8] = {0.991455371120812639206854697526329,
                                   0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926,
                                   0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013,
                                   0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245,
                                   0.000000000000000000000000000000000};
  static constexpr double wk[8] = {0.022935322010529224963732008058970,
                                   0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518,
                                   0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550,
                                   0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649,
                                   0.209482141084727828012999174891714};
  static constexpr double wg[4] = {0.129484966168869693270611432679082,
                                   0.279705391489276667901467771423780,
                                   0.381830050505118944950369775488975,
                                   0.417959183673469387755102040816327};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = wk[7] * fc;
  double gauss = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = h * xk[j];
    const double s = f(c - dx) + f(c + dx);
    kron += wk[j] * s;
    if (j % 2 == 1) gauss += wg[j / 2] * s;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) quadrature with global error control.
/// Throws NumericalError (carrying the achieved estimate) if the panel budget runs out.
inline double quad_adaptive(const std::function<double(double)>& f, double a, double b,
                            double tol, std::size_t max_panels = 200000) {
  if (!(tol > 0.0)) throw DataError("quad_adaptive: tol must be positive");
  if (a == b) return 0.0;
  const double sign = b > a ? 1.0 : -1.0;
  if (b < a) std::swap(a, b);

  // Seed with panels of at most ~one unit so oscillatory integrands start resolved.
  const std::size_t seed = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(b - a)), 1, 4096);
  std::vector<detail::GaussKronrodPanel> heap;
  heap.reserve(seed * 2);
  const auto by_error = [](const auto& l, const auto& r) { return l.error < r.error; };
  double value = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i < seed; ++i) {
    const double lo = a + (b - a) * static_cast<double>(i) / static_cast<double>(seed);
    const double hi = a + (b - a) * static_cast<double>(i + 1) / static_cast<double>(seed);
    heap.push_back(detail::gauss_kronrod_15(f, lo, hi));
    value += heap.back().value;
    error += heap.back().error;
  }
  std::make_heap(heap.begin(), heap.end(), by_error);

  while (error > tol) {
    if (heap.size() >= max_panels)
      throw NumericalError("quad_adaptive: no convergence; estimate " +
                           std::to_string(sign * value) + " error " + std::to_string(error));
    std::pop_heap(heap.begin(), heap.end(), by_error);
    const auto worst = heap.back();
    heap.pop_back();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end(), by_error);
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end(), by_error);
    if (mid <= worst.a || mid >= worst.b) break;  // panel width at machine precision
  }
  // Re-sum to shed drift from the running updates.
  double total = 0.0;
  error = 0.0;
  for (const auto& p : heap) {
    total += p.value;
    error += p.error;
  }
  if (error > tol && error > 1e3 * std::numeric_limits<double>::epsilon() * std::abs(total))
    throw NumericalError("quad_adaptive: no convergence; estimate " +
                         std::to_string(sign * total) + " error " + std::to_string(error));
  return sign * total;
}

}  // namespace temcodec
