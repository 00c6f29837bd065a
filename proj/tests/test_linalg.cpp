#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "temcodec/linalg.hpp"

using namespace temcodec;

namespace {

double sinc_integrand(double u) { return u == 0.0 ? 1.0 : std::sin(u) / u; }

double si_oracle(double x) {
  const double sign = x < 0 ? -1.0 : 1.0;
  const double ax = std::abs(x);
  return sign * quad_adaptive(sinc_integrand, 0.0, ax, 1e-15, 1000000);
}

DenseMatrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> d;
  DenseMatrix a(r, c);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = d(rng);
  return a;
}

// Brute-force DFT, O(n^2).
std::vector<std::complex<double>> dft(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += v[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n));
    out[k] = s;
  }
  return out;
}

}  // namespace

TEST(Si, ZeroAndOddSymmetry) {
  EXPECT_EQ(si(0.0), 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng);
    EXPECT_EQ(si(-x), -si(x));
  }
}

TEST(Si, PiMatchesQuadrature) { EXPECT_NEAR(si(std::numbers::pi), si_oracle(std::numbers::pi), 1e-12); }

TEST(Si, MatchesQuadratureUpToOneThousand) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  std::vector<double> xs{1e-6, 0.1, 1.0, 3.9, 4.0, 4.1, 8.0, 16.0, 50.0, 999.0};
  for (int i = 0; i < 40; ++i) xs.push_back(u(rng));
  for (double x : xs) EXPECT_NEAR(si(x), si_oracle(x), 1e-12) << "x = " << x;
}

TEST(Si, MonotoneOnZeroToPiAndBounded) {
  double prev = si(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double v = si(std::numbers::pi * i / 1000.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
  for (int i = 0; i <= 20000; ++i) EXPECT_LE(std::abs(si(-100.0 + 0.01 * i)), 1.8519371);
}

TEST(Si, LimitsAtInfinity) {
  EXPECT_NEAR(si(1e9), std::numbers::pi / 2.0, 1e-8);
  EXPECT_EQ(si(std::numeric_limits<double>::infinity()), std::numbers::pi / 2.0);
}

TEST(Si, AntiderivativeDifferentiatesToSi) {
  for (double x : {-30.0, -2.5, 0.3, 1.7, 4.5, 12.0, 80.0}) {
    const double h = 1e-5;
    const double d = (si_antiderivative(x + h) - si_antiderivative(x - h)) / (2.0 * h);
    EXPECT_NEAR(d, si(x), 1e-8) << x;
  }
  EXPECT_EQ(si_antiderivative(0.0), 1.0);
}

TEST(Pinv, IdentityMapsToIdentity) {
  const auto r = pinv_truncated(DenseMatrix::Identity(5, 5), 1e-8);
  EXPECT_LT((r.pinv - DenseMatrix::Identity(5, 5)).norm(), 1e-14);
  EXPECT_EQ(r.rank, 5);
  EXPECT_NEAR(r.condition_number, 1.0, 1e-14);
}

TEST(Pinv, DiagonalWithZeroIsTruncated) {
  DenseMatrix a = DenseMatrix::Zero(3, 3);
  a(0, 0) = 2.0;
  a(1, 1) = 1.0;
  const auto r = pinv_truncated(a, 1e-8);
  DenseMatrix expect = DenseMatrix::Zero(3, 3);
  expect(0, 0) = 0.5;
  expect(1, 1) = 1.0;
  EXPECT_LT((r.pinv - expect).norm(), 1e-14);
  EXPECT_EQ(r.rank, 2);
  EXPECT_TRUE(std::isinf(r.condition_number));
}

TEST(Pinv, TallFullRankMatchesNormalEquations) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix a = random_matrix(rng, 8, 6);
    const auto r = pinv_truncated(a, 1e-8);
    const DenseMatrix ata = a.transpose() * a;
    const DenseMatrix oracle = ata.partialPivLu().solve(a.transpose());
    EXPECT_LT((r.pinv - oracle).cwiseAbs().maxCoeff(), 1e-8);
    const DenseMatrix& p = r.pinv;
    EXPECT_LT((a * p * a - a).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((p * a * p - p).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(((a * p).transpose() - a * p).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(((p * a).transpose() - p * a).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(r.rank, 6);
  }
}

TEST(Pinv, DoublePseudoinverseRecoversSquareMatrix) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseMatrix a = random_matrix(rng, 7, 7);
    const auto once = pinv_truncated(a, 1e-8);
    const auto twice = pinv_truncated(once.pinv, 1e-8);
    EXPECT_LT((twice.pinv - a).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Pinv, RejectsEmptyAndBadCutoff) {
  EXPECT_THROW(pinv_truncated(DenseMatrix(0, 3), 1e-8), DataError);
  EXPECT_THROW(pinv_truncated(DenseMatrix::Identity(2, 2), 0.0), DataError);
  EXPECT_THROW(pinv_truncated(DenseMatrix::Identity(2, 2), 1.0), DataError);
}

TEST(SpectralMask, ZeroStaysZero) {
  const auto out = spectral_mask(std::vector<double>(64, 0.0), 0.1, 5.0);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(SpectralMask, RetainedCosineUnchangedAndHighToneRemoved) {
  const std::size_t n = 400;
  const double dt = 0.025;
  const double bin = 2.0 * std::numbers::pi / (n * dt);
  std::vector<double> low(n), high(n);
  for (std::size_t i = 0; i < n; ++i) {
    low[i] = std::cos(7 * bin * dt * i + 0.3);
    high[i] = std::sin(40 * bin * dt * i);
  }
  const double omega = 20 * bin;
  const auto lo = spectral_mask(low, dt, omega);
  const auto hi = spectral_mask(high, dt, omega);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(lo[i], low[i], 1e-10);
    EXPECT_NEAR(hi[i], 0.0, 1e-10);
  }
}

TEST(SpectralMask, ParsevalOnRetainedBandAgainstDirectDft) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  for (std::size_t n : {63u, 64u, 101u}) {
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    const double dt = 0.1;
    const double omega = 12.0;
    const auto out = spectral_mask(v, dt, omega);
    const auto spec = dft(v);
    double kept = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(std::min(k, n - k)) / (n * dt);
      if (w <= omega) kept += std::norm(spec[k]);
    }
    double energy = 0.0;
    for (double x : out) energy += x * x;
    EXPECT_NEAR(energy, kept / static_cast<double>(n), 1e-10 * kept);
  }
}

TEST(SpectralMask, IdempotentAndNonexpansiveOnRandomVectors) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 32 + trial % 97;
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    const auto once = spectral_mask(v, 0.05, 15.0);
    const auto twice = spectral_mask(once, 0.05, 15.0);
    double nin = 0.0, nout = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nin += v[i] * v[i];
      nout += once[i] * once[i];
      diff = std::max(diff, std::abs(once[i] - twice[i]));
    }
    EXPECT_LE(nout, nin * (1.0 + 1e-12));
    EXPECT_LE(diff, 1e-12);
  }
}

TEST(SincConvolution, MatchesDirectSumAndIsSymmetric) {
  const std::size_t n = 150;
  const double dt = 0.04;
  const double omega = 7.0;
  SincConvolution p(n, dt, omega);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = d(rng);
    v[i] = d(rng);
  }
  const auto pu = p.apply(u);
  const auto pv = p.apply(v);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double m = static_cast<double>(i) - static_cast<double>(j);
      s += u[j] * (m == 0.0 ? omega * dt / std::numbers::pi : std::sin(omega * dt * m) / (std::numbers::pi * m));
    }
    EXPECT_NEAR(pu[i], s, 1e-12);
  }
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a += pu[i] * v[i];
    b += u[i] * pv[i];
  }
  EXPECT_NEAR(a, b, 1e-11);
}

TEST(Quadrature, ElementaryIntegrals) {
  EXPECT_NEAR(quad_adaptive([](double) { return 1.0; }, 0.0, 1.0, 1e-14), 1.0, 1e-14);
  EXPECT_NEAR(quad_adaptive([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1e-13), 2.0, 1e-13);
  EXPECT_NEAR(quad_adaptive([](double x) { return std::sin(x); }, std::numbers::pi, 0.0, 1e-13), -2.0, 1e-13);
  EXPECT_EQ(quad_adaptive([](double x) { return x; }, 2.0, 2.0, 1e-9), 0.0);
}

TEST(Quadrature, SincKernelMatchesSiClosedForm) {
  const double omega = 3.0;
  const auto g = [&](double t) { return t == 0.0 ? omega / std::numbers::pi : std::sin(omega * t) / (std::numbers::pi * t); };
  const double v = quad_adaptive(g, -50.0 / omega, 50.0 / omega, 1e-12);
  EXPECT_NEAR(v, 2.0 * si(50.0) / std::numbers::pi, 1e-12);
}

TEST(Quadrature, ReportsNonConvergence) {
  const auto f = [](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3) + 1e-300); };
  try {
    quad_adaptive(f, 0.0, 1.0, 1e-14, 8);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("estimate"), std::string::npos);
  }
  EXPECT_THROW(quad_adaptive(f, 0.0, 1.0, 0.0), DataError);
}

TEST(ConditionNumber, DiagonalRatio) {
  DenseMatrix a = DenseMatrix::Zero(3, 3);
  a.diagonal() << 4.0, 2.0, 0.5;
  EXPECT_NEAR(condition_number(a), 8.0, 1e-13);
}
