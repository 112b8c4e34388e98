// Cylindrical Bessel and Hankel functions of integer order 0..2 on the
// positive real axis.
//
// Small arguments use the ascending series summed in long double; large
// arguments use the Hankel asymptotic expansion. Order 2 of the second kind
// always comes from forward recurrence, which is stable upward.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace emdsm::specfun {

using cdouble = std::complex<double>;

/// Arguments above this value switch from the series to the asymptotic
/// expansion. At 16 the largest series term is ~2e5 (lost digits are
/// absorbed by the 64-bit mantissa) and the asymptotic remainder is ~e^-32.
inline constexpr double kSeriesLimit = 16.0;

namespace detail {

using ld = long double;
inline constexpr ld kEulerGamma = 0.577215664901532860606512090082402431L;
inline constexpr ld kPi = 3.141592653589793238462643383279502884L;

inline void check_order(int order) {
  if (order < 0 || order > 2) {
    throw std::domain_error("bessel order must be 0, 1 or 2, got " + std::to_string(order));
  }
}

// J_n by the ascending series.
inline ld series_j(int n, ld x) {
  const ld half = x / 2;
  const ld q = -half * half;
  ld term = 1;
  for (int i = 1; i <= n; ++i) term *= half / i;
  ld sum = term;
  for (int m = 1; m < 200; ++m) {
    term *= q / (static_cast<ld>(m) * (m + n));
    sum += term;
    if (std::fabs(term) < 1e-22L * std::fabs(sum) && m > 2) break;
  }
  return sum;
}

inline ld series_y0(ld x, ld j0) {
  const ld q = x * x / 4;
  ld term = 1;  // (x^2/4)^m / (m!)^2
  ld harmonic = 0;
  ld sum = 0;
  for (int m = 1; m < 200; ++m) {
    term *= q / (static_cast<ld>(m) * m);
    harmonic += 1.0L / m;
    const ld t = (m % 2 == 1 ? 1 : -1) * harmonic * term;
    sum += t;
    if (std::fabs(t) < 1e-22L * std::fabs(sum) && m > 2) break;
  }
  return (2 / kPi) * ((std::log(x / 2) + kEulerGamma) * j0 + sum);
}

inline ld series_y1(ld x, ld j1) {
  const ld half = x / 2;
  const ld q = -half * half;
  ld term = half;  // (-1)^k (x/2)^(2k+1) / (k! (k+1)!)
  ld h_k = 0;      // H_k
  ld h_k1 = 1;     // H_{k+1}
  ld sum = term * (h_k + h_k1);
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<ld>(k) * (k + 1));
    h_k = h_k1;
    h_k1 += 1.0L / (k + 1);
    const ld t = term * (h_k + h_k1);
    sum += t;
    if (std::fabs(t) < 1e-22L * std::fabs(sum) && k > 2) break;
  }
  // psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2 gamma; the gamma part folds into J_1.
  return -2 / (kPi * x) + (2 / kPi) * (std::log(half) + kEulerGamma) * j1 - sum / kPi;
}

// Hankel asymptotic expansion: returns H_nu^(1)(x) for nu in {0, 1}.
inline cdouble asymptotic_hankel(int nu, double x) {
  const ld mu = 4.0L * nu * nu;
  ld p = 1;
  ld q = 0;
  ld term = 1;
  ld previous = INFINITY;
  for (int k = 1; k < 100; ++k) {
    const ld odd = 2 * k - 1;
    term *= (mu - odd * odd) / (8.0L * k * x);
    const ld magnitude = std::fabs(term);
    if (magnitude == 0 || magnitude > previous) break;
    previous = magnitude;
    // Signs follow (-1)^floor(k/2): P takes even k, Q takes odd k.
    const ld signed_term = ((k / 2) % 2 == 0) ? term : -term;
    if (k % 2 == 0) {
      p += signed_term;
    } else {
      q += signed_term;
    }
    if (magnitude < 1e-20L) break;
  }
  const ld chi = static_cast<ld>(x) - (nu / 2.0L + 0.25L) * kPi;
  const ld amp = std::sqrt(2 / (kPi * x));
  const ld c = std::cos(chi);
  const ld s = std::sin(chi);
  return {static_cast<double>(amp * (p * c - q * s)), static_cast<double>(amp * (p * s + q * c))};
}

}  // namespace detail

/// J_n(x) for n in {0,1,2}. x = 0 is allowed.
inline double bessel_j(int order, double x) {
  detail::check_order(order);
  if (!(x >= 0)) throw std::domain_error("bessel_j: argument must be nonnegative");
  if (x == 0) return order == 0 ? 1.0 : 0.0;
  if (x <= kSeriesLimit) return static_cast<double>(detail::series_j(order, x));
  if (order < 2) return detail::asymptotic_hankel(order, x).real();
  const double j0 = detail::asymptotic_hankel(0, x).real();
  const double j1 = detail::asymptotic_hankel(1, x).real();
  return 2 * j1 / x - j0;
}

/// H_0^(1), H_1^(1), H_2^(1) at one argument. Used by the Green kernels, which
/// always need all three.
inline std::array<cdouble, 3> hankel1_all(double x) {
  if (!(x > 0)) throw std::domain_error("hankel1: argument must be positive");
  cdouble h0;
  cdouble h1;
  double j2;
  if (x <= kSeriesLimit) {
    const detail::ld xl = x;
    const detail::ld j0 = detail::series_j(0, xl);
    const detail::ld j1 = detail::series_j(1, xl);
    h0 = {static_cast<double>(j0), static_cast<double>(detail::series_y0(xl, j0))};
    h1 = {static_cast<double>(j1), static_cast<double>(detail::series_y1(xl, j1))};
    j2 = static_cast<double>(detail::series_j(2, xl));
  } else {
    h0 = detail::asymptotic_hankel(0, x);
    h1 = detail::asymptotic_hankel(1, x);
    j2 = 2 * h1.real() / x - h0.real();
  }
  const double y2 = 2 * h1.imag() / x - h0.imag();
  return {h0, h1, cdouble{j2, y2}};
}

/// Y_n(x) for n in {0,1,2}, x > 0.
inline double bessel_y(int order, double x) {
  detail::check_order(order);
  if (!(x > 0)) throw std::domain_error("bessel_y: argument must be positive");
  return hankel1_all(x)[static_cast<std::size_t>(order)].imag();
}

/// H_n^(1)(x) = J_n(x) + i Y_n(x).
inline cdouble hankel1(int order, double x) {
  detail::check_order(order);
  return hankel1_all(x)[static_cast<std::size_t>(order)];
}

}  // namespace emdsm::specfun
