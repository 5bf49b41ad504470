#pragma once

// Test-only reference computations. Nothing here calls into the library's closed forms.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline double K(double u, double alpha) { return u > 0 ? std::pow(u, alpha - 1) / std::tgamma(alpha) : 0.0; }

/// int_u^t L(t-v) K(phi_h(v) - u) 1{u < phi_h(v)} dv by direct quadrature.
///
/// With w = (t-v)^{1-alpha}, L(t-v) dv = dw / Gamma(2-alpha) and the remaining factor is
/// piecewise constant in w. The w-range is split at the images of the grid points, and each
/// piece gets a midpoint rule; the sampled kernel is evaluated from its definition at every node.
inline double g_h_quadrature(double t, double u, double h, double alpha, std::size_t n_points) {
  const double b = 1.0 - alpha;
  // Grid points within 1e-9 h of t are t in exact arithmetic (e.g. 49 * (1/49)).
  const double near_t = t - 1e-9 * h;
  std::vector<double> breaks{0.0};
  for (long j = static_cast<long>(std::floor(t / h)); j >= 0; --j) {
    const double v = j * h;
    if (v > u && v < near_t) breaks.push_back(std::pow(t - v, b));
  }
  breaks.push_back(std::pow(t - u, b));
  const double total = breaks.back();
  double sum = 0;
  for (std::size_t piece = 0; piece + 1 < breaks.size(); ++piece) {
    const double w0 = breaks[piece];
    const double w1 = breaks[piece + 1];
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(n_points * (w1 - w0) / total));
    const double dw = (w1 - w0) / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double w = w0 + (static_cast<double>(i) + 0.5) * dw;
      const double v = t - std::pow(w, 1.0 / b);
      double phi = h * std::floor(v / h);
      // v rounds to t for w below ~1e-16^{1-alpha}; such nodes belong to the cell left of t.
      if (phi >= near_t) phi -= h;
      if (u < phi) sum += K(phi - u, alpha) * dw;
    }
  }
  return sum / std::tgamma(2.0 - alpha);
}

/// Mittag-Leffler E_alpha(z) by its power series in long double.
inline long double mittag_leffler(long double alpha, long double z) {
  long double sum = 0;
  long double term_pow = 1;
  for (int k = 0; k < 400; ++k) {
    const long double term = term_pow / std::tgamma(alpha * k + 1.0L);
    sum += term;
    if (k > 10 && std::fabs(term) < 1e-22L * std::fabs(sum)) break;
    term_pow *= z;
  }
  return sum;
}

/// Solution of X_t = x0 + int_0^t K(t-s) (theta0 X_s + theta1) ds.
inline double linear_volterra_solution(double t, double alpha, double theta0, double theta1, double x0) {
  const long double fixed = -static_cast<long double>(theta1) / theta0;
  return static_cast<double>(fixed + (x0 - fixed) * mittag_leffler(alpha, theta0 * std::pow(static_cast<long double>(t), alpha)));
}

/// Ordinary least squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace oracle
