#pragma once

// Power-law fractional kernel K(u) = u^{alpha-1}/Gamma(alpha), its resolvent
// L(u) = u^{-alpha}/Gamma(1-alpha) (L * K == 1), the sampled two-index kernel
// g_h(t,u) = int_u^t L(t-v) K(phi_h(v)-u) 1{u < phi_h(v)} dv, and numerical
// certificates for the deterministic bounds satisfied by g_h - 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <vector>

#include "roughvol/errors.hpp"

namespace roughvol {

template <typename Scalar>
class KernelParams {
 public:
  /// Rejects alpha outside (0.5 + 1e-6, 1 - 1e-6).
  explicit KernelParams(Scalar alpha) : alpha_(alpha) {
    if (!(alpha > Scalar(0.5) + Scalar(1e-6)) || !(alpha < Scalar(1) - Scalar(1e-6))) {
      std::ostringstream os;
      os << "alpha out of (0.5,1): " << static_cast<double>(alpha);
      throw DomainError(os.str());
    }
    using std::tgamma;
    gamma_alpha_ = tgamma(alpha);
    gamma_one_minus_alpha_ = tgamma(Scalar(1) - alpha);
    gamma_alpha_plus_one_ = alpha * gamma_alpha_;
    gamma_two_minus_alpha_ = (Scalar(1) - alpha) * gamma_one_minus_alpha_;
  }

  Scalar alpha() const { return alpha_; }
  Scalar gamma_alpha() const { return gamma_alpha_; }
  Scalar gamma_one_minus_alpha() const { return gamma_one_minus_alpha_; }
  /// Gamma(alpha + 1), normalizer of the antiderivative of K.
  Scalar gamma_alpha_plus_one() const { return gamma_alpha_plus_one_; }
  /// Gamma(2 - alpha), normalizer of the antiderivative of L.
  Scalar gamma_two_minus_alpha() const { return gamma_two_minus_alpha_; }

 private:
  Scalar alpha_;
  Scalar gamma_alpha_;
  Scalar gamma_one_minus_alpha_;
  Scalar gamma_alpha_plus_one_;
  Scalar gamma_two_minus_alpha_;
};

/// Uniform sampling grid of step h on [0, T].
template <typename Scalar>
class GridGeometry {
 public:
  GridGeometry(Scalar h, Scalar T) : h_(h), T_(T) {
    if (!(h > 0) || !(T >= h) || !std::isfinite(static_cast<double>(T))) {
      throw DomainError("grid requires h > 0 and T >= h");
    }
    using std::floor;
    using std::round;
    // Ratios like 10/0.01 land one ulp off an integer; snap those before flooring.
    const Scalar ratio = T / h;
    const Scalar nearest = round(ratio);
    const Scalar snapped = (std::abs(static_cast<double>(ratio - nearest)) <= 1e-9 * static_cast<double>(nearest))
                               ? nearest
                               : floor(ratio);
    n_ = static_cast<std::size_t>(snapped);
  }

  Scalar h() const { return h_; }
  Scalar T() const { return T_; }
  std::size_t n() const { return n_; }

  /// Index j with j*h <= t < (j+1)*h, evaluated in the same arithmetic as phi().
  long long cell_index(Scalar t) const {
    using std::floor;
    long long j = static_cast<long long>(floor(t / h_));
    while (static_cast<Scalar>(j) * h_ > t) --j;
    while (static_cast<Scalar>(j + 1) * h_ <= t) ++j;
    return j;
  }

  Scalar phi(Scalar t) const { return static_cast<Scalar>(cell_index(t)) * h_; }
  /// Offset of t inside its cell, t - phi(t), in [0, h).
  Scalar chi(Scalar t) const { return t - phi(t); }

 private:
  Scalar h_;
  Scalar T_;
  std::size_t n_;
};

template <typename Scalar>
Scalar eval_K(Scalar u, const KernelParams<Scalar>& p) {
  using std::pow;
  if (!(u > 0)) return Scalar(0);
  return pow(u, p.alpha() - Scalar(1)) / p.gamma_alpha();
}

template <typename Scalar>
Scalar eval_L(Scalar u, const KernelParams<Scalar>& p) {
  using std::pow;
  if (!(u > 0)) return Scalar(0);
  return pow(u, -p.alpha()) / p.gamma_one_minus_alpha();
}

namespace detail {
template <typename Scalar>
void check_ordered(Scalar s0, Scalar s1, Scalar t) {
  if (!(s0 >= 0) || !(s0 <= s1) || !(s1 <= t)) {
    std::ostringstream os;
    os << "integration bounds must satisfy 0 <= s0 <= s1 <= t, got s0=" << static_cast<double>(s0)
       << " s1=" << static_cast<double>(s1) << " t=" << static_cast<double>(t);
    throw OrderingError(os.str());
  }
}
}  // namespace detail

/// int_{s0}^{s1} K(t - s) ds in closed form.
template <typename Scalar>
Scalar integral_K(Scalar s0, Scalar s1, Scalar t, const KernelParams<Scalar>& p) {
  detail::check_ordered(s0, s1, t);
  using std::pow;
  if (s0 == s1) return Scalar(0);
  const Scalar a = p.alpha();
  return (pow(t - s0, a) - pow(t - s1, a)) / p.gamma_alpha_plus_one();
}

/// int_{s0}^{s1} L(t - s) ds in closed form; finite for s1 == t.
template <typename Scalar>
Scalar integral_L(Scalar s0, Scalar s1, Scalar t, const KernelParams<Scalar>& p) {
  detail::check_ordered(s0, s1, t);
  using std::pow;
  if (s0 == s1) return Scalar(0);
  const Scalar b = Scalar(1) - p.alpha();
  return (pow(t - s0, b) - pow(t - s1, b)) / p.gamma_two_minus_alpha();
}

namespace detail {

template <typename Scalar>
void check_g_domain(Scalar t, Scalar u, const GridGeometry<Scalar>& geom) {
  const Scalar slack = geom.T() * Scalar(1e-12);
  if (!(u >= 0) || !(u < t) || !(t <= geom.T() + slack)) {
    std::ostringstream os;
    os << "g_h requires 0 <= u < t <= T, got u=" << static_cast<double>(u)
       << " t=" << static_cast<double>(t) << " T=" << static_cast<double>(geom.T());
    throw DomainError(os.str());
  }
}

// Grid points within this distance of t count as t. Otherwise a node one ulp short of t opens
// a sliver cell whose L-integral is ~ulp^{1-alpha}, which is not small for alpha near 1.
template <typename Scalar>
Scalar grid_tolerance(Scalar h) {
  return Scalar(1e-9) * h;
}

template <typename Scalar>
Scalar cell_end(long long j, Scalar h, Scalar t) {
  const Scalar right = static_cast<Scalar>(j + 1) * h;
  return right >= t - grid_tolerance(h) ? t : right;
}

// Integrals of L(t - .) over the grid cells [jh, (j+1)h) ∩ [0, t), indexed by j.
template <typename Scalar>
std::vector<Scalar> resolvent_cell_integrals(Scalar t, const GridGeometry<Scalar>& geom,
                                             const KernelParams<Scalar>& p) {
  const Scalar h = geom.h();
  const Scalar tol = grid_tolerance(h);
  std::vector<Scalar> cells;
  for (long long j = 0; static_cast<Scalar>(j) * h < t - tol; ++j) {
    const Scalar lo = static_cast<Scalar>(j) * h;
    const Scalar hi = cell_end(j, h, t);
    cells.push_back(integral_L(lo, hi, t, p));
  }
  return cells;
}

template <typename Scalar>
Scalar g_h_from_cells(Scalar u, const std::vector<Scalar>& cells, const GridGeometry<Scalar>& geom,
                      const KernelParams<Scalar>& p) {
  const Scalar h = geom.h();
  Scalar sum = 0;
  for (std::size_t j = static_cast<std::size_t>(geom.cell_index(u) + 1); j < cells.size(); ++j) {
    sum += eval_K(static_cast<Scalar>(j) * h - u, p) * cells[j];
  }
  return sum;
}

}  // namespace detail

/// g_h(t, u): exact sum over grid cells with jh > u of K(jh - u) * int_{cell ∩ (u,t]} L(t - v) dv.
template <typename Scalar>
Scalar g_h(Scalar t, Scalar u, const GridGeometry<Scalar>& geom, const KernelParams<Scalar>& p) {
  detail::check_g_domain(t, u, geom);
  const Scalar h = geom.h();
  const Scalar tol = detail::grid_tolerance(h);
  Scalar sum = 0;
  for (long long j = geom.cell_index(u) + 1; static_cast<Scalar>(j) * h < t - tol; ++j) {
    const Scalar lo = static_cast<Scalar>(j) * h;
    const Scalar hi = detail::cell_end(j, h, t);
    sum += eval_K(lo - u, p) * integral_L(lo, hi, t, p);
  }
  return sum;
}

template <typename Scalar>
struct PointwiseBound {
  Scalar lhs;        ///< |g_h(t,u) - 1|
  Scalar rhs_shape;  ///< bound shape without its unknown constant
};

/// |g_h(t,u) - 1| against [(h/(t-u))^alpha ∧ 1] + h K(h - chi_h(u)) [(t-u)^{-alpha} ∧ h^{-alpha}].
template <typename Scalar>
PointwiseBound<Scalar> check_pointwise_bound(Scalar t, Scalar u, const GridGeometry<Scalar>& geom,
                                             const KernelParams<Scalar>& p) {
  using std::abs;
  using std::min;
  using std::pow;
  const Scalar g = g_h(t, u, geom, p);
  const Scalar h = geom.h();
  const Scalar a = p.alpha();
  const Scalar gap = t - u;
  const Scalar first = min(pow(h / gap, a), Scalar(1));
  const Scalar second = h * eval_K(h - geom.chi(u), p) * min(pow(gap, -a), pow(h, -a));
  return {abs(g - Scalar(1)), first + second};
}

template <typename Scalar>
struct IntegralBounds {
  Scalar l1;  ///< int_0^t |g_h(t,u) - 1| du
  Scalar l2;  ///< int_0^t |g_h(t,u) - 1|^2 du
};

/// Quadrature of |g_h(t,.) - 1| and its square over [0, t].
///
/// On [phi_h(t), t) the kernel g_h vanishes, so that piece contributes t - phi_h(t) exactly.
/// Every other u-cell [mh, (m+1)h) carries an integrable singularity (mh + h - u)^{alpha-1}
/// at its right end. It is integrated by the midpoint rule in s after the substitution
/// u = (m+1)h - h s^{1/(2 alpha - 1)}, which makes both integrands bounded in s.
/// n_quad nodes are spread evenly over the cells (at least 8 per cell).
template <typename Scalar>
IntegralBounds<Scalar> integral_bounds(Scalar t, const GridGeometry<Scalar>& geom,
                                       const KernelParams<Scalar>& p, std::size_t n_quad) {
  if (!(t > 0) || !(t <= geom.T() * (Scalar(1) + Scalar(1e-12)))) {
    throw DomainError("integral_bounds requires t in (0, T]");
  }
  if (n_quad < 1000) throw DomainError("integral_bounds requires n_quad >= 1000");

  using std::abs;
  using std::pow;
  const Scalar h = geom.h();
  const Scalar phi_t = geom.phi(t);
  const auto full_cells = static_cast<std::size_t>(geom.cell_index(t));
  const std::vector<Scalar> cells = detail::resolvent_cell_integrals(t, geom, p);

  Scalar l1 = t - phi_t;
  Scalar l2 = t - phi_t;
  if (full_cells == 0) return {l1, l2};

  const std::size_t per_cell = std::max<std::size_t>(8, n_quad / full_cells);
  const Scalar beta = Scalar(2) * p.alpha() - Scalar(1);
  const Scalar inv_beta = Scalar(1) / beta;
  for (std::size_t m = 0; m < full_cells; ++m) {
    const Scalar right = static_cast<Scalar>(m + 1) * h;
    Scalar c1 = 0;
    Scalar c2 = 0;
    for (std::size_t q = 0; q < per_cell; ++q) {
      const Scalar s = (static_cast<Scalar>(q) + Scalar(0.5)) / static_cast<Scalar>(per_cell);
      const Scalar u = right - h * pow(s, inv_beta);
      const Scalar jac = pow(s, inv_beta - Scalar(1));
      const Scalar dev = abs(detail::g_h_from_cells(u, cells, geom, p) - Scalar(1));
      c1 += dev * jac;
      c2 += dev * dev * jac;
    }
    const Scalar scale = h * inv_beta / static_cast<Scalar>(per_cell);
    l1 += c1 * scale;
    l2 += c2 * scale;
  }
  return {l1, l2};
}

/// Numerical convolution int_0^t L(t-s) K(s) ds; equals 1 for every t > 0.
///
/// [0, t/2] uses s = w^{1/alpha} and [t/2, t] uses t - s = w^{1/(1-alpha)}, which absorb
/// the two endpoint singularities; each half gets n_nodes/2 midpoint nodes.
template <typename Scalar>
Scalar resolvent_convolution(Scalar t, const KernelParams<Scalar>& p, std::size_t n_nodes) {
  if (!(t > 0)) throw DomainError("resolvent_convolution requires t > 0");
  if (n_nodes < 2) throw DomainError("resolvent_convolution requires at least 2 nodes");
  using std::pow;
  const Scalar a = p.alpha();
  const Scalar b = Scalar(1) - a;
  const Scalar half = t / Scalar(2);
  const std::size_t m = n_nodes / 2;

  // int_0^{t/2} L(t-s) s^{a-1} ds / Gamma(a) = (1/(a Gamma(a))) int_0^{half^a} L(t - w^{1/a}) dw
  const Scalar w1 = pow(half, a);
  Scalar left = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar w = w1 * (static_cast<Scalar>(i) + Scalar(0.5)) / static_cast<Scalar>(m);
    left += eval_L(t - pow(w, Scalar(1) / a), p);
  }
  left *= w1 / static_cast<Scalar>(m) / p.gamma_alpha_plus_one();

  // int_{t/2}^t K(s) v^{-a} ds / Gamma(1-a), v = t - s, = (1/(b Gamma(b))) int_0^{half^b} K(t - w^{1/b}) dw
  const Scalar w2 = pow(half, b);
  Scalar right = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar w = w2 * (static_cast<Scalar>(i) + Scalar(0.5)) / static_cast<Scalar>(m);
    right += eval_K(t - pow(w, Scalar(1) / b), p);
  }
  right *= w2 / static_cast<Scalar>(m) / p.gamma_two_minus_alpha();
  return left + right;
}

}  // namespace roughvol
