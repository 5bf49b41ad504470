#pragma once

// Fine-grid simulation of the small-noise rough Volterra SDE.
//
// Coefficients are frozen at the left point of each fine cell and integrated
// against the exact cell integrals of the kernel:
//   X_i = x0 + sum_{j<i} w_{i-j} (b(X_j) + eps a(X_j) dB_j / delta),
//   w_m = int_{(m-1)delta}^{m delta} K(s) ds.
// The same increments drive Z_{i+1} = Z_i + delta b(X_i) + eps a(X_i) dB_i,
// so X is exactly the K-convolution of the piecewise linear interpolant of Z.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "roughvol/errors.hpp"
#include "roughvol/kernel.hpp"
#include "roughvol/model.hpp"
#include "roughvol/rng.hpp"

namespace roughvol {

template <typename Scalar>
struct SimConfig {
  Scalar epsilon = Scalar(0);
  Scalar alpha = Scalar(0.8);
  Scalar T = Scalar(1);
  std::size_t n_fine = 100;
  std::uint64_t seed = 0;

  Scalar delta() const { return T / static_cast<Scalar>(n_fine); }

  void validate() const {
    if (!(epsilon >= 0) || !(epsilon <= 1)) throw DomainError("epsilon must lie in [0,1]");
    if (!(T > 0) || !std::isfinite(static_cast<double>(T))) throw DomainError("T must be positive");
    if (n_fine < 2) throw DomainError("n_fine must be at least 2");
  }
};

template <typename Scalar>
struct SimulatedPath {
  Vector<Scalar> times;     ///< n_fine + 1 nodes
  Matrix<Scalar> x;         ///< (n_fine + 1) x d
  Matrix<Scalar> dB;        ///< n_fine x r Brownian increments
  Matrix<Scalar> z_oracle;  ///< (n_fine + 1) x d

  std::size_t n_fine() const { return static_cast<std::size_t>(times.size()) - 1; }
  Scalar delta() const { return times(1) - times(0); }
};

/// Absolute value past which a path is declared divergent.
inline constexpr double kDivergenceGuard = 1e8;

namespace detail {

/// w_m = int_{t_{i-m}}^{t_{i-m+1}} K(t_i - s) ds, which only depends on the lag m on a
/// uniform grid. Stored reversed: out[n - m] = w_m.
template <typename Scalar>
Vector<Scalar> reversed_drift_weights(const Vector<Scalar>& times, const KernelParams<Scalar>& p) {
  const Eigen::Index n = times.size() - 1;
  Vector<Scalar> out(n);
  for (Eigen::Index m = 1; m <= n; ++m) {
    out(n - m) = integral_K(times(0), times(1), times(m), p);
  }
  return out;
}

template <typename Scalar>
Scalar state_norm(const Eigen::Ref<const Vector<Scalar>>& v) {
  return v.cwiseAbs().maxCoeff();
}

template <typename Scalar>
SimulatedPath<Scalar> run_scheme(const Model<Scalar>& model, const SimConfig<Scalar>& cfg,
                                 Matrix<Scalar> dB, Scalar epsilon) {
  const KernelParams<Scalar> p(cfg.alpha);
  const auto n = static_cast<Eigen::Index>(cfg.n_fine);
  const Eigen::Index d = model.dim_x;
  const Scalar delta = cfg.delta();

  SimulatedPath<Scalar> path;
  path.times.resize(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i) path.times(i) = static_cast<Scalar>(i) * delta;
  path.x.resize(n + 1, d);
  path.z_oracle.resize(n + 1, d);
  path.x.row(0) = model.x0.transpose();
  path.z_oracle.row(0).setZero();

  const Vector<Scalar> wrev = reversed_drift_weights(path.times, p);
  // forcing(j, c) = b_c(X_j) + eps (a(X_j) dB_j)_c / delta
  Matrix<Scalar> forcing(n, d);
  const Scalar noise_scale = epsilon / delta;

  Vector<Scalar> state = model.x0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    const Eigen::Index j = i - 1;
    Vector<Scalar> f = model.drift(state, model.theta_star);
    if (epsilon != Scalar(0)) f.noalias() += noise_scale * (model.diffusion(state) * dB.row(j).transpose());
    forcing.row(j) = f.transpose();
    path.z_oracle.row(i) = path.z_oracle.row(j) + delta * f.transpose();

    for (Eigen::Index c = 0; c < d; ++c) {
      state(c) = model.x0(c) + wrev.segment(n - i, i).dot(forcing.col(c).head(i));
    }
    const Scalar size = state_norm<Scalar>(state);
    if (!std::isfinite(static_cast<double>(size)) || size > Scalar(kDivergenceGuard)) {
      std::ostringstream os;
      os << "simulation diverged at fine index " << i;
      throw SimulationDiverged(static_cast<std::size_t>(i), os.str());
    }
    path.x.row(i) = state.transpose();
  }
  path.dB = std::move(dB);
  return path;
}

}  // namespace detail

/// One path of X^eps, its Brownian increments and the coupled semimartingale Z^eps.
/// The RNG stream is keyed by cfg.seed only.
template <typename Scalar>
SimulatedPath<Scalar> simulate(const Model<Scalar>& model, const SimConfig<Scalar>& cfg) {
  cfg.validate();
  model.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n_fine);
  NormalStream<Scalar> normal(cfg.seed);
  using std::sqrt;
  const Scalar sd = sqrt(cfg.delta());
  Matrix<Scalar> dB(n, model.dim_b);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < model.dim_b; ++c) dB(i, c) = sd * normal();
  }
  return detail::run_scheme(model, cfg, std::move(dB), cfg.epsilon);
}

/// The eps = 0 limit path X^0 on the same grid; consumes no randomness.
template <typename Scalar>
SimulatedPath<Scalar> simulate_deterministic(const Model<Scalar>& model, const SimConfig<Scalar>& cfg) {
  cfg.validate();
  model.validate();
  Matrix<Scalar> dB = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(cfg.n_fine), model.dim_b);
  return detail::run_scheme(model, cfg, std::move(dB), Scalar(0));
}

/// Monte Carlo estimate of E|X_{t+lag} - X_t|^p, averaged over all grid times t and paths.
template <typename Scalar>
Scalar empirical_increment_moments(const std::vector<SimulatedPath<Scalar>>& paths, Scalar p, Scalar lag) {
  if (paths.empty()) throw InputError("empirical_increment_moments needs at least one path");
  if (p != Scalar(2) && p != Scalar(4)) throw DomainError("moment order p must be 2 or 4");
  const Scalar delta = paths.front().delta();
  using std::round;
  const Scalar steps = round(lag / delta);
  if (!(steps >= 1) || std::abs(static_cast<double>(steps * delta - lag)) > 1e-9 * static_cast<double>(lag)) {
    throw DomainError("lag must be a positive multiple of the fine step");
  }
  const auto m = static_cast<Eigen::Index>(steps);

  long double total = 0;
  std::size_t count = 0;
  for (const auto& path : paths) {
    const Eigen::Index n = path.x.rows() - 1;
    if (std::abs(static_cast<double>(path.delta() - delta)) > 1e-12 * static_cast<double>(delta)) {
      throw InputError("paths have different fine steps");
    }
    if (m > n) throw DomainError("lag exceeds the path horizon");
    for (Eigen::Index i = 0; i + m <= n; ++i) {
      const Scalar sq = (path.x.row(i + m) - path.x.row(i)).squaredNorm();
      total += static_cast<long double>(p == Scalar(2) ? sq : sq * sq);
      ++count;
    }
  }
  return static_cast<Scalar>(total / static_cast<long double>(count));
}

}  // namespace roughvol
