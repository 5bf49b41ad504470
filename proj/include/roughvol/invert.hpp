#pragma once

// Reconstruction of the semimartingale Z from samples of X on a grid of step h:
//   Z^h_t = int_0^t L(t-s) (X_{phi_h(s)} - x0) ds
//         = sum_{jh < t} (X_{jh} - x0) [(t-jh)^{1-alpha} - (t - min((j+1)h, t))^{1-alpha}] / Gamma(2-alpha).
// The sampled path is piecewise constant, so the integral is evaluated exactly.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "roughvol/errors.hpp"
#include "roughvol/kernel.hpp"
#include "roughvol/model.hpp"
#include "roughvol/sim.hpp"

namespace roughvol {

template <typename Scalar>
struct SampledObservation {
  Scalar h = Scalar(0);
  Vector<Scalar> times;      ///< j h, j = 0..n
  Matrix<Scalar> x_samples;  ///< (n + 1) x d
  Vector<Scalar> x0;         ///< subtracted reference level; defaults to the first sample

  std::size_t n() const { return static_cast<std::size_t>(times.size()) - 1; }
  Eigen::Index dim() const { return x_samples.cols(); }

  /// Checks the constant step to 1e-9 h and the shape of the samples.
  void validate() const {
    if (!(h > 0)) throw InputError("observation step must be positive");
    if (times.size() < 2) throw InputError("observation needs at least two samples");
    if (x_samples.rows() != times.size()) throw InputError("sample count does not match time count");
    if (x0.size() != x_samples.cols()) throw InputError("x0 dimension does not match samples");
    const double tol = 1e-9 * static_cast<double>(h);
    if (std::abs(static_cast<double>(times(0))) > tol) throw InputError("observation must start at t = 0");
    for (Eigen::Index j = 1; j < times.size(); ++j) {
      if (std::abs(static_cast<double>(times(j) - times(j - 1) - h)) > tol) {
        std::ostringstream os;
        os << "observation step is not constant at row " << j;
        throw InputError(os.str());
      }
    }
  }

  /// Every stride-th node of a fine path; x0 is the first sample.
  static SampledObservation from_path(const SimulatedPath<Scalar>& path, std::size_t stride) {
    if (stride < 1) throw DomainError("stride must be at least 1");
    const std::size_t n = path.n_fine() / stride;
    SampledObservation obs;
    obs.h = path.delta() * static_cast<Scalar>(stride);
    obs.times.resize(static_cast<Eigen::Index>(n + 1));
    obs.x_samples.resize(static_cast<Eigen::Index>(n + 1), path.x.cols());
    for (std::size_t j = 0; j <= n; ++j) {
      const auto row = static_cast<Eigen::Index>(j * stride);
      obs.times(static_cast<Eigen::Index>(j)) = path.times(row);
      obs.x_samples.row(static_cast<Eigen::Index>(j)) = path.x.row(row);
    }
    obs.x0 = obs.x_samples.row(0).transpose();
    return obs;
  }

  static SampledObservation from_samples(Scalar h, const Matrix<Scalar>& samples) {
    SampledObservation obs;
    obs.h = h;
    obs.times.resize(samples.rows());
    for (Eigen::Index j = 0; j < samples.rows(); ++j) obs.times(j) = static_cast<Scalar>(j) * h;
    obs.x_samples = samples;
    obs.x0 = samples.row(0).transpose();
    return obs;
  }
};

template <typename Scalar>
struct ReconstructedPath {
  Vector<Scalar> query_times;  ///< j Delta, j = 0..N
  Matrix<Scalar> z_values;     ///< (N + 1) x d
  std::size_t k = 1;
  Scalar delta = Scalar(0);    ///< k h

  std::size_t n_blocks() const { return static_cast<std::size_t>(query_times.size()) - 1; }
};

/// Which sample represents X on the cell [jh, (j+1)h). Left is X_{jh}, the definition used
/// throughout. Right uses X_{(j+1)h}; it is kept because it reproduces the published tables.
enum class Sampling { Left, Right };

namespace detail {

// c_m = int_{(m-1)h}^{mh} L(s) ds for m = 1..n, so that Z^h_{ih} = sum_{m=1}^{i} c_m (X_{i-m} - x0).
template <typename Scalar>
std::vector<Scalar> resolvent_grid_weights(Scalar h, std::size_t n, const KernelParams<Scalar>& p) {
  std::vector<Scalar> c(n + 1, Scalar(0));
  for (std::size_t m = 1; m <= n; ++m) {
    c[m] = integral_L(Scalar(0), h, static_cast<Scalar>(m) * h, p);
  }
  return c;
}

// Nearest cell first; the m = 1 term dominates because L is singular at 0.
template <typename Scalar>
Vector<Scalar> invert_on_grid(const SampledObservation<Scalar>& obs, const std::vector<Scalar>& c, std::size_t i,
                              Sampling sampling = Sampling::Left) {
  const Eigen::Index d = obs.dim();
  const std::size_t shift = sampling == Sampling::Right ? 1 : 0;
  Vector<Scalar> z(d);
  for (Eigen::Index col = 0; col < d; ++col) {
    long double acc = 0;
    for (std::size_t m = 1; m <= i; ++m) {
      const auto row = static_cast<Eigen::Index>(i - m + shift);
      acc += static_cast<long double>(c[m]) * static_cast<long double>(obs.x_samples(row, col) - obs.x0(col));
    }
    z(col) = static_cast<Scalar>(acc);
  }
  return z;
}

template <typename Scalar>
Vector<Scalar> invert_off_grid(const SampledObservation<Scalar>& obs, Scalar t, const KernelParams<Scalar>& p,
                               Sampling sampling = Sampling::Left) {
  const Eigen::Index d = obs.dim();
  const Eigen::Index shift = sampling == Sampling::Right ? 1 : 0;
  const Scalar h = obs.h;
  Eigen::Index last = 0;  // largest j with j h < t
  const Scalar tol = detail::grid_tolerance(h);
  while (last + 1 < obs.times.size() && static_cast<Scalar>(last + 1) * h < t - tol) ++last;
  Vector<Scalar> z = Vector<Scalar>::Zero(d);
  if (!(t > 0)) return z;
  for (Eigen::Index col = 0; col < d; ++col) {
    long double acc = 0;
    for (Eigen::Index j = last; j >= 0; --j) {
      const Scalar lo = static_cast<Scalar>(j) * h;
      const Scalar hi = detail::cell_end(static_cast<long long>(j), h, t);
      acc += static_cast<long double>(integral_L(lo, hi, t, p)) *
             static_cast<long double>(obs.x_samples(j + shift, col) - obs.x0(col));
    }
    z(col) = static_cast<Scalar>(acc);
  }
  return z;
}

}  // namespace detail

/// Z^h at arbitrary times in [0, n h]. Times that sit on the sampling grid (to 1e-9 h)
/// use the precomputed lag weights; others are integrated cell by cell.
template <typename Scalar>
Matrix<Scalar> invert_at(const SampledObservation<Scalar>& obs, const KernelParams<Scalar>& p,
                         const std::vector<Scalar>& query_times, Sampling sampling = Sampling::Left) {
  obs.validate();
  const Scalar h = obs.h;
  const std::size_t n = obs.n();
  const Scalar horizon = static_cast<Scalar>(n) * h;
  const std::vector<Scalar> c = detail::resolvent_grid_weights(h, n, p);

  Matrix<Scalar> out(static_cast<Eigen::Index>(query_times.size()), obs.dim());
  for (std::size_t q = 0; q < query_times.size(); ++q) {
    const Scalar t = query_times[q];
    if (!(t >= 0) || !(t <= horizon * (Scalar(1) + Scalar(1e-12)))) {
      std::ostringstream os;
      os << "query time " << static_cast<double>(t) << " outside [0, " << static_cast<double>(horizon) << "]";
      throw DomainError(os.str());
    }
    using std::round;
    const Scalar idx = round(t / h);
    const bool on_grid = std::abs(static_cast<double>(t / h - idx)) <= 1e-9 && idx <= static_cast<Scalar>(n);
    const Vector<Scalar> z = on_grid ? detail::invert_on_grid(obs, c, static_cast<std::size_t>(idx), sampling)
                                     : detail::invert_off_grid(obs, t, p, sampling);
    out.row(static_cast<Eigen::Index>(q)) = z.transpose();
  }
  return out;
}

/// Z^h on the block grid j Delta, Delta = k h, j = 0..floor(n/k).
template <typename Scalar>
ReconstructedPath<Scalar> invert(const SampledObservation<Scalar>& obs, const KernelParams<Scalar>& p,
                                 std::size_t k, Sampling sampling = Sampling::Left) {
  obs.validate();
  if (k < 1) throw DomainError("subsampling factor k must be at least 1");
  const std::size_t n = obs.n();
  const std::size_t blocks = n / k;
  if (blocks < 1) throw DomainError("k h exceeds the observation horizon");
  const std::vector<Scalar> c = detail::resolvent_grid_weights(obs.h, n, p);

  ReconstructedPath<Scalar> out;
  out.k = k;
  out.delta = static_cast<Scalar>(k) * obs.h;
  out.query_times.resize(static_cast<Eigen::Index>(blocks + 1));
  out.z_values.resize(static_cast<Eigen::Index>(blocks + 1), obs.dim());
  for (std::size_t j = 0; j <= blocks; ++j) {
    out.query_times(static_cast<Eigen::Index>(j)) = static_cast<Scalar>(j * k) * obs.h;
    out.z_values.row(static_cast<Eigen::Index>(j)) = detail::invert_on_grid(obs, c, j * k, sampling).transpose();
  }
  return out;
}

template <typename Scalar>
struct ReconstructionError {
  Scalar sup_err;
  Scalar lp_err;
};

/// sup_t |Z^h_t - Z_t| and (mean_t |Z^h_t - Z_t|^p)^{1/p} over the query times, with Z read
/// from the oracle's fine grid.
template <typename Scalar>
ReconstructionError<Scalar> reconstruction_error(const ReconstructedPath<Scalar>& recon,
                                                 const SimulatedPath<Scalar>& oracle, Scalar p) {
  if (!(p >= 1)) throw DomainError("reconstruction_error requires p >= 1");
  if (recon.z_values.cols() != oracle.z_oracle.cols()) throw AlignmentError("dimension mismatch with oracle");
  const Scalar delta = oracle.delta();
  const auto n = static_cast<Scalar>(oracle.n_fine());
  Scalar sup = 0;
  long double acc = 0;
  using std::pow;
  using std::round;
  for (Eigen::Index q = 0; q < recon.query_times.size(); ++q) {
    const Scalar pos = recon.query_times(q) / delta;
    const Scalar idx = round(pos);
    if (std::abs(static_cast<double>(pos - idx)) > 1e-9 || idx < 0 || idx > n) {
      std::ostringstream os;
      os << "query time " << static_cast<double>(recon.query_times(q)) << " is not on the oracle grid";
      throw AlignmentError(os.str());
    }
    const Scalar e = (recon.z_values.row(q) - oracle.z_oracle.row(static_cast<Eigen::Index>(idx))).norm();
    sup = std::max(sup, e);
    acc += static_cast<long double>(pow(e, p));
  }
  const auto count = static_cast<long double>(recon.query_times.size());
  return {sup, static_cast<Scalar>(std::pow(acc / count, 1.0L / static_cast<long double>(p)))};
}

}  // namespace roughvol
