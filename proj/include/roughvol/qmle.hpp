#pragma once

// Quasi-likelihood drift estimation from reconstructed increments.
//
//   Xi_j(theta) = Z^h_{(j+1)Delta} - Z^h_{j Delta} - Delta b(X_{j Delta}, theta)
//   C(theta)    = sum_{j<N} Xi_j^T H(X_{j Delta}) Xi_j
//
// and the information matrix I = int_0^T d_theta b(X^0)^T H(X^0) d_theta b(X^0) dt.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "roughvol/errors.hpp"
#include "roughvol/invert.hpp"
#include "roughvol/model.hpp"
#include "roughvol/nelder_mead.hpp"
#include "roughvol/sim.hpp"

namespace roughvol {

enum class WeightKind { Identity, InverseDiffusion };
enum class MinimizerKind { ClosedFormLinear, NelderMead };

struct WeightSpec {
  WeightKind kind = WeightKind::Identity;
  double lambda = 1e-12;  ///< regularizer of a a^T for InverseDiffusion
  double scale = 1.0;     ///< positive multiplier applied to H

  void validate() const {
    if (!(lambda >= 0)) throw DomainError("weight regularizer must be non-negative");
    if (!(scale > 0)) throw DomainError("weight scale must be positive");
  }
};

struct ContrastConfig {
  std::size_t k = 1;
  WeightSpec weight;
  MinimizerKind minimizer = MinimizerKind::ClosedFormLinear;
  NelderMeadSettings nelder_mead;

  void validate() const {
    if (k < 1) throw DomainError("subsampling factor k must be at least 1");
    weight.validate();
    nelder_mead.validate();
  }
};

/// X and Z^h on the block grid j Delta, j = 0..N.
template <typename Scalar>
struct EstimationData {
  Scalar delta = Scalar(0);
  Matrix<Scalar> x_blocks;
  Matrix<Scalar> z_blocks;

  std::size_t n_blocks() const { return static_cast<std::size_t>(x_blocks.rows()) - 1; }
};

template <typename Scalar>
EstimationData<Scalar> make_estimation_data(const SampledObservation<Scalar>& obs,
                                            const ReconstructedPath<Scalar>& recon) {
  if (recon.z_values.rows() < 2) throw InputError("reconstruction has no complete block");
  const std::size_t blocks = recon.n_blocks();
  if (blocks * recon.k > obs.n()) throw InputError("reconstruction extends past the observations");
  EstimationData<Scalar> data;
  data.delta = recon.delta;
  data.z_blocks = recon.z_values;
  data.x_blocks.resize(static_cast<Eigen::Index>(blocks + 1), obs.dim());
  for (std::size_t j = 0; j <= blocks; ++j) {
    data.x_blocks.row(static_cast<Eigen::Index>(j)) = obs.x_samples.row(static_cast<Eigen::Index>(j * recon.k));
  }
  return data;
}

/// H(x) for the configured weight.
template <typename Scalar>
Matrix<Scalar> weight_matrix(const Model<Scalar>& model, const Vector<Scalar>& x, const WeightSpec& spec) {
  const Eigen::Index d = model.dim_x;
  const auto scale = static_cast<Scalar>(spec.scale);
  if (spec.kind == WeightKind::Identity) return scale * Matrix<Scalar>::Identity(d, d);

  const Matrix<Scalar> a = model.diffusion(x);
  const Matrix<Scalar> m = a * a.transpose() + static_cast<Scalar>(spec.lambda) * Matrix<Scalar>::Identity(d, d);
  Eigen::LLT<Matrix<Scalar>> llt(m);
  if (llt.info() != Eigen::Success || !m.allFinite()) {
    throw WeightError("a a^T + lambda I is not positive definite; raise lambda");
  }
  Matrix<Scalar> h = llt.solve(Matrix<Scalar>::Identity(d, d));
  h = Scalar(0.5) * (h + h.transpose());
  return scale * h;
}

/// Xi_j(theta). Requires 0 <= j < N.
template <typename Scalar>
Vector<Scalar> xi_block(const EstimationData<Scalar>& data, const Model<Scalar>& model, std::size_t j,
                        const Vector<Scalar>& theta) {
  if (j >= data.n_blocks()) {
    std::ostringstream os;
    os << "block index " << j << " out of range [0, " << data.n_blocks() << ")";
    throw DomainError(os.str());
  }
  const auto row = static_cast<Eigen::Index>(j);
  const Vector<Scalar> x = data.x_blocks.row(row).transpose();
  return (data.z_blocks.row(row + 1) - data.z_blocks.row(row)).transpose() - data.delta * model.drift(x, theta);
}

/// Contrast with the weights H(X_{j Delta}) evaluated once per dataset.
template <typename Scalar>
class ContrastFunction {
 public:
  ContrastFunction(const EstimationData<Scalar>& data, const Model<Scalar>& model, const WeightSpec& weight)
      : data_(data), model_(model) {
    weight.validate();
    if (data.x_blocks.rows() < 2 || data.z_blocks.rows() != data.x_blocks.rows()) {
      throw InputError("estimation data needs matching X and Z with at least one block");
    }
    if (data.x_blocks.cols() != model.dim_x || data.z_blocks.cols() != model.dim_x) {
      throw InputError("estimation data dimension does not match the model");
    }
    weights_.reserve(data.n_blocks());
    for (std::size_t j = 0; j < data.n_blocks(); ++j) {
      weights_.push_back(weight_matrix(model, Vector<Scalar>(data.x_blocks.row(static_cast<Eigen::Index>(j)).transpose()), weight));
    }
  }

  Scalar operator()(const Vector<Scalar>& theta) const {
    long double sum = 0;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      const Vector<Scalar> xi = xi_block(data_, model_, j, theta);
      sum += static_cast<long double>(xi.dot(weights_[j] * xi));
    }
    return static_cast<Scalar>(sum);
  }

  const std::vector<Matrix<Scalar>>& weights() const { return weights_; }

 private:
  const EstimationData<Scalar>& data_;
  const Model<Scalar>& model_;
  std::vector<Matrix<Scalar>> weights_;
};

template <typename Scalar>
Scalar contrast(const EstimationData<Scalar>& data, const Model<Scalar>& model, const Vector<Scalar>& theta,
                const ContrastConfig& cfg) {
  if (!model.theta_box.contains(theta)) throw DomainError("theta outside the parameter box");
  return ContrastFunction<Scalar>(data, model, cfg.weight)(theta);
}

template <typename Scalar>
struct StartDiagnostic {
  Vector<Scalar> start;
  Vector<Scalar> theta;
  Scalar value;
  int iterations;
  bool converged;
};

template <typename Scalar>
struct EstimationResult {
  Vector<Scalar> theta_hat;
  Scalar contrast_value = Scalar(0);
  std::size_t n_blocks = 0;
  bool converged = false;
  MinimizerKind method = MinimizerKind::ClosedFormLinear;
  std::vector<StartDiagnostic<Scalar>> diagnostics;
};

/// Condition threshold above which the normal matrix counts as rank deficient.
inline constexpr double kNormalMatrixMaxCondition = 1e12;

namespace detail {

template <typename Scalar>
Scalar condition_number(const Matrix<Scalar>& m) {
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return s(0) / s(s.size() - 1);
}

// Starts: box center, then corners in binary order (bit i set selects the upper bound).
template <typename Scalar>
std::vector<Vector<Scalar>> multistart_points(const ThetaBox<Scalar>& box, int count) {
  std::vector<Vector<Scalar>> out{box.center()};
  const Eigen::Index dim = box.dim();
  const unsigned long long corners = dim >= 63 ? ~0ULL : (1ULL << dim);
  for (unsigned long long mask = 0; static_cast<int>(out.size()) < count && mask < corners; ++mask) {
    Vector<Scalar> c(dim);
    for (Eigen::Index i = 0; i < dim; ++i) c(i) = ((mask >> i) & 1ULL) ? box.upper(i) : box.lower(i);
    out.push_back(c);
  }
  return out;
}

template <typename Scalar>
bool lexicographically_less(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (b(i) < a(i)) return false;
  }
  return false;
}

template <typename Scalar>
EstimationResult<Scalar> minimize_nelder_mead(const ContrastFunction<Scalar>& fn, const Model<Scalar>& model,
                                              const NelderMeadSettings& settings, std::size_t n_blocks) {
  EstimationResult<Scalar> result;
  result.method = MinimizerKind::NelderMead;
  result.n_blocks = n_blocks;
  const std::function<Scalar(const Vector<Scalar>&)> f = [&fn](const Vector<Scalar>& th) { return fn(th); };
  for (const auto& start : multistart_points(model.theta_box, settings.multistart)) {
    const SimplexResult<Scalar> r = box_nelder_mead(f, start, model.theta_box, settings);
    result.diagnostics.push_back({start, r.x, r.value, r.iterations, r.converged});
  }
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (const auto& d : result.diagnostics) best = std::min(best, d.value);
  using std::abs;
  const Scalar tie = Scalar(1e-12) * std::max(Scalar(1), abs(best));
  const StartDiagnostic<Scalar>* chosen = nullptr;
  for (const auto& d : result.diagnostics) {
    if (d.value - best > tie) continue;
    if (chosen == nullptr || lexicographically_less(d.theta, chosen->theta)) chosen = &d;
  }
  result.theta_hat = model.theta_box.clamp(chosen->theta);
  result.contrast_value = fn(result.theta_hat);
  result.converged = chosen->converged;
  return result;
}

}  // namespace detail

/// Weighted normal equations for a drift linear in theta, b(x, theta) = Phi(x) theta + phi0(x):
///   [sum Delta Phi_j^T H_j Phi_j] theta = sum Phi_j^T H_j (dZ_j - Delta phi0(X_j)).
template <typename Scalar>
struct NormalEquations {
  Matrix<Scalar> matrix;
  Vector<Scalar> rhs;
};

template <typename Scalar>
NormalEquations<Scalar> normal_equations(const EstimationData<Scalar>& data, const Model<Scalar>& model,
                                         const std::vector<Matrix<Scalar>>& weights) {
  const Eigen::Index p = model.dim_theta;
  const Vector<Scalar> ref = model.theta_box.center();
  NormalEquations<Scalar> ne{Matrix<Scalar>::Zero(p, p), Vector<Scalar>::Zero(p)};
  for (std::size_t j = 0; j < data.n_blocks(); ++j) {
    const auto row = static_cast<Eigen::Index>(j);
    const Vector<Scalar> x = data.x_blocks.row(row).transpose();
    const Matrix<Scalar> phi = model.drift_jacobian_theta(x, ref);
    const Vector<Scalar> offset = model.drift(x, ref) - phi * ref;
    const Vector<Scalar> dz = (data.z_blocks.row(row + 1) - data.z_blocks.row(row)).transpose();
    const Matrix<Scalar> phi_t_h = phi.transpose() * weights[j];
    ne.matrix.noalias() += data.delta * (phi_t_h * phi);
    ne.rhs.noalias() += phi_t_h * (dz - data.delta * offset);
  }
  return ne;
}

/// Minimizes the contrast over the parameter box.
///
/// ClosedFormLinear solves the normal equations; if that solution leaves the box, the
/// box-constrained minimum is found by Nelder-Mead instead. Singular normal equations
/// raise RankDeficiencyError with the condition number.
template <typename Scalar>
EstimationResult<Scalar> estimate(const EstimationData<Scalar>& data, const Model<Scalar>& model,
                                  const ContrastConfig& cfg) {
  cfg.validate();
  model.validate();
  const ContrastFunction<Scalar> fn(data, model, cfg.weight);

  if (cfg.minimizer == MinimizerKind::NelderMead) {
    return detail::minimize_nelder_mead(fn, model, cfg.nelder_mead, data.n_blocks());
  }
  if (!model.drift_linear_in_theta) throw ContractError("closed-form estimator requires a drift linear in theta");

  const NormalEquations<Scalar> ne = normal_equations(data, model, fn.weights());
  const Scalar cond = detail::condition_number(ne.matrix);
  if (!(cond < Scalar(kNormalMatrixMaxCondition))) {
    std::ostringstream os;
    os << "normal matrix is rank deficient (condition number " << static_cast<double>(cond) << ")";
    throw RankDeficiencyError(static_cast<double>(cond), os.str());
  }
  const Vector<Scalar> theta = ne.matrix.colPivHouseholderQr().solve(ne.rhs);
  if (!model.theta_box.contains(theta)) {
    return detail::minimize_nelder_mead(fn, model, cfg.nelder_mead, data.n_blocks());
  }
  EstimationResult<Scalar> result;
  result.theta_hat = theta;
  result.contrast_value = fn(theta);
  result.n_blocks = data.n_blocks();
  result.converged = true;
  result.method = MinimizerKind::ClosedFormLinear;
  return result;
}

template <typename Scalar>
struct FisherInfo {
  Matrix<Scalar> info;
  Matrix<Scalar> info_inv;
  WeightKind used_weight = WeightKind::Identity;
  double weight_scale = 1.0;
  bool diffusion_is_identity = false;  ///< a a^T == I along the whole path
};

/// Minimum number of nodes in the limit path used for the information quadrature.
inline constexpr std::size_t kFisherMinNodes = 4096;
inline constexpr double kFisherMaxCondition = 1e10;

/// Trapezoidal quadrature of d_theta b^T H d_theta b along the eps = 0 path.
template <typename Scalar>
FisherInfo<Scalar> fisher_info(const SimulatedPath<Scalar>& limit_path, const Model<Scalar>& model,
                               const Vector<Scalar>& theta_star, const WeightSpec& weight) {
  weight.validate();
  const Eigen::Index nodes = limit_path.times.size();
  if (static_cast<std::size_t>(nodes) < kFisherMinNodes) {
    throw InputError("fisher_info needs a limit path with at least 4096 nodes");
  }
  const Eigen::Index p = model.dim_theta;
  const Eigen::Index d = model.dim_x;
  FisherInfo<Scalar> out;
  out.used_weight = weight.kind;
  out.weight_scale = weight.scale;
  out.diffusion_is_identity = true;

  std::vector<Matrix<Scalar>> integrand(static_cast<std::size_t>(nodes));
  for (Eigen::Index i = 0; i < nodes; ++i) {
    const Vector<Scalar> x = limit_path.x.row(i).transpose();
    const Matrix<Scalar> jac = model.drift_jacobian_theta(x, theta_star);
    const Matrix<Scalar> a = model.diffusion(x);
    if (a.rows() != d || !(a * a.transpose()).isIdentity(Scalar(1e-12))) out.diffusion_is_identity = false;
    integrand[static_cast<std::size_t>(i)] = jac.transpose() * weight_matrix(model, x, weight) * jac;
  }
  out.info = Matrix<Scalar>::Zero(p, p);
  for (Eigen::Index i = 0; i + 1 < nodes; ++i) {
    const Scalar dt = limit_path.times(i + 1) - limit_path.times(i);
    out.info += Scalar(0.5) * dt * (integrand[static_cast<std::size_t>(i)] + integrand[static_cast<std::size_t>(i + 1)]);
  }
  out.info = Scalar(0.5) * (out.info + out.info.transpose());

  const Scalar cond = detail::condition_number(out.info);
  if (!(cond < Scalar(kFisherMaxCondition))) {
    std::ostringstream os;
    os << "information matrix is not invertible (condition number " << static_cast<double>(cond) << ")";
    throw FisherSingularError(os.str());
  }
  out.info_inv = out.info.ldlt().solve(Matrix<Scalar>::Identity(p, p));
  out.info_inv = Scalar(0.5) * (out.info_inv + out.info_inv.transpose());
  return out;
}

/// sqrt(diag(I^{-1})): the standard deviation of (theta_hat - theta*)/eps in the limit.
/// Only meaningful when H = (a a^T)^{-1}, or H = Id with a a^T = Id.
template <typename Scalar>
Vector<Scalar> asymptotic_std(const FisherInfo<Scalar>& info) {
  const bool gaussian_limit = info.weight_scale == 1.0 && (info.used_weight == WeightKind::InverseDiffusion ||
                              (info.used_weight == WeightKind::Identity && info.diffusion_is_identity));
  if (!gaussian_limit) {
    throw ContractError("asymptotic std needs H = (a a^T)^{-1} or an identity diffusion with H = Id");
  }
  return info.info_inv.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
}

/// Same, on the raw scale of theta_hat.
template <typename Scalar>
Vector<Scalar> asymptotic_std(const FisherInfo<Scalar>& info, Scalar epsilon) {
  return epsilon * asymptotic_std(info);
}

}  // namespace roughvol
