#pragma once

#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "roughvol/errors.hpp"

namespace roughvol {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Axis-aligned compact box for the drift parameter.
template <typename Scalar>
struct ThetaBox {
  Vector<Scalar> lower;
  Vector<Scalar> upper;

  Eigen::Index dim() const { return lower.size(); }

  bool contains(const Vector<Scalar>& theta) const {
    return theta.size() == lower.size() && (theta.array() >= lower.array()).all() &&
           (theta.array() <= upper.array()).all();
  }

  Vector<Scalar> clamp(const Vector<Scalar>& theta) const {
    return theta.cwiseMax(lower).cwiseMin(upper);
  }

  Vector<Scalar> center() const { return (lower + upper) / Scalar(2); }
};

/// Drift b(x, theta), diffusion a(x) and the true parameter of
///   X_t = x0 + eps int_0^t K(t-s) a(X_s) dB_s + int_0^t K(t-s) b(X_s, theta*) ds.
///
/// When drift_linear_in_theta is set, b(x, theta) = Phi(x) theta + phi0(x) with
/// Phi(x) = drift_jacobian_theta(x, .) independent of theta.
template <typename Scalar>
struct Model {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  std::string name;
  Eigen::Index dim_x = 1;
  Eigen::Index dim_b = 1;
  Eigen::Index dim_theta = 1;
  std::function<Vec(const Vec& x, const Vec& theta)> drift;
  std::function<Mat(const Vec& x, const Vec& theta)> drift_jacobian_theta;
  std::function<Mat(const Vec& x)> diffusion;
  ThetaBox<Scalar> theta_box;
  Vec theta_star;
  Vec x0;
  bool drift_linear_in_theta = false;

  void validate() const {
    if (dim_x < 1 || dim_b < 1 || dim_theta < 1) throw InputError("model dimensions must be positive");
    if (!drift || !drift_jacobian_theta || !diffusion) throw InputError("model coefficients are not set");
    if (x0.size() != dim_x) throw InputError("x0 has wrong dimension");
    if (theta_star.size() != dim_theta || theta_box.dim() != dim_theta || theta_box.upper.size() != dim_theta) {
      throw InputError("theta dimensions are inconsistent");
    }
    if ((theta_box.lower.array() > theta_box.upper.array()).any()) throw InputError("theta box is empty");
    if (!theta_box.contains(theta_star)) throw InputError("theta_star lies outside the parameter box");
  }
};

/// Scalar model b(x, theta) = theta_0 x + theta_1, a == 1.
template <typename Scalar>
Model<Scalar> linear_affine_model(Scalar theta0 = Scalar(-1), Scalar theta1 = Scalar(1), Scalar x0 = Scalar(0),
                                  Scalar box_half_width = Scalar(10)) {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;
  Model<Scalar> m;
  m.name = "linear-affine";
  m.dim_x = 1;
  m.dim_b = 1;
  m.dim_theta = 2;
  m.drift = [](const Vec& x, const Vec& theta) {
    Vec out(1);
    out(0) = theta(0) * x(0) + theta(1);
    return out;
  };
  m.drift_jacobian_theta = [](const Vec& x, const Vec&) {
    Mat j(1, 2);
    j << x(0), Scalar(1);
    return j;
  };
  m.diffusion = [](const Vec&) { return Mat::Identity(1, 1); };
  m.theta_box = {Vec::Constant(2, -box_half_width), Vec::Constant(2, box_half_width)};
  m.theta_star = Vec(2);
  m.theta_star << theta0, theta1;
  m.x0 = Vec::Constant(1, x0);
  m.drift_linear_in_theta = true;
  return m;
}

/// b == 0 and a == identity in dimension d; theta is a dummy scalar.
template <typename Scalar>
Model<Scalar> driftless_model(Eigen::Index d = 1) {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;
  Model<Scalar> m;
  m.name = "driftless";
  m.dim_x = d;
  m.dim_b = d;
  m.dim_theta = 1;
  m.drift = [d](const Vec&, const Vec&) { return Vec::Zero(d); };
  m.drift_jacobian_theta = [d](const Vec&, const Vec&) { return Mat::Zero(d, 1); };
  m.diffusion = [d](const Vec&) { return Mat::Identity(d, d); };
  m.theta_box = {Vec::Constant(1, Scalar(-1)), Vec::Constant(1, Scalar(1))};
  m.theta_star = Vec::Zero(1);
  m.x0 = Vec::Zero(d);
  m.drift_linear_in_theta = true;
  return m;
}

}  // namespace roughvol
