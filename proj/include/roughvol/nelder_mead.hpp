#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "roughvol/errors.hpp"
#include "roughvol/model.hpp"

namespace roughvol {

struct NelderMeadSettings {
  int max_iter = 5000;
  double tolerance = 1e-10;
  int multistart = 5;

  void validate() const {
    if (max_iter < 100) throw DomainError("Nelder-Mead max_iter must be at least 100");
    if (!(tolerance > 0)) throw DomainError("Nelder-Mead tolerance must be positive");
    if (multistart < 1) throw DomainError("Nelder-Mead multistart count must be at least 1");
  }
};

template <typename Scalar>
struct SimplexResult {
  Vector<Scalar> x;
  Scalar value;
  int iterations = 0;
  bool converged = false;
};

/// Nelder-Mead on a box: every trial point is projected onto the box before evaluation.
///
/// Convergence requires both the spread of simplex values (relative to tolerance) and the
/// simplex diameter (relative to the box width) to fall under tolerance. After convergence
/// the search restarts once from the best vertex with a small fresh simplex; the result is
/// accepted when the restart no longer improves it.
template <typename Scalar>
SimplexResult<Scalar> box_nelder_mead(const std::function<Scalar(const Vector<Scalar>&)>& f,
                                      const Vector<Scalar>& start, const ThetaBox<Scalar>& box,
                                      const NelderMeadSettings& settings) {
  settings.validate();
  const Eigen::Index dim = start.size();
  const Vector<Scalar> width = (box.upper - box.lower).cwiseMax(Scalar(1e-12));
  const auto tol = static_cast<Scalar>(settings.tolerance);

  std::vector<Vector<Scalar>> pts(static_cast<std::size_t>(dim + 1));
  std::vector<Scalar> vals(static_cast<std::size_t>(dim + 1));
  int iterations = 0;

  auto build = [&](const Vector<Scalar>& origin, Scalar rel_step) {
    pts[0] = box.clamp(origin);
    for (Eigen::Index i = 0; i < dim; ++i) {
      Vector<Scalar> p = pts[0];
      const Scalar step = rel_step * width(i);
      p(i) = (p(i) + step <= box.upper(i)) ? p(i) + step : p(i) - step;
      pts[static_cast<std::size_t>(i + 1)] = box.clamp(p);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = f(pts[i]);
  };

  auto run = [&]() -> bool {
    std::vector<std::size_t> order(pts.size());
    while (iterations < settings.max_iter) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      const std::size_t best = order.front();
      const std::size_t worst = order.back();
      const std::size_t second = order[order.size() - 2];

      Scalar diameter = 0;
      for (const auto& p : pts) diameter = std::max(diameter, ((p - pts[best]).array() / width.array()).abs().maxCoeff());
      using std::abs;
      const Scalar spread = vals[worst] - vals[best];
      if (spread <= tol * (abs(vals[best]) + tol) && diameter <= tol) return true;
      ++iterations;

      Vector<Scalar> centroid = Vector<Scalar>::Zero(dim);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i != worst) centroid += pts[i];
      }
      centroid /= static_cast<Scalar>(dim);

      const Vector<Scalar> reflected = box.clamp(centroid + (centroid - pts[worst]));
      const Scalar fr = f(reflected);
      if (fr < vals[best]) {
        const Vector<Scalar> expanded = box.clamp(centroid + Scalar(2) * (centroid - pts[worst]));
        const Scalar fe = f(expanded);
        if (fe < fr) {
          pts[worst] = expanded;
          vals[worst] = fe;
        } else {
          pts[worst] = reflected;
          vals[worst] = fr;
        }
        continue;
      }
      if (fr < vals[second]) {
        pts[worst] = reflected;
        vals[worst] = fr;
        continue;
      }
      const bool outside = fr < vals[worst];
      const Vector<Scalar> contracted =
          outside ? box.clamp(centroid + Scalar(0.5) * (reflected - centroid))
                  : box.clamp(centroid + Scalar(0.5) * (pts[worst] - centroid));
      const Scalar fc = f(contracted);
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = contracted;
        vals[worst] = fc;
        continue;
      }
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i == best) continue;
        pts[i] = box.clamp(pts[best] + Scalar(0.5) * (pts[i] - pts[best]));
        vals[i] = f(pts[i]);
      }
    }
    return false;
  };

  auto best_vertex = [&]() {
    const auto it = std::min_element(vals.begin(), vals.end());
    return static_cast<std::size_t>(it - vals.begin());
  };

  build(start, Scalar(0.1));
  bool converged = run();
  for (int restart = 0; converged && restart < 10; ++restart) {
    const std::size_t b = best_vertex();
    const Vector<Scalar> anchor = pts[b];
    const Scalar anchor_value = vals[b];
    build(anchor, Scalar(1e-3));
    converged = run();
    const std::size_t nb = best_vertex();
    using std::abs;
    const bool moved = ((pts[nb] - anchor).array() / width.array()).abs().maxCoeff() > tol;
    const bool improved = anchor_value - vals[nb] > tol * (abs(anchor_value) + tol);
    if (!moved && !improved) break;
  }
  const std::size_t b = best_vertex();
  return {pts[b], vals[b], iterations, converged};
}

}  // namespace roughvol
