#pragma once

// Monte Carlo harness: replicated simulate -> invert -> estimate pipelines, table cells and
// rate studies.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "roughvol/invert.hpp"
#include "roughvol/model.hpp"
#include "roughvol/qmle.hpp"

namespace roughvol {

struct ExperimentGrid {
  double alpha = 0.8;
  double T = 1.0;
  double h = 1e-2;
  std::vector<double> epsilon_list{0.1, 0.05, 0.01};
  std::vector<std::size_t> k_list{20, 10, 5, 2, 1};
  std::size_t n_rep = 1000;
  std::uint64_t master_seed = 1;
  std::string model = "linear-affine";
  std::vector<double> theta_star{-1.0, 1.0};
  double x0 = 0.0;
  double box_half_width = 10.0;
  WeightSpec weight;
  MinimizerKind minimizer = MinimizerKind::ClosedFormLinear;
  std::size_t n_fine_per_h = 1;
  Sampling sampling = Sampling::Left;

  /// Observation steps n = T/h, snapped like GridGeometry.
  std::size_t n_obs() const;
  void validate() const;
  Model<double> build_model() const;
};

struct CellStats {
  double epsilon = 0;
  std::size_t k = 1;
  double delta = 0;
  Vector<double> mean;
  Vector<double> rescaled_std;  ///< sample std / epsilon
  double rmse = 0;              ///< sqrt(mean |theta_hat - theta*|^2)
  std::size_t n_rep = 0;
  std::size_t n_effective = 0;  ///< replications that finished and converged
  std::string first_failure;

  /// Accepted when at least 99% of replications are usable.
  bool accepted() const { return 100 * n_effective >= 99 * n_rep; }
};

/// Outcome of one replication.
struct Replicate {
  Vector<double> theta;
  bool converged = true;
};

/// One replication for cell (epsilon, k) with its derived seed. Throwing roughvol::Error marks
/// the replication as failed.
using Estimator = std::function<Replicate(const ExperimentGrid&, double epsilon, std::size_t k, std::uint64_t seed)>;

/// simulate -> sample every n_fine_per_h-th node -> invert -> estimate.
Replicate run_pipeline(const ExperimentGrid& grid, double epsilon, std::size_t k, std::uint64_t seed);

/// Seed of replication rep in cell (epsilon, k); independent of cell order.
std::uint64_t replication_seed(std::uint64_t master, double epsilon, std::size_t k, std::size_t rep);

/// Runs f(i) for i in [0, n) on `threads` workers (0 = all cores). f must not share mutable state.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f);

/// Pairwise summation; the result depends only on the order of the input.
double pairwise_sum(const double* x, std::size_t n);

using ProgressFn = std::function<void(const CellStats&)>;

CellStats run_cell(const ExperimentGrid& grid, double epsilon, std::size_t k, unsigned threads = 1,
                   const Estimator& estimator = run_pipeline);

/// All cells, ordered by k_list (outer) and epsilon_list (inner). A cell whose replications all
/// fail raises CellError.
std::vector<CellStats> run_table(const ExperimentGrid& grid, unsigned threads = 1,
                                 const Estimator& estimator = run_pipeline, const ProgressFn& progress = {});

struct RateStudy {
  double alpha = 0.8;
  double T = 1.0;
  std::vector<double> h_list;
  double epsilon = 1.0;
  std::size_t n_rep = 200;
  std::uint64_t seed = 1;
  Sampling sampling = Sampling::Left;
};

struct RateResult {
  std::vector<double> x;       ///< abscissa per point (h or epsilon)
  std::vector<double> y;       ///< error measure per point
  std::vector<std::size_t> k;  ///< k per point (estimator study only)
  double slope = 0;
};

/// Least-squares slope of log y on log x over the points with finite positive y.
/// Fewer than 3 such points raise RegressionError.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Slope of log E|Z^h_T - Z_T| against log h. One fine grid with step min(h_list)/4 carries the
/// coupled oracle; each h reads its observations off that grid.
RateResult rate_reconstruction(const Model<double>& model, const RateStudy& study, unsigned threads = 1);

/// Slope of log RMSE(theta_hat) against log epsilon; cells pair epsilon_list[i] with k_list[i].
RateResult rate_estimator(const ExperimentGrid& grid, unsigned threads = 1, const Estimator& estimator = run_pipeline);

enum class TableFormat { Csv, Markdown };

std::string emit_table(const ExperimentGrid& grid, const std::vector<CellStats>& cells, TableFormat format);

struct TableRow {
  double alpha, T, h, epsilon;
  std::size_t k;
  double delta;
  Vector<double> mean;
  Vector<double> rescaled_std;
  std::size_t n_effective;
};

std::vector<TableRow> parse_table_csv(std::istream& in);

}  // namespace roughvol
