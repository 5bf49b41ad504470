#include "roughvol/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <mutex>
#include <sstream>
#include <thread>

#include "roughvol/rng.hpp"

namespace roughvol {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// 1/v when v is the reciprocal of an integer, otherwise %g.
std::string reciprocal_label(double v) {
  const double r = 1.0 / v;
  const double nearest = std::round(r);
  if (nearest >= 1 && std::abs(r - nearest) <= 1e-9 * nearest) return "1/" + fmt("%.0f", nearest);
  return fmt("%g", v);
}

std::string pair_label(const Vector<double>& v, const char* spec) {
  std::string out = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(spec, v(i));
  }
  return out + ")";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("table csv row " + std::to_string(row) + ": not a number: '" + s + "'");
  }
}

}  // namespace

std::size_t ExperimentGrid::n_obs() const { return GridGeometry<double>(h, T).n(); }

void ExperimentGrid::validate() const {
  const KernelParams<double> p(alpha);
  (void)p;
  if (!(T > 0) || !std::isfinite(T)) throw DomainError("T must be positive");
  if (!(h > 0) || !(h <= T)) throw DomainError("h must lie in (0, T]");
  if (epsilon_list.empty()) throw DomainError("epsilon_list is empty");
  for (double e : epsilon_list) {
    if (!(e > 0) || !(e <= 1)) throw DomainError("every epsilon must lie in (0, 1]");
  }
  if (k_list.empty()) throw DomainError("k_list is empty");
  for (std::size_t k : k_list) {
    if (k < 1) throw DomainError("every k must be at least 1");
    if (k > n_obs()) throw DomainError("k h exceeds T for k = " + std::to_string(k));
  }
  if (n_rep < 2) throw DomainError("n_rep must be at least 2");
  if (n_fine_per_h < 1) throw DomainError("n_fine_per_h must be at least 1");
  weight.validate();
  build_model().validate();
}

Model<double> ExperimentGrid::build_model() const {
  if (model == "linear-affine") {
    if (theta_star.size() != 2) throw DomainError("linear-affine model needs two theta_star values");
    return linear_affine_model<double>(theta_star[0], theta_star[1], x0, box_half_width);
  }
  if (model == "driftless") {
    auto m = driftless_model<double>(1);
    m.x0 = Vector<double>::Constant(1, x0);
    return m;
  }
  throw DomainError("unknown model '" + model + "' (expected linear-affine or driftless)");
}

Replicate run_pipeline(const ExperimentGrid& grid, double epsilon, std::size_t k, std::uint64_t seed) {
  const Model<double> model = grid.build_model();
  SimConfig<double> cfg;
  cfg.epsilon = epsilon;
  cfg.alpha = grid.alpha;
  cfg.T = static_cast<double>(grid.n_obs()) * grid.h;
  cfg.n_fine = grid.n_obs() * grid.n_fine_per_h;
  cfg.seed = seed;
  const auto path = simulate(model, cfg);
  const auto obs = SampledObservation<double>::from_path(path, grid.n_fine_per_h);
  const auto recon = invert(obs, KernelParams<double>(grid.alpha), k, grid.sampling);
  const auto data = make_estimation_data(obs, recon);

  ContrastConfig contrast_cfg;
  contrast_cfg.k = k;
  contrast_cfg.weight = grid.weight;
  contrast_cfg.minimizer = grid.minimizer;
  const auto res = estimate(data, model, contrast_cfg);
  return {res.theta_hat, res.converged};
}

std::uint64_t replication_seed(std::uint64_t master, double epsilon, std::size_t k, std::size_t rep) {
  return derive_seed(master, {key_of(epsilon), static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(rep)});
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

CellStats run_cell(const ExperimentGrid& grid, double epsilon, std::size_t k, unsigned threads,
                   const Estimator& estimator) {
  grid.validate();
  std::vector<Replicate> results(grid.n_rep);
  std::vector<char> usable(grid.n_rep, 0);
  std::vector<std::string> failures(grid.n_rep);
  parallel_for(grid.n_rep, threads, [&](std::size_t rep) {
    try {
      results[rep] = estimator(grid, epsilon, k, replication_seed(grid.master_seed, epsilon, k, rep));
      usable[rep] = results[rep].converged && results[rep].theta.allFinite() ? 1 : 0;
      if (!usable[rep]) failures[rep] = "minimizer did not converge";
    } catch (const Error& e) {
      failures[rep] = e.what();
    }
  });

  CellStats cell;
  cell.epsilon = epsilon;
  cell.k = k;
  cell.delta = static_cast<double>(k) * grid.h;
  cell.n_rep = grid.n_rep;
  for (std::size_t rep = 0; rep < grid.n_rep; ++rep) {
    if (usable[rep]) {
      ++cell.n_effective;
    } else if (cell.first_failure.empty()) {
      cell.first_failure = "replication " + std::to_string(rep) + ": " + failures[rep];
    }
  }
  if (cell.n_effective == 0) {
    std::ostringstream os;
    os << "all " << grid.n_rep << " replications failed in cell epsilon=" << epsilon << " k=" << k << "; "
       << cell.first_failure;
    throw CellError(os.str());
  }

  const Model<double> model = grid.build_model();
  const Eigen::Index p = model.dim_theta;
  cell.mean.resize(p);
  cell.rescaled_std.resize(p);
  std::vector<double> column(cell.n_effective);
  std::vector<double> sq_err(cell.n_effective, 0.0);
  const auto count = static_cast<double>(cell.n_effective);
  for (Eigen::Index c = 0; c < p; ++c) {
    std::size_t i = 0;
    for (std::size_t rep = 0; rep < grid.n_rep; ++rep) {
      if (usable[rep]) column[i++] = results[rep].theta(c);
    }
    const double mean = pairwise_sum(column.data(), column.size()) / count;
    for (std::size_t j = 0; j < column.size(); ++j) {
      const double dev = column[j] - model.theta_star(c);
      sq_err[j] += dev * dev;
      column[j] = (column[j] - mean) * (column[j] - mean);
    }
    const double var = cell.n_effective > 1 ? pairwise_sum(column.data(), column.size()) / (count - 1) : 0.0;
    cell.mean(c) = mean;
    cell.rescaled_std(c) = std::sqrt(var) / epsilon;
  }
  cell.rmse = std::sqrt(pairwise_sum(sq_err.data(), sq_err.size()) / count);
  return cell;
}

std::vector<CellStats> run_table(const ExperimentGrid& grid, unsigned threads, const Estimator& estimator,
                                 const ProgressFn& progress) {
  grid.validate();
  std::vector<CellStats> cells;
  for (std::size_t k : grid.k_list) {
    for (double eps : grid.epsilon_list) {
      cells.push_back(run_cell(grid, eps, k, threads, estimator));
      if (progress) progress(cells.back());
    }
  }
  return cells;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("regression inputs differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0 && y[i] > 0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  if (lx.size() < 3) {
    throw RegressionError("log-log regression needs at least 3 points with positive error, got " +
                          std::to_string(lx.size()));
  }
  const auto n = static_cast<double>(lx.size());
  const double mx = pairwise_sum(lx.data(), lx.size()) / n;
  const double my = pairwise_sum(ly.data(), ly.size()) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0)) throw RegressionError("log-log regression needs distinct abscissae");
  return sxy / sxx;
}

RateResult rate_reconstruction(const Model<double>& model, const RateStudy& study, unsigned threads) {
  model.validate();
  const KernelParams<double> p(study.alpha);
  if (study.h_list.size() < 5) throw DomainError("rate study needs at least 5 values of h");
  if (study.n_rep < 1) throw DomainError("rate study needs at least one replication");
  const double ratio = study.h_list[1] / study.h_list[0];
  for (std::size_t i = 0; i + 1 < study.h_list.size(); ++i) {
    const double r = study.h_list[i + 1] / study.h_list[i];
    if (!(study.h_list[i] > 0) || std::abs(r - ratio) > 1e-6 * ratio || std::abs(r - 1) < 1e-6) {
      throw DomainError("h_list must be a geometric sequence of positive steps");
    }
  }
  const double h_min = *std::min_element(study.h_list.begin(), study.h_list.end());
  const double delta = h_min / 4;
  const double n_fine_real = std::round(study.T / delta);
  if (std::abs(n_fine_real * delta - study.T) > 1e-9 * study.T) {
    throw DomainError("T must be a multiple of min(h_list)/4");
  }
  const auto n_fine = static_cast<std::size_t>(n_fine_real);
  std::vector<std::size_t> strides;
  for (double h : study.h_list) {
    const double s = std::round(h / delta);
    if (std::abs(s * delta - h) > 1e-9 * h || n_fine % static_cast<std::size_t>(s) != 0) {
      throw DomainError("every h must divide T and be a multiple of min(h_list)/4");
    }
    strides.push_back(static_cast<std::size_t>(s));
  }

  const std::size_t m = study.h_list.size();
  std::vector<double> errors(study.n_rep * m);
  parallel_for(study.n_rep, threads, [&](std::size_t rep) {
    SimConfig<double> cfg;
    cfg.epsilon = study.epsilon;
    cfg.alpha = study.alpha;
    cfg.T = study.T;
    cfg.n_fine = n_fine;
    cfg.seed = derive_seed(study.seed, {static_cast<std::uint64_t>(rep)});
    const auto path = simulate(model, cfg);
    const Vector<double> z_true = path.z_oracle.row(static_cast<Eigen::Index>(n_fine)).transpose();
    for (std::size_t i = 0; i < m; ++i) {
      const auto obs = SampledObservation<double>::from_path(path, strides[i]);
      const double t_end = static_cast<double>(obs.n()) * obs.h;
      const auto z = invert_at(obs, p, std::vector<double>{t_end}, study.sampling);
      errors[rep * m + i] = (z.row(0).transpose() - z_true).norm();
    }
  });

  RateResult out;
  std::vector<double> column(study.n_rep);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t rep = 0; rep < study.n_rep; ++rep) column[rep] = errors[rep * m + i];
    out.x.push_back(study.h_list[i]);
    out.y.push_back(pairwise_sum(column.data(), column.size()) / static_cast<double>(study.n_rep));
  }
  out.slope = loglog_slope(out.x, out.y);
  return out;
}

RateResult rate_estimator(const ExperimentGrid& grid, unsigned threads, const Estimator& estimator) {
  if (grid.epsilon_list.size() < 3) throw RegressionError("estimator rate study needs at least 3 epsilon values");
  if (grid.k_list.size() != grid.epsilon_list.size()) {
    throw DomainError("estimator rate study pairs epsilon_list with k_list; lengths differ");
  }
  grid.validate();
  RateResult out;
  for (std::size_t i = 0; i < grid.epsilon_list.size(); ++i) {
    const CellStats cell = run_cell(grid, grid.epsilon_list[i], grid.k_list[i], threads, estimator);
    out.x.push_back(cell.epsilon);
    out.y.push_back(cell.rmse);
    out.k.push_back(cell.k);
  }
  out.slope = loglog_slope(out.x, out.y);
  return out;
}

std::string emit_table(const ExperimentGrid& grid, const std::vector<CellStats>& cells, TableFormat format) {
  std::ostringstream os;
  const Eigen::Index p = cells.empty() ? Eigen::Index(0) : cells.front().mean.size();
  if (format == TableFormat::Csv) {
    os << "alpha,T,h,epsilon,k,delta";
    for (Eigen::Index i = 1; i <= p; ++i) os << ",mean_" << i;
    for (Eigen::Index i = 1; i <= p; ++i) os << ",rstd_" << i;
    os << ",n_effective\n";
    for (const auto& c : cells) {
      os << fmt("%.17g", grid.alpha) << ',' << fmt("%.17g", grid.T) << ',' << fmt("%.17g", grid.h) << ','
         << fmt("%.17g", c.epsilon) << ',' << c.k << ',' << fmt("%.17g", c.delta);
      for (Eigen::Index i = 0; i < p; ++i) os << ',' << fmt("%.17g", c.mean(i));
      for (Eigen::Index i = 0; i < p; ++i) os << ',' << fmt("%.17g", c.rescaled_std(i));
      os << ',' << c.n_effective << '\n';
    }
    return os.str();
  }

  std::vector<double> eps;
  std::vector<std::size_t> ks;
  for (const auto& c : cells) {
    if (std::find(eps.begin(), eps.end(), c.epsilon) == eps.end()) eps.push_back(c.epsilon);
    if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
  }
  auto find = [&](std::size_t k, double e) -> const CellStats* {
    for (const auto& c : cells) {
      if (c.k == k && c.epsilon == e) return &c;
    }
    return nullptr;
  };
  bool any_rejected = false;
  os << "alpha=" << fmt("%g", grid.alpha) << ", theta*=" << pair_label(grid.build_model().theta_star, "%g")
     << ", T=" << fmt("%g", grid.T) << ", h=" << fmt("%g", grid.h) << ", n_rep=" << grid.n_rep << "\n\n";
  os << "| Delta \\ epsilon | |";
  for (double e : eps) os << ' ' << reciprocal_label(e) << " |";
  os << "\n|---|---|";
  for (std::size_t i = 0; i < eps.size(); ++i) os << "---|";
  os << '\n';
  for (std::size_t k : ks) {
    os << "| " << reciprocal_label(static_cast<double>(k) * grid.h) << " (k=" << k << ") | mean |";
    for (double e : eps) {
      const CellStats* c = find(k, e);
      os << ' ' << (c ? pair_label(c->mean, "%.2f") : "") << " |";
    }
    os << "\n| | resc. std. |";
    for (double e : eps) {
      const CellStats* c = find(k, e);
      std::string text = c ? pair_label(c->rescaled_std, "%.2g") : "";
      if (c && !c->accepted()) {
        text += " (n_effective=" + std::to_string(c->n_effective) + ")";
        any_rejected = true;
      }
      os << ' ' << text << " |";
    }
    os << '\n';
  }
  os << "\nresc. std. is the empirical standard deviation multiplied by 1/epsilon.\n";
  if (any_rejected) os << "Cells marked with n_effective have fewer than 99% usable replications.\n";
  return os.str();
}

std::vector<TableRow> parse_table_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("table csv is empty");
  const auto header = split(line, ',');
  const std::vector<std::string> lead{"alpha", "T", "h", "epsilon", "k", "delta"};
  if (header.size() < lead.size() + 1 || !std::equal(lead.begin(), lead.end(), header.begin()) ||
      header.back() != "n_effective") {
    throw InputError("table csv header must start with alpha,T,h,epsilon,k,delta and end with n_effective");
  }
  const std::size_t middle = header.size() - lead.size() - 1;
  if (middle % 2 != 0) throw InputError("table csv needs matching mean_ and rstd_ columns");
  const auto p = static_cast<Eigen::Index>(middle / 2);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (header[lead.size() + static_cast<std::size_t>(i)] != "mean_" + std::to_string(i + 1) ||
        header[lead.size() + static_cast<std::size_t>(p + i)] != "rstd_" + std::to_string(i + 1)) {
      throw InputError("table csv has unexpected column names");
    }
  }
  std::vector<TableRow> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw InputError("table csv row " + std::to_string(row_no) + " has wrong width");
    TableRow r;
    r.alpha = to_double(f[0], row_no);
    r.T = to_double(f[1], row_no);
    r.h = to_double(f[2], row_no);
    r.epsilon = to_double(f[3], row_no);
    r.k = static_cast<std::size_t>(to_double(f[4], row_no));
    r.delta = to_double(f[5], row_no);
    r.mean.resize(p);
    r.rescaled_std.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
      r.mean(i) = to_double(f[6 + static_cast<std::size_t>(i)], row_no);
      r.rescaled_std(i) = to_double(f[6 + static_cast<std::size_t>(p + i)], row_no);
    }
    r.n_effective = static_cast<std::size_t>(to_double(f.back(), row_no));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace roughvol
