#include "roughvol/csv_io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace roughvol {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::string f;
  std::istringstream is(line);
  while (std::getline(is, f, ',')) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
    out.push_back(f);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_path_csv(std::ostream& out, const SimulatedPath<double>& path) {
  const Eigen::Index d = path.x.cols();
  out << 't';
  for (Eigen::Index c = 1; c <= d; ++c) out << ",x_" << c;
  for (Eigen::Index c = 1; c <= d; ++c) out << ",z_" << c;
  out << '\n';
  for (Eigen::Index i = 0; i < path.times.size(); ++i) {
    out << num(path.times(i));
    for (Eigen::Index c = 0; c < d; ++c) out << ',' << num(path.x(i, c));
    for (Eigen::Index c = 0; c < d; ++c) out << ',' << num(path.z_oracle(i, c));
    out << '\n';
  }
}

SampledObservation<double> read_observation_csv(std::istream& in, const std::string& source, std::size_t stride) {
  if (stride < 1) throw DomainError("stride must be at least 1");
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": empty file");
  const auto header = fields(line);
  if (header.empty() || header[0] != "t") throw InputError(source + ": header must start with t");
  Eigen::Index d = 0;
  while (static_cast<std::size_t>(d + 1) < header.size() && header[static_cast<std::size_t>(d + 1)] == "x_" + std::to_string(d + 1)) ++d;
  if (d == 0) throw InputError(source + ": header needs columns x_1..x_d after t");
  for (std::size_t c = static_cast<std::size_t>(d) + 1; c < header.size(); ++c) {
    if (header[c].rfind("z_", 0) != 0) throw InputError(source + ": unexpected column '" + header[c] + "'");
  }

  std::vector<double> t;
  std::vector<double> x;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = fields(line);
    if (f.size() != header.size()) {
      throw InputError(source + ": row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                       " fields, expected " + std::to_string(header.size()));
    }
    for (Eigen::Index c = 0; c <= d; ++c) {
      const std::string& s = f[static_cast<std::size_t>(c)];
      double v = 0;
      try {
        std::size_t used = 0;
        v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw InputError(source + ": row " + std::to_string(row) + ": not a number: '" + s + "'");
      }
      if (!std::isfinite(v)) throw InputError(source + ": row " + std::to_string(row) + ": non-finite value");
      (c == 0 ? t : x).push_back(v);
    }
  }
  const std::size_t rows = t.size();
  if (rows < 2) throw InputError(source + ": need at least two samples");

  const std::size_t kept = (rows - 1) / stride + 1;
  Matrix<double> samples(static_cast<Eigen::Index>(kept), d);
  Vector<double> times(static_cast<Eigen::Index>(kept));
  for (std::size_t j = 0; j < kept; ++j) {
    const std::size_t r = j * stride;
    times(static_cast<Eigen::Index>(j)) = t[r];
    for (Eigen::Index c = 0; c < d; ++c) samples(static_cast<Eigen::Index>(j), c) = x[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
  }
  if (kept < 2) throw InputError(source + ": stride leaves fewer than two samples");
  SampledObservation<double> obs;
  obs.h = times(1) - times(0);
  obs.times = times;
  obs.x_samples = samples;
  obs.x0 = samples.row(0).transpose();
  try {
    obs.validate();
  } catch (const InputError& e) {
    throw InputError(source + ": " + e.what());
  }
  return obs;
}

void write_reconstruction_csv(std::ostream& out, const ReconstructedPath<double>& recon) {
  const Eigen::Index d = recon.z_values.cols();
  out << 't';
  for (Eigen::Index c = 1; c <= d; ++c) out << ",z_" << c;
  out << '\n';
  for (Eigen::Index i = 0; i < recon.query_times.size(); ++i) {
    out << num(recon.query_times(i));
    for (Eigen::Index c = 0; c < d; ++c) out << ',' << num(recon.z_values(i, c));
    out << '\n';
  }
}

void write_estimation_csv(std::ostream& out, const EstimationResult<double>& result) {
  const Eigen::Index p = result.theta_hat.size();
  for (Eigen::Index i = 1; i <= p; ++i) out << "theta_" << i << ',';
  out << "contrast,n_blocks,converged,method\n";
  for (Eigen::Index i = 0; i < p; ++i) out << num(result.theta_hat(i)) << ',';
  out << num(result.contrast_value) << ',' << result.n_blocks << ',' << (result.converged ? 1 : 0) << ','
      << (result.method == MinimizerKind::ClosedFormLinear ? "closed-form" : "nelder-mead") << '\n';
}

}  // namespace roughvol
