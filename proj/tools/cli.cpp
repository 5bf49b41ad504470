#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "roughvol/config.hpp"
#include "roughvol/csv_io.hpp"
#include "roughvol/mc.hpp"

namespace roughvol::cli {

namespace {

struct OptSpec {
  const char* key;
  const char* value;
  const char* help;
};

// Shared option groups. Config keys are the flag names with '-' replaced by '_'.
const std::vector<OptSpec> kGlobal = {
    {"seed", "1", "master seed (config key seed or master_seed)"},
    {"threads", "1", "worker threads for Monte Carlo, 0 = all cores"},
    {"out", "", "output file (default: standard output)"},
};

const std::vector<OptSpec> kModel = {
    {"model", "linear-affine", "linear-affine (b = theta_0 x + theta_1, a = 1) or driftless"},
    {"theta_star", "-1,1", "true parameter used for simulation"},
    {"x0", "0", "initial value"},
    {"box_half_width", "10", "parameter box [-w, w]^d"},
};

const std::vector<OptSpec> kEstimator = {
    {"weight", "identity", "identity or inverse-diffusion"},
    {"lambda", "1e-12", "regularizer of a a^T for inverse-diffusion"},
    {"minimizer", "closed-form", "closed-form or nelder-mead"},
    {"sampling", "left", "sample representing each cell: left (X_{jh}) or right (X_{(j+1)h})"},
};

struct Command {
  const char* name;
  const char* description;
  std::vector<OptSpec> options;
};

std::vector<OptSpec> join(std::initializer_list<std::vector<OptSpec>> parts) {
  std::vector<OptSpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::vector<Command>& commands() {
  static const std::vector<Command> table = {
      {"simulate", "simulate X and the oracle Z on a fine grid; writes t,x_1..,z_1..",
       join({{{"alpha", "0.8", "kernel exponent in (1/2, 1)"},
              {"T", "1", "horizon"},
              {"h", "1e-2", "observation step"},
              {"n_fine_per_h", "1", "fine steps per observation step"},
              {"epsilon", "1/100", "noise level in [0, 1]"}},
             kModel})},
      {"invert", "reconstruct Z^h on the block grid from observations; writes t,z_1..",
       {{"input", "", "observation CSV (t,x_1..; z_ columns ignored)"},
        {"alpha", "0.8", "kernel exponent"},
        {"k", "1", "block length Delta = k h"},
        {"stride", "1", "keep every stride-th input row"},
        {"sampling", "left", "left or right"}}},
      {"estimate", "estimate theta from observations; writes theta_1..,contrast,n_blocks,converged,method",
       join({{{"input", "", "observation CSV"},
              {"alpha", "0.8", "kernel exponent"},
              {"k", "1", "block length Delta = k h"},
              {"stride", "1", "keep every stride-th input row"}},
             kModel, kEstimator})},
      {"mc-table", "Monte Carlo table of means and rescaled std over (epsilon, k)",
       join({{{"alpha", "0.8", "kernel exponent"},
              {"T", "1", "horizon"},
              {"h", "1e-2", "observation step"},
              {"epsilon_list", "1/10,1/20,1/100", "noise levels (columns)"},
              {"k_list", "20,10,5,2,1", "block lengths (rows)"},
              {"n_rep", "1000", "replications per cell"},
              {"n_fine_per_h", "1", "fine steps per observation step"},
              {"format", "markdown", "markdown or csv"}},
             kModel, kEstimator})},
      {"rate-recon", "slope of log E|Z^h_T - Z_T| against log h; writes h,mean_abs_error,slope",
       join({{{"alpha", "0.8", "kernel exponent"},
              {"T", "1", "horizon"},
              {"h_list", "1/64,1/128,1/256,1/512,1/1024,1/2048", "geometric list of steps (at least 5)"},
              {"epsilon", "1", "noise level"},
              {"n_rep", "200", "replications"},
              {"sampling", "left", "left or right"}},
             kModel})},
      {"rate-est", "slope of log RMSE(theta_hat) against log epsilon; writes epsilon,k,rmse,slope",
       join({{{"alpha", "0.8", "kernel exponent"},
              {"T", "10", "horizon"},
              {"h", "1e-2", "observation step"},
              {"epsilon_list", "1/10,1/20,1/100", "noise levels (at least 3)"},
              {"k_list", "10,5,1", "block length paired with each epsilon"},
              {"n_rep", "1000", "replications per epsilon"},
              {"n_fine_per_h", "1", "fine steps per observation step"}},
             kModel, kEstimator})},
      {"kernel-check", "integral bounds of g_h; writes h,l1,l2,l1_over_h_alpha,l2_over_h",
       {{"alpha", "0.8", "kernel exponent"},
        {"t", "1", "evaluation time"},
        {"h_min", "1e-3", "smallest step; steps are 2^-j from h_max down to h_min"},
        {"h_max", "1/16", "largest step"},
        {"n_quad", "20000", "quadrature nodes for the bounds"}}},
  };
  return table;
}

std::string flag_of(const std::string& key) {
  std::string f = key;
  for (auto& c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

// Typed access to the resolved string values of one invocation.
class Values {
 public:
  std::map<std::string, std::string> raw;

  const std::string& str(const std::string& key) const { return raw.at(key); }
  double real(const std::string& key) const { return parse_real(str(key), key); }
  std::size_t count(const std::string& key) const { return parse_count(str(key), key); }
  std::uint64_t u64(const std::string& key) const { return parse_u64(str(key), key); }
  std::vector<double> reals(const std::string& key) const { return parse_real_list(str(key), key); }
  std::vector<std::size_t> counts(const std::string& key) const { return parse_count_list(str(key), key); }
  unsigned threads() const {
    const std::size_t t = count("threads");
    if (t > 4096) throw ConfigError("threads must be at most 4096");
    return static_cast<unsigned>(t);
  }
};

std::string choice(const Values& v, const std::string& key, std::initializer_list<const char*> allowed) {
  const std::string& s = v.str(key);
  std::string list;
  for (const char* a : allowed) {
    if (s == a) return s;
    list += std::string(list.empty() ? "" : ", ") + a;
  }
  throw ConfigError("value for '" + key + "' must be one of " + list + ": '" + s + "'");
}

Sampling sampling_of(const Values& v) {
  return choice(v, "sampling", {"left", "right"}) == "right" ? Sampling::Right : Sampling::Left;
}

WeightSpec weight_of(const Values& v) {
  WeightSpec w;
  w.kind = choice(v, "weight", {"identity", "inverse-diffusion"}) == "identity" ? WeightKind::Identity
                                                                                 : WeightKind::InverseDiffusion;
  w.lambda = v.real("lambda");
  return w;
}

MinimizerKind minimizer_of(const Values& v) {
  return choice(v, "minimizer", {"closed-form", "nelder-mead"}) == "closed-form" ? MinimizerKind::ClosedFormLinear
                                                                                 : MinimizerKind::NelderMead;
}

// Model keys and, when present, estimator keys, mapped onto an ExperimentGrid.
ExperimentGrid grid_of(const Values& v) {
  ExperimentGrid g;
  g.alpha = v.real("alpha");
  g.model = choice(v, "model", {"linear-affine", "driftless"});
  g.theta_star = v.reals("theta_star");
  g.x0 = v.real("x0");
  g.box_half_width = v.real("box_half_width");
  g.master_seed = v.u64("seed");
  if (v.raw.count("T")) g.T = v.real("T");
  if (v.raw.count("h")) g.h = v.real("h");
  if (v.raw.count("n_fine_per_h")) g.n_fine_per_h = v.count("n_fine_per_h");
  if (v.raw.count("n_rep")) g.n_rep = v.count("n_rep");
  if (v.raw.count("epsilon_list")) g.epsilon_list = v.reals("epsilon_list");
  if (v.raw.count("k_list")) g.k_list = v.counts("k_list");
  if (v.raw.count("weight")) {
    g.weight = weight_of(v);
    g.minimizer = minimizer_of(v);
  }
  if (v.raw.count("sampling")) g.sampling = sampling_of(v);
  return g;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void log_resolved(std::ostream& err, const std::string& command, const Values& v,
                  const std::vector<std::pair<std::string, std::string>>& derived) {
  err << "# roughvol " << command << '\n';
  for (const auto& [key, value] : v.raw) err << "#   " << key << " = " << value << '\n';
  for (const auto& [key, value] : derived) err << "#   (derived) " << key << " = " << value << '\n';
}

int run_simulate(const Values& v, std::ostream& out, std::ostream& err) {
  const ExperimentGrid g = grid_of(v);
  const Model<double> model = g.build_model();
  SimConfig<double> cfg;
  cfg.epsilon = v.real("epsilon");
  cfg.alpha = g.alpha;
  if (!(g.h > 0) || !(g.h <= g.T)) throw DomainError("h must lie in (0, T]");
  if (g.n_fine_per_h < 1) throw DomainError("n_fine_per_h must be at least 1");
  cfg.n_fine = g.n_obs() * g.n_fine_per_h;
  cfg.T = static_cast<double>(g.n_obs()) * g.h;
  cfg.seed = g.master_seed;
  [[maybe_unused]] const KernelParams<double> checked(cfg.alpha);
  cfg.validate();
  log_resolved(err, "simulate", v, {{"n_fine", std::to_string(cfg.n_fine)}, {"delta", num(cfg.delta())}});
  write_path_csv(out, simulate(model, cfg));
  return 0;
}

SampledObservation<double> load_observation(const Values& v) {
  const std::string& path = v.str("input");
  if (path.empty()) throw ConfigError("--input is required");
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return read_observation_csv(in, path, v.count("stride"));
}

int run_invert(const Values& v, std::ostream& out, std::ostream& err) {
  const KernelParams<double> p(v.real("alpha"));
  const std::size_t k = v.count("k");
  const Sampling sampling = sampling_of(v);
  const auto obs = load_observation(v);
  const auto recon = invert(obs, p, k, sampling);
  log_resolved(err, "invert", v,
               {{"h", num(obs.h)}, {"n", std::to_string(obs.n())}, {"Delta", num(recon.delta)},
                {"N", std::to_string(recon.n_blocks())}});
  write_reconstruction_csv(out, recon);
  return 0;
}

int run_estimate(const Values& v, std::ostream& out, std::ostream& err) {
  const KernelParams<double> p(v.real("alpha"));
  ExperimentGrid g = grid_of(v);
  const std::size_t k = v.count("k");
  const auto obs = load_observation(v);
  g.x0 = obs.x0(0);
  Model<double> model = g.build_model();
  if (model.dim_x != obs.dim()) throw InputError("observation dimension does not match the model");
  model.x0 = obs.x0;
  const auto recon = invert(obs, p, k, g.sampling);
  const auto data = make_estimation_data(obs, recon);
  ContrastConfig cfg;
  cfg.k = k;
  cfg.weight = g.weight;
  cfg.minimizer = g.minimizer;
  log_resolved(err, "estimate", v,
               {{"h", num(obs.h)}, {"n", std::to_string(obs.n())}, {"Delta", num(recon.delta)},
                {"N", std::to_string(recon.n_blocks())}});
  write_estimation_csv(out, estimate(data, model, cfg));
  return 0;
}

int run_mc_table(const Values& v, std::ostream& out, std::ostream& err) {
  const ExperimentGrid g = grid_of(v);
  const std::string format = choice(v, "format", {"markdown", "csv"});
  const unsigned threads = v.threads();
  g.validate();
  std::vector<std::pair<std::string, std::string>> derived{
      {"n_obs", std::to_string(g.n_obs())}, {"n_fine", std::to_string(g.n_obs() * g.n_fine_per_h)}};
  for (std::size_t k : g.k_list) {
    derived.emplace_back("Delta(k=" + std::to_string(k) + ")", num(static_cast<double>(k) * g.h));
    derived.emplace_back("N(k=" + std::to_string(k) + ")", std::to_string(g.n_obs() / k));
  }
  log_resolved(err, "mc-table", v, derived);
  const std::size_t total = g.k_list.size() * g.epsilon_list.size();
  std::size_t done = 0;
  const auto cells = run_table(g, threads, run_pipeline, [&](const CellStats& c) {
    err << "cell " << ++done << '/' << total << ": epsilon=" << c.epsilon << " k=" << c.k << " replications "
        << c.n_effective << '/' << c.n_rep << (c.accepted() ? "" : " (below 99%)") << '\n';
  });
  out << emit_table(g, cells, format == "csv" ? TableFormat::Csv : TableFormat::Markdown);
  return 0;
}

int run_rate_recon(const Values& v, std::ostream& out, std::ostream& err) {
  const ExperimentGrid g = grid_of(v);
  RateStudy study;
  study.alpha = g.alpha;
  study.T = v.real("T");
  study.h_list = v.reals("h_list");
  study.epsilon = v.real("epsilon");
  study.n_rep = v.count("n_rep");
  study.seed = g.master_seed;
  study.sampling = g.sampling;
  const unsigned threads = v.threads();
  [[maybe_unused]] const KernelParams<double> checked(study.alpha);
  if (!(study.epsilon >= 0) || !(study.epsilon <= 1)) throw DomainError("epsilon must lie in [0,1]");
  double h_min = study.h_list.front();
  for (double h : study.h_list) h_min = std::min(h_min, h);
  log_resolved(err, "rate-recon", v, {{"delta", num(h_min / 4)}, {"n_fine", num(std::round(study.T / (h_min / 4)))}});
  const auto res = rate_reconstruction(g.build_model(), study, threads);
  out << "h,mean_abs_error,slope\n";
  for (std::size_t i = 0; i < res.x.size(); ++i) out << num(res.x[i]) << ',' << num(res.y[i]) << ',' << num(res.slope) << '\n';
  err << "slope = " << res.slope << '\n';
  return 0;
}

int run_rate_est(const Values& v, std::ostream& out, std::ostream& err) {
  const ExperimentGrid g = grid_of(v);
  const unsigned threads = v.threads();
  std::vector<std::pair<std::string, std::string>> derived{{"n_obs", std::to_string(g.n_obs())}};
  for (std::size_t k : g.k_list) derived.emplace_back("Delta(k=" + std::to_string(k) + ")", num(static_cast<double>(k) * g.h));
  log_resolved(err, "rate-est", v, derived);
  const auto res = rate_estimator(g, threads);
  out << "epsilon,k,rmse,slope\n";
  for (std::size_t i = 0; i < res.x.size(); ++i) {
    out << num(res.x[i]) << ',' << res.k[i] << ',' << num(res.y[i]) << ',' << num(res.slope) << '\n';
  }
  err << "slope = " << res.slope << '\n';
  return 0;
}

int run_kernel_check(const Values& v, std::ostream& out, std::ostream& err) {
  const KernelParams<double> p(v.real("alpha"));
  const double t = v.real("t");
  const double h_min = v.real("h_min");
  const double h_max = v.real("h_max");
  const std::size_t n_quad = v.count("n_quad");
  if (!(t > 0)) throw DomainError("t must be positive");
  if (!(h_min > 0) || !(h_max >= h_min) || !(h_max <= t)) throw DomainError("need 0 < h_min <= h_max <= t");
  std::vector<std::pair<std::string, std::string>> derived;
  derived.emplace_back("L*K(t) - 1", num(resolvent_convolution(t, p, 100000) - 1.0));
  log_resolved(err, "kernel-check", v, derived);
  out << "h,l1,l2,l1_over_h_alpha,l2_over_h\n";
  for (double h = h_max; h >= h_min * (1 - 1e-12); h /= 2) {
    const GridGeometry<double> geom(h, t);
    const auto b = integral_bounds(t, geom, p, n_quad);
    out << num(h) << ',' << num(b.l1) << ',' << num(b.l2) << ',' << num(b.l1 / std::pow(h, p.alpha())) << ','
        << num(b.l2 / h) << '\n';
  }
  return 0;
}

using Handler = int (*)(const Values&, std::ostream&, std::ostream&);

Handler handler_of(const std::string& name) {
  if (name == "simulate") return run_simulate;
  if (name == "invert") return run_invert;
  if (name == "estimate") return run_estimate;
  if (name == "mc-table") return run_mc_table;
  if (name == "rate-recon") return run_rate_recon;
  if (name == "rate-est") return run_rate_est;
  return run_kernel_check;
}

// --config is read before parsing so that explicit flags override file values.
std::string prescan_config(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return "";
}

const Command* prescan_command(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    for (const auto& c : commands()) {
      if (c.name == std::string(argv[i])) return &c;
    }
  }
  return nullptr;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Small-noise rough Volterra SDEs: simulation, inversion, drift estimation, Monte Carlo studies"};
  app.name("roughvol");
  // --h is the step size, so help is long-form only
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1, 1);
  app.fallthrough();

  Values values;
  std::string config_path;
  for (const auto& o : kGlobal) {
    values.raw[o.key] = o.value;
    app.add_option(flag_of(o.key), values.raw[o.key], o.help)->capture_default_str();
  }
  app.add_option("--config", config_path, "flat key = value file; explicit flags take precedence");

  std::map<std::string, std::map<std::string, std::string>> sub_values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.description);
    auto& vals = sub_values[c.name];
    for (const auto& o : c.options) {
      vals[o.key] = o.value;
      sub->add_option(flag_of(o.key), vals[o.key], o.help)->capture_default_str();
    }
    subs[c.name] = sub;
  }

  const Command* selected = prescan_command(argc, argv);
  try {
    const std::string pre_config = prescan_config(argc, argv);
    if (!pre_config.empty()) {
      const Config cfg = Config::load(pre_config);
      for (const auto& [key0, value] : cfg.entries()) {
        const std::string key = key0 == "master_seed" ? "seed" : key0;
        if (values.raw.count(key)) {
          values.raw[key] = value;
        } else if (selected && sub_values[selected->name].count(key)) {
          sub_values[selected->name][key] = value;
        } else {
          throw ConfigError(pre_config + ": unknown key '" + key0 + "'" +
                            (selected ? std::string(" for ") + selected->name : std::string()));
        }
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App* target = &app;
    for (auto* s : app.get_subcommands()) target = s;
    out << target->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    CLI::App* target = selected ? subs[selected->name] : &app;
    err << target->help();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  for (const auto& [key, value] : sub_values[name]) values.raw[key] = value;

  try {
    std::ofstream file;
    std::ostream* sink = &out;
    if (!values.raw["out"].empty()) {
      file.open(values.raw["out"]);
      if (!file) throw InputError("cannot open output file '" + values.raw["out"] + "'");
      sink = &file;
    }
    const int code = handler_of(name)(values, *sink, err);
    sink->flush();
    return code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace roughvol::cli
