#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <Eigen/LU>

#include "experiments.hpp"
#include "isda/csv.hpp"
#include "isda/error.hpp"
#include "isda/feasibility.hpp"
#include "isda/filters.hpp"
#include "isda/model_error.hpp"
#include "isda/sampling.hpp"

namespace isda::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw DimensionError("not a number: '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw DimensionError("not an integer: '" + s + "'");
  return v;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(part));
      continue;
    }
    const int lo = to_int(part.substr(0, dots));
    const int hi = to_int(part.substr(dots + 2));
    if (hi < lo) throw DimensionError("empty range '" + part + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw DimensionError("empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(to_double(part));
  if (out.empty()) throw DimensionError("empty list");
  return out;
}

std::vector<std::string> read_config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DimensionError("cannot read config file '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DimensionError(path + ":" + std::to_string(lineno) +
                           ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) {
      throw DimensionError(path + ":" + std::to_string(lineno) + ": empty key");
    }
    if (key == "config") continue;
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

namespace {

struct Common {
  std::uint64_t seed = 1;
  std::string out = ".";
  unsigned threads = 1;
  std::string config;
};

struct Output {
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--config", c.config,
                  "key=value file; command-line flags override it");
}

void write_outputs(const Common& c, const Output& o, std::ostream& out) {
  const std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : o.files) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw DimensionError("cannot write " + (dir / name).string());
    f << content;
    if (!f) throw DimensionError("write failed for " + (dir / name).string());
  }
  out << o.summary;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- ess-scaling

struct EssArgs {
  double sigma2 = 2.0;
  std::string m_list = "1..15";
  std::size_t samples = 1000000;
  double m_eff = 1.0;
};

Output cmd_ess_scaling(const Common& c, const EssArgs& a) {
  if (!(a.sigma2 > 0.0)) throw DimensionError("--sigma2 must be > 0");
  const double sigma = std::sqrt(a.sigma2);
  const std::vector<int> ms = parse_int_list(a.m_list);
  const auto rows = gaussian_scaling_study(ms, sigma, a.m_eff);

  std::ostringstream csv_text;
  CsvWriter csv(csv_text);
  csv.header({"m", "required_M_formula", "empirical_R"});
  for (const auto& row : rows) {
    const double r = empirical_weight_ratio(
        row.m, sigma, a.samples,
        RngStream(c.seed, static_cast<std::uint64_t>(row.m)), c.threads);
    csv.row({static_cast<double>(row.m), row.required_M, r});
  }
  std::ostringstream s;
  s << "ess-scaling: " << rows.size() << " rows -> ess_scaling.csv\n";
  return {{{"ess_scaling.csv", csv_text.str()}}, s.str()};
}

// ---------------------------------------------------------------- gp-spectrum

struct GpArgs {
  double L = 0.1;
  std::string m_list = "32,64,128,256,512";
  std::string L_list = "0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.3";
  int m_fine = 1024;
  double eps = 0.05;
};

Output cmd_gp_spectrum(const Common&, const GpArgs& a) {
  std::vector<GPSweepRow> h_rows;
  for (int m : parse_int_list(a.m_list)) {
    h_rows.push_back(gp_sweep_row(GPFamily{a.L, m}, a.eps));
  }
  std::vector<GPSweepRow> l_rows;
  const auto ls = parse_double_list(a.L_list);
  for (double L : ls) {
    l_rows.push_back(gp_sweep_row(GPFamily{L, a.m_fine}, a.eps));
  }

  std::ostringstream h_csv, l_csv, forms_csv;
  write_gp_csv(h_csv, h_rows);
  write_gp_csv(l_csv, l_rows);
  CsvWriter forms(forms_csv);
  forms.header({"L", "quadrature", "antiderivative", "pi_L_outside",
                "pi_outside"});
  for (double L : ls) {
    const double quad = gp_operator_frobenius(L);
    const GPClosedForms cf = gp_closed_forms(L);
    forms.row({L, quad * quad, cf.exact, cf.pi_L_outside, cf.pi_outside});
  }
  std::ostringstream s;
  s << "gp-spectrum: " << h_rows.size() << " h rows -> gp_h_sweep.csv, "
    << l_rows.size() << " L rows -> gp_L_sweep.csv\n";
  return {{{"gp_h_sweep.csv", h_csv.str()},
           {"gp_L_sweep.csv", l_csv.str()},
           {"gp_closed_forms.csv", forms_csv.str()}},
          s.str()};
}

// ---------------------------------------------------------------- cones

struct ConeArgs {
  double q_min = 0.01, q_max = 10.0, r_min = 0.01, r_max = 10.0;
  std::size_t n = 50;
  double threshold = 1.0;
  bool empirical = false;
  std::string points = "1:1,0.01:1";
  std::string filters = "sir,optimal,implicit";
  int m = 100;
  std::size_t M = 100;
  std::size_t steps = 200;
  std::size_t seeds = 5;
};

Output cmd_cones(const Common& c, const ConeArgs& a) {
  const auto qs = log_grid(a.q_min, a.q_max, a.n);
  const auto rs = log_grid(a.r_min, a.r_max, a.n);
  const auto rows = cone_diagram(qs, rs, a.threshold);
  Output o;
  std::ostringstream grid;
  write_cone_csv(grid, rows);
  o.files.emplace_back("cones.csv", grid.str());
  std::ostringstream s;
  s << "cones: " << rows.size() << " grid points -> cones.csv\n";

  if (a.empirical) {
    std::ostringstream emp;
    CsvWriter csv(emp);
    csv.header({"filter", "q", "r", "median_m_eff"});
    FilterOptions fo;
    fo.threads = c.threads;
    for (const auto& point : split(a.points, ',')) {
      const auto qr = split(point, ':');
      if (qr.size() != 2) throw DimensionError("point must be q:r, got " + point);
      const double q = to_double(qr[0]);
      const double r = to_double(qr[1]);
      for (const auto& name : split(a.filters, ',')) {
        const FilterKind kind = parse_filter_kind(name);
        const CollapseRun run = empirical_collapse(kind, q, r, a.m, a.M,
                                                   a.steps, a.seeds, c.seed, fo);
        csv.row({to_string(kind)}, {q, r, run.median_m_eff});
        s << "  " << to_string(kind) << " q=" << q << " r=" << r
          << " median M_eff=" << run.median_m_eff << "\n";
      }
    }
    o.files.emplace_back("cones_empirical.csv", emp.str());
  }
  o.summary = s.str();
  return o;
}

// ---------------------------------------------------------------- filter-run

struct FilterArgs {
  std::string model = "linear";
  std::string filter = "implicit";
  int m = 1;
  double q = 1.0, r = 1.0, x0_var = 1.0;
  std::size_t M = 1000;
  std::size_t steps = 50;
  double resample_fraction = 0.5;
};

Output cmd_filter_run(const Common& c, const FilterArgs& a) {
  const FilterKind kind = parse_filter_kind(a.filter);
  std::optional<LinearSSM> lin;
  NonlinearSSM model;
  if (a.model == "linear") {
    lin = model_problem(a.m, a.q, a.r, a.x0_var);
    model = lin->as_nonlinear();
  } else if (a.model == "cubic") {
    if (kind == FilterKind::kalman || kind == FilterKind::optimal) {
      throw DimensionError(to_string(kind) + " filter needs the linear model");
    }
    model = experiments::cubic_model(a.q, a.r, a.x0_var);
  } else {
    throw DimensionError("unknown model '" + a.model + "' (linear|cubic)");
  }
  FilterOptions fo;
  fo.threads = c.threads;
  fo.resample_fraction = a.resample_fraction;
  const TwinExperiment twin = simulate_twin(model, a.steps, RngStream(c.seed, 1));
  const auto log = run_filter(kind, model, lin ? &*lin : nullptr, twin, a.M,
                              RngStream(c.seed, 2), fo);
  std::ostringstream csv;
  write_run_log_csv(csv, log);

  std::vector<double> meff;
  double se = 0.0;
  std::size_t count = 0;
  for (const auto& e : log) {
    meff.push_back(e.m_eff);
    se += (e.estimate - e.truth).squaredNorm();
    count += static_cast<std::size_t>(e.truth.size());
  }
  std::ostringstream s;
  s << "filter-run: " << to_string(kind) << " on " << a.model << ", "
    << log.size() << " steps, rmse=" << std::sqrt(se / std::max<std::size_t>(1, count))
    << ", median M_eff=" << median(meff) << " -> filter_run.csv\n";
  return {{{"filter_run.csv", csv.str()}}, s.str()};
}

// ---------------------------------------------------------------- l96-noise

struct L96Args {
  NoisePipelineConfig cfg;
  int component = 1;
  bool dump_z = false;
};

Output cmd_l96_noise(const Common& c, L96Args a) {
  a.cfg.seed = c.seed;
  a.cfg.component = a.component - 1;
  const NoisePipelineResult res = run_noise_pipeline(a.cfg);
  Output o;
  std::ostringstream acf;
  write_acf_csv(acf, res.series.acf);
  o.files.emplace_back("l96_acf.csv", acf.str());

  std::ostringstream ar;
  CsvWriter csv(ar);
  csv.header({"name", "value"});
  csv.row({"dt"}, {res.dt});
  csv.row({"z_mean"}, {res.z_mean});
  csv.row({"z_variance"}, {res.z_variance});
  csv.row({"max_abs_z"}, {res.max_abs_z});
  csv.row({"lags_outside_band"}, {static_cast<double>(res.lags_outside_band)});
  if (res.series.ar_fit) {
    const ArFit& fit = *res.series.ar_fit;
    csv.row({"ar_order"}, {static_cast<double>(fit.order)});
    csv.row({"innovation_variance"}, {fit.innovation_variance});
    for (Index i = 0; i < fit.coefficients.size(); ++i) {
      csv.row({"phi_" + std::to_string(i + 1)}, {fit.coefficients[i]});
    }
  }
  o.files.emplace_back("l96_ar.csv", ar.str());
  if (a.dump_z) {
    std::ostringstream z;
    write_discrepancy_csv(z, res.series);
    o.files.emplace_back("l96_z.csv", z.str());
  }
  std::ostringstream s;
  s << "l96-noise: N=" << res.series.z.size() << ", z_" << a.component
    << " mean=" << res.z_mean << ", lags outside band=" << res.lags_outside_band
    << ", AR order="
    << (res.series.ar_fit ? std::to_string(res.series.ar_fit->order) : "n/a")
    << " -> l96_acf.csv, l96_ar.csv\n";
  o.summary = s.str();
  return o;
}

// ---------------------------------------------------------------- posterior

struct PosteriorArgs {
  std::string problem = "nonlinear";
  std::size_t M = 10000;
  double noise_sd = 0.05;
  int n_obs = 10;
  double noise_var = 0.25;
};

Output cmd_posterior(const Common& c, const PosteriorArgs& a) {
  PosteriorProblem problem;
  Vector truth;
  std::optional<std::pair<Vector, Matrix>> conjugate;
  if (a.problem == "nonlinear") {
    auto demo = experiments::exponential_decay_demo(c.seed, a.noise_sd, a.n_obs);
    problem = demo.problem;
    truth = demo.theta_true;
  } else if (a.problem == "linear") {
    auto demo = experiments::linear_gaussian_demo(c.seed, a.noise_var);
    problem = demo.problem;
    truth = demo.theta_true;
    const Matrix prec = problem.prior.cov().matrix().inverse() +
                        demo.H.transpose() * demo.H / a.noise_var;
    const Matrix cov = prec.inverse();
    const Vector mean =
        cov * (demo.H.transpose() * problem.data / a.noise_var);
    conjugate.emplace(mean, cov);
  } else {
    throw DimensionError("unknown problem '" + a.problem + "' (nonlinear|linear)");
  }
  SamplerOptions so;
  so.threads = c.threads;
  const WeightedEnsemble e = sample_posterior(problem, a.M, RngStream(c.seed, 2), so);
  const EssReport rep = ess(e);
  const Vector mean = e.mean();
  const Matrix cov = e.covariance();
  const Index d = e.dim();

  std::ostringstream samples;
  {
    CsvWriter csv(samples);
    std::vector<std::string> names{"i"};
    for (Index k = 0; k < d; ++k) names.push_back("theta_" + std::to_string(k + 1));
    names.push_back("log_weight");
    names.push_back("weight");
    csv.header(names);
    const Vector lw = e.normalized_log_weights();
    std::vector<double> row(static_cast<std::size_t>(d) + 3);
    for (std::size_t i = 0; i < e.size(); ++i) {
      row[0] = static_cast<double>(i);
      for (Index k = 0; k < d; ++k) row[static_cast<std::size_t>(k) + 1] = e.sample(i)[k];
      row[static_cast<std::size_t>(d) + 1] = lw[static_cast<Index>(i)];
      row[static_cast<std::size_t>(d) + 2] = e.normalized_weights()[static_cast<Index>(i)];
      csv.row(row);
    }
  }
  std::ostringstream summary;
  {
    CsvWriter csv(summary);
    csv.header({"name", "value"});
    for (Index k = 0; k < d; ++k) {
      csv.row({"mean_" + std::to_string(k + 1)}, {mean[k]});
    }
    for (Index k = 0; k < d; ++k) {
      for (Index l = k; l < d; ++l) {
        csv.row({"cov_" + std::to_string(k + 1) + "_" + std::to_string(l + 1)},
                {cov(k, l)});
      }
    }
    for (Index k = 0; k < d; ++k) {
      csv.row({"theta_true_" + std::to_string(k + 1)}, {truth[k]});
    }
    if (conjugate) {
      for (Index k = 0; k < d; ++k) {
        csv.row({"conjugate_mean_" + std::to_string(k + 1)}, {conjugate->first[k]});
      }
      for (Index k = 0; k < d; ++k) {
        for (Index l = k; l < d; ++l) {
          csv.row({"conjugate_cov_" + std::to_string(k + 1) + "_" +
                   std::to_string(l + 1)},
                  {conjugate->second(k, l)});
        }
      }
    }
    csv.row({"m_eff"}, {rep.m_eff});
    csv.row({"ess_fraction"}, {rep.m_eff / static_cast<double>(rep.M)});
  }
  std::ostringstream s;
  s << "posterior: " << a.problem << ", M=" << e.size()
    << ", ESS/M=" << rep.m_eff / static_cast<double>(rep.M)
    << " -> posterior_samples.csv, posterior_summary.csv\n";
  return {{{"posterior_samples.csv", samples.str()},
           {"posterior_summary.csv", summary.str()}},
          s.str()};
}

// Inserts config-file arguments just after the subcommand name so that
// later command-line flags take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty() || args.empty()) return args;
  std::vector<std::string> out{args.front()};
  const auto extra = read_config_args(path);
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"isda: implicit sampling and data-assimilation experiments",
               "isda"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  Common common;
  std::function<Output()> action;

  EssArgs ess_args;
  auto* ess_cmd = app.add_subcommand("ess-scaling", "Weight variance growth with dimension");
  add_common(ess_cmd, common);
  ess_cmd->add_option("--sigma2", ess_args.sigma2, "Proposal variance")->capture_default_str();
  ess_cmd->add_option("--m", ess_args.m_list, "Dimensions, e.g. 1..15 or 1,2,4")->capture_default_str();
  ess_cmd->add_option("--samples", ess_args.samples, "Samples per empirical run")->capture_default_str();
  ess_cmd->add_option("--m-eff", ess_args.m_eff, "Target effective sample count")->capture_default_str();
  ess_cmd->callback([&] { action = [&] { return cmd_ess_scaling(common, ess_args); }; });

  GpArgs gp_args;
  auto* gp_cmd = app.add_subcommand("gp-spectrum", "GP covariance norms and effective dimension");
  add_common(gp_cmd, common);
  gp_cmd->add_option("--L", gp_args.L, "Correlation length for the h sweep")->capture_default_str();
  gp_cmd->add_option("--m-list", gp_args.m_list, "Grid sizes for the h sweep")->capture_default_str();
  gp_cmd->add_option("--L-list", gp_args.L_list, "Correlation lengths for the L sweep")->capture_default_str();
  gp_cmd->add_option("--m-fine", gp_args.m_fine, "Grid size for the L sweep")->capture_default_str();
  gp_cmd->add_option("--eps", gp_args.eps, "Energy fraction left out of eff_dim")->capture_default_str();
  gp_cmd->callback([&] { action = [&] { return cmd_gp_spectrum(common, gp_args); }; });

  ConeArgs cone_args;
  auto* cone_cmd = app.add_subcommand("cones", "Feasibility regions of the model problem");
  add_common(cone_cmd, common);
  cone_cmd->add_option("--q-min", cone_args.q_min)->capture_default_str();
  cone_cmd->add_option("--q-max", cone_args.q_max)->capture_default_str();
  cone_cmd->add_option("--r-min", cone_args.r_min)->capture_default_str();
  cone_cmd->add_option("--r-max", cone_args.r_max)->capture_default_str();
  cone_cmd->add_option("--n", cone_args.n, "Grid points per axis (log-spaced)")->capture_default_str();
  cone_cmd->add_option("--threshold", cone_args.threshold)->capture_default_str();
  cone_cmd->add_flag("--empirical", cone_args.empirical, "Run particle filters at --points");
  cone_cmd->add_option("--points", cone_args.points, "q:r pairs, comma separated")->capture_default_str();
  cone_cmd->add_option("--filters", cone_args.filters)->capture_default_str();
  cone_cmd->add_option("--m", cone_args.m, "State dimension of the empirical runs")->capture_default_str();
  cone_cmd->add_option("--M", cone_args.M, "Particles")->capture_default_str();
  cone_cmd->add_option("--steps", cone_args.steps)->capture_default_str();
  cone_cmd->add_option("--seeds", cone_args.seeds)->capture_default_str();
  cone_cmd->callback([&] { action = [&] { return cmd_cones(common, cone_args); }; });

  FilterArgs filter_args;
  auto* filter_cmd = app.add_subcommand("filter-run", "Twin experiment with one filter");
  add_common(filter_cmd, common);
  filter_cmd->add_option("--model", filter_args.model, "linear|cubic")->capture_default_str();
  filter_cmd->add_option("--filter", filter_args.filter, "kalman|sir|optimal|implicit")->capture_default_str();
  filter_cmd->add_option("--m", filter_args.m, "State dimension (linear model)")->capture_default_str();
  filter_cmd->add_option("--q", filter_args.q)->capture_default_str();
  filter_cmd->add_option("--r", filter_args.r)->capture_default_str();
  filter_cmd->add_option("--x0-var", filter_args.x0_var)->capture_default_str();
  filter_cmd->add_option("--M", filter_args.M, "Particles")->capture_default_str();
  filter_cmd->add_option("--steps", filter_args.steps)->capture_default_str();
  filter_cmd->add_option("--resample-fraction", filter_args.resample_fraction)->capture_default_str();
  filter_cmd->callback([&] { action = [&] { return cmd_filter_run(common, filter_args); }; });

  L96Args l96_args;
  auto* l96_cmd = app.add_subcommand("l96-noise", "Model-error sequence of two-scale Lorenz 96");
  add_common(l96_cmd, common);
  auto& mdl = l96_args.cfg.model;
  l96_cmd->add_option("--K", mdl.K)->capture_default_str();
  l96_cmd->add_option("--J", mdl.J)->capture_default_str();
  l96_cmd->add_option("--F", mdl.F)->capture_default_str();
  l96_cmd->add_option("--eps", mdl.eps)->capture_default_str();
  l96_cmd->add_option("--hx", mdl.hx)->capture_default_str();
  l96_cmd->add_option("--hy", mdl.hy)->capture_default_str();
  l96_cmd->add_option("--delta", l96_args.cfg.delta, "Snapshot spacing")->capture_default_str();
  l96_cmd->add_option("--snapshots", l96_args.cfg.snapshots)->capture_default_str();
  l96_cmd->add_option("--spinup", l96_args.cfg.spinup)->capture_default_str();
  l96_cmd->add_option("--max-lag", l96_args.cfg.max_lag)->capture_default_str();
  l96_cmd->add_option("--order-max", l96_args.cfg.order_max)->capture_default_str();
  l96_cmd->add_option("--component", l96_args.component, "1-based component for ACF/AR")->capture_default_str();
  l96_cmd->add_flag("--dump-z", l96_args.dump_z, "Also write l96_z.csv");
  l96_cmd->callback([&] { action = [&] { return cmd_l96_noise(common, l96_args); }; });

  PosteriorArgs post_args;
  auto* post_cmd = app.add_subcommand("posterior", "Implicit-sampling parameter estimation");
  add_common(post_cmd, common);
  post_cmd->add_option("--problem", post_args.problem, "nonlinear|linear")->capture_default_str();
  post_cmd->add_option("--M", post_args.M, "Samples")->capture_default_str();
  post_cmd->add_option("--noise-sd", post_args.noise_sd, "Noise SD (nonlinear)")->capture_default_str();
  post_cmd->add_option("--n-obs", post_args.n_obs, "Observation count (nonlinear)")->capture_default_str();
  post_cmd->add_option("--noise-var", post_args.noise_var, "Noise variance (linear)")->capture_default_str();
  post_cmd->callback([&] { action = [&] { return cmd_posterior(common, post_args); }; });

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    write_outputs(common, action(), out);
    return kOk;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace isda::cli
