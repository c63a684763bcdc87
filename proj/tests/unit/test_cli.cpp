#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isda_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

int run(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = isda::cli::run(args, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

// Every numeric field parses and is finite.
void expect_finite_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string f;
    while (std::getline(fields, f, ',')) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end != f.c_str() && *end == '\0') {
        EXPECT_TRUE(std::isfinite(v)) << line;
      }
      EXPECT_EQ(f.find("nan"), std::string::npos) << line;
    }
    ++rows;
  }
  EXPECT_GT(rows, 0);
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(ISDA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(CliLists, Parsing) {
  EXPECT_EQ(isda::cli::parse_int_list("1..4,7"), (std::vector<int>{1, 2, 3, 4, 7}));
  EXPECT_EQ(isda::cli::parse_double_list("0.5,2"), (std::vector<double>{0.5, 2.0}));
  EXPECT_THROW(isda::cli::parse_int_list("1..x"), std::invalid_argument);
}

TEST(CliConfig, ReadsKeyValueLines) {
  const fs::path d = fresh_dir("cfg_read");
  std::ofstream(d / "c.ini") << "# comment\n\nsigma2 = 3\n; other\nm=1..2\n";
  EXPECT_EQ(isda::cli::read_config_args((d / "c.ini").string()),
            (std::vector<std::string>{"--sigma2=3", "--m=1..2"}));
}

TEST(CliExitCodes, BinaryReportsUsageAndNumericalFailures) {
  const fs::path d = fresh_dir("exit");
  EXPECT_EQ(run_binary("ess-scaling --m 1..3 --samples 100 --out " + d.string()), 0);
  EXPECT_EQ(run_binary(""), 2);
  EXPECT_EQ(run_binary("no-such-command"), 2);
  EXPECT_EQ(run_binary("ess-scaling --bogus-flag 1"), 2);
  EXPECT_EQ(run_binary("ess-scaling --sigma2 0.4 --out " + d.string()), 2);
  EXPECT_EQ(run_binary("filter-run --model linear --filter sir --r 1e-320 --M 10 --steps 2 --out " + d.string()), 3);
  EXPECT_EQ(run_binary("--help"), 0);
}

TEST(EssScaling, FormulaRowsAndFlatCase) {
  const fs::path d = fresh_dir("ess");
  ASSERT_EQ(run({"ess-scaling", "--m", "0..3", "--samples", "2000", "--m-eff", "7", "--out", d.string()}), 0);
  const std::string csv = slurp(d / "ess_scaling.csv");
  EXPECT_EQ(first_line(csv), "m,required_M_formula,empirical_R");
  expect_finite_csv(csv);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, line.find(',', 2)), "0,7");

  const fs::path f = fresh_dir("ess_flat");
  ASSERT_EQ(run({"ess-scaling", "--sigma2", "1", "--m", "1,5,10", "--samples", "500", "--out", f.string()}), 0);
  std::istringstream flat(slurp(f / "ess_scaling.csv"));
  std::getline(flat, line);
  while (std::getline(flat, line)) {
    std::istringstream fields(line);
    std::string m, req, r;
    std::getline(fields, m, ',');
    std::getline(fields, req, ',');
    std::getline(fields, r, ',');
    EXPECT_DOUBLE_EQ(std::stod(req), 1.0) << line;
    EXPECT_DOUBLE_EQ(std::stod(r), 1.0) << line;
  }
}

TEST(CliConfig, FlagsOverrideConfigFile) {
  const fs::path d = fresh_dir("cfg_override");
  std::ofstream(d / "run.cfg") << "m = 1..9\nsamples = 100\nsigma2 = 3\n";
  ASSERT_EQ(run({"ess-scaling", "--config", (d / "run.cfg").string(), "--m", "2", "--out", d.string()}), 0);
  const std::string csv = slurp(d / "ess_scaling.csv");
  std::istringstream in(csv);
  std::string line;
  int rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) {
    EXPECT_EQ(line.substr(0, 2), "2,");
    ++rows;
  }
  EXPECT_EQ(rows, 1);
  // sigma2 = 3 came from the file: (3 / sqrt(5))^2 * 1.
  std::istringstream row(csv.substr(csv.find('\n') + 1));
  std::string m, req;
  std::getline(row, m, ',');
  std::getline(row, req, ',');
  EXPECT_NEAR(std::stod(req), 9.0 / 5.0, 1e-9);
}

TEST(Cli, OutputsIndependentOfThreadCount) {
  const std::vector<std::vector<std::string>> cmds = {
      {"ess-scaling", "--m", "1..4", "--samples", "3000"},
      {"filter-run", "--model", "cubic", "--filter", "implicit", "--M", "50", "--steps", "5"},
      {"posterior", "--problem", "nonlinear", "--M", "300"},
  };
  const char* files[] = {"ess_scaling.csv", "filter_run.csv", "posterior_samples.csv"};
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    const fs::path a = fresh_dir("threads_a" + std::to_string(i));
    const fs::path b = fresh_dir("threads_b" + std::to_string(i));
    auto ca = cmds[i], cb = cmds[i];
    ca.insert(ca.end(), {"--threads", "1", "--out", a.string()});
    cb.insert(cb.end(), {"--threads", "3", "--out", b.string()});
    ASSERT_EQ(run(ca), 0) << cmds[i][0];
    ASSERT_EQ(run(cb), 0) << cmds[i][0];
    EXPECT_EQ(slurp(a / files[i]), slurp(b / files[i])) << cmds[i][0];
    expect_finite_csv(slurp(a / files[i]));
  }
}

TEST(Cli, SubcommandHeaders) {
  const fs::path d = fresh_dir("headers");
  ASSERT_EQ(run({"cones", "--n", "5", "--out", d.string()}), 0);
  EXPECT_EQ(first_line(slurp(d / "cones.csv")), "q,r,feas_scalar,sir_scalar,opt_scalar,region");

  ASSERT_EQ(run({"gp-spectrum", "--m-list", "16,32", "--L-list", "0.2", "--m-fine", "32", "--out", d.string()}), 0);
  EXPECT_EQ(first_line(slurp(d / "gp_h_sweep.csv")), "L,h,frob_discrete,frob_operator,eff_dim,energy");
  EXPECT_EQ(first_line(slurp(d / "gp_L_sweep.csv")), "L,h,frob_discrete,frob_operator,eff_dim,energy");
  EXPECT_EQ(first_line(slurp(d / "gp_closed_forms.csv")),
            "L,quadrature,antiderivative,pi_L_outside,pi_outside");
  expect_finite_csv(slurp(d / "gp_L_sweep.csv"));

  ASSERT_EQ(run({"filter-run", "--model", "linear", "--m", "2", "--filter", "sir", "--M", "20", "--steps", "3", "--out", d.string()}), 0);
  EXPECT_EQ(first_line(slurp(d / "filter_run.csv")),
            "step,estimate_1,estimate_2,truth_1,truth_2,m_eff,resampled");

  ASSERT_EQ(run({"l96-noise", "--snapshots", "300", "--spinup", "0.5", "--max-lag", "10", "--order-max", "2", "--dump-z", "--out", d.string()}), 0);
  EXPECT_EQ(first_line(slurp(d / "l96_acf.csv")), "lag,acf");
  EXPECT_EQ(first_line(slurp(d / "l96_ar.csv")), "name,value");
  EXPECT_EQ(first_line(slurp(d / "l96_z.csv")).substr(0, 8), "n,z_1,z_");
  expect_finite_csv(slurp(d / "l96_acf.csv"));

  ASSERT_EQ(run({"posterior", "--problem", "linear", "--M", "200", "--out", d.string()}), 0);
  EXPECT_EQ(first_line(slurp(d / "posterior_samples.csv")), "i,theta_1,theta_2,log_weight,weight");
  EXPECT_EQ(first_line(slurp(d / "posterior_summary.csv")), "name,value");
}

TEST(Cli, UnwritableOutputDirectoryIsUsageError) {
  const fs::path d = fresh_dir("unwritable");
  std::ofstream(d / "file") << "x";
  EXPECT_EQ(run({"cones", "--n", "2", "--out", (d / "file" / "sub").string()}), 2);
}
