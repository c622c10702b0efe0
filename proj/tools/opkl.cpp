#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "opkl/opkl.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidateFail = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

int cmd_run(const std::string& config_path, std::string outdir) {
  const opkl::Config cfg = opkl::Config::load(config_path);
  if (outdir.empty()) outdir = cfg.get_string("output_dir", "out");
  const std::string experiment = cfg.get_string("experiment");
  opkl::ExperimentOutcome outcome;
  if (experiment == "spectral-rate") {
    outcome = opkl::run_spectral_rate(cfg, outdir);
  } else if (experiment == "greens") {
    outcome = opkl::run_greens_experiment(cfg, outdir);
  } else if (experiment == "encdec") {
    outcome = opkl::run_encdec_experiment(cfg, outdir);
  } else {
    throw opkl::config_error("unknown experiment: " + experiment);
  }
  std::cout << outcome.summary.text();
  std::cout << "wrote " << outdir << "/summary.txt\n";
  return kExitOk;
}

int cmd_validate() {
  const auto checks = opkl::run_validation_suite();
  bool all = true;
  for (const auto& c : checks) {
    std::printf("[%s] %-22s %s\n", c.pass ? " ok " : "FAIL", c.name.c_str(), c.detail.c_str());
    all = all && c.pass;
  }
  std::printf("%zu checks, %s\n", checks.size(), all ? "all passed" : "FAILURES present");
  return all ? kExitOk : kExitValidateFail;
}

int cmd_slopes(const std::string& csv_path, double t_min, double t_max, const std::string& col) {
  const double slope = opkl::csv_slope(csv_path, t_min, t_max, col);
  std::printf("slope %s\n", opkl::format_double(slope).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"operator kernel learning experiments"};
  app.require_subcommand(1);

  std::string config_path, outdir;
  auto* run = app.add_subcommand("run", "run an experiment described by a config file");
  run->add_option("config", config_path, "flat-key config file")->required();
  run->add_option("--out", outdir, "output directory (overrides output_dir)");

  auto* validate = app.add_subcommand("validate", "run the built-in invariant checks");

  std::string csv_path, column = "pred_err";
  double t_min = 0.0, t_max = 0.0;
  auto* slopes = app.add_subcommand("slopes", "fit a log-log slope from a trajectory CSV");
  slopes->add_option("csv", csv_path, "trajectory CSV with a t column")->required();
  slopes->add_option("--tmin", t_min, "window lower edge")->required();
  slopes->add_option("--tmax", t_max, "window upper edge")->required();
  slopes->add_option("--col", column, "value column (default pred_err)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, outdir);
    if (validate->parsed()) return cmd_validate();
    if (slopes->parsed()) return cmd_slopes(csv_path, t_min, t_max, column);
  } catch (const opkl::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const opkl::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericError;
  }
  return kExitOk;
}
