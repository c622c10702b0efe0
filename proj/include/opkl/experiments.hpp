#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

#include "opkl/config.hpp"
#include "opkl/csv.hpp"
#include "opkl/datagen.hpp"
#include "opkl/encdec.hpp"
#include "opkl/greens.hpp"
#include "opkl/rates.hpp"
#include "opkl/spectral.hpp"

namespace opkl {

/// Worker count: OPKL_THREADS if set, else hardware concurrency.
[[nodiscard]] inline unsigned worker_count() {
  if (const char* env = std::getenv("OPKL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

/// Run fn(i) for i in [0, n) on a bounded pool.  Results must be written to
/// preallocated slots so the merge order is independent of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Flat-key summary record written next to the data files.
class Summary {
public:
  void set(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }
  void set(const std::string& key, double value) { rows_.emplace_back(key, format_double(value)); }
  void set(const std::string& key, bool value) { rows_.emplace_back(key, value ? "true" : "false"); }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text();
  }

  [[nodiscard]] std::string text() const {
    std::string s;
    for (const auto& [k, v] : rows_) {
      s += k;
      s += " = ";
      s += v;
      s += '\n';
    }
    return s;
  }

private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

namespace detail {

inline ScalarKernelSpec kernel_from_config(const Config& cfg, const std::string& prefix) {
  ScalarKernelSpec k;
  k.family = kernel_family_from_string(cfg.get_string(prefix + ".family", "gaussian"));
  k.lengthscale = cfg.get_double(prefix + ".lengthscale", 1.0);
  k.amplitude = cfg.get_double(prefix + ".amplitude", 1.0);
  k.validate();
  return k;
}

inline StepSchedule schedule_from_config(const Config& cfg, std::size_t horizon) {
  const std::string mode = cfg.get_string("schedule.mode", "online");
  const double eta = cfg.get_double("schedule.eta");
  const double theta = cfg.get_double("schedule.theta");
  if (mode == "online") return StepSchedule::online(eta, theta);
  if (mode == "finite") return StepSchedule::finite_horizon(eta, theta, horizon);
  throw config_error("schedule.mode must be online or finite");
}

}  // namespace detail

struct ExperimentOutcome {
  bool pass = true;
  Summary summary;
};

/**
 * Rate study on the diagonal testbed: run trials across seeds, record exact
 * errors at the horizon grid, fit the log-log slope of the mean error, and
 * compare against the guaranteed exponent.
 */
inline ExperimentOutcome run_spectral_rate(const Config& cfg, const std::string& outdir) {
  const int n_modes = static_cast<int>(cfg.get_int("model.n_modes", 200));
  const int m = static_cast<int>(cfg.get_int("model.m", 1));
  const double s_eff = cfg.get_double("model.s_eff");
  const double r = cfg.get_double("model.r");
  const double sigma = cfg.get_double("model.sigma", 0.0);
  const std::uint64_t model_seed = cfg.get_int("model.seed", 12345);
  const int n_seeds = static_cast<int>(cfg.get_int("seeds", 10));
  const std::uint64_t seed0 = cfg.get_int("seed0", 1);
  const RateRegime regime = rate_regime_from_string(cfg.get_string("rate.regime", "prediction"));
  const double beta = cfg.get_double("rate.beta", 0.5);
  const double tolerance = cfg.get_double("rate.tolerance", 0.15);
  const std::string mode_str = cfg.get_string("schedule.mode", "online");
  const double eta = cfg.get_double("schedule.eta");
  const double theta = cfg.get_double("schedule.theta");

  std::vector<long> t_grid = cfg.get_int_list("t_grid");
  std::vector<std::size_t> ts(t_grid.begin(), t_grid.end());
  std::sort(ts.begin(), ts.end());

  const SpectralModel model = build_model(n_modes, m, s_eff, r, sigma, model_seed);

  // The testbed spectrum n^(-1/s_eff) has finite capacity trace only for
  // exponents strictly above s_eff, so rates are quoted at a small margin.
  double s_quote = cfg.get_double("rate.s", std::min(s_eff + 0.05, 1.0));
  const ScheduleMode mode = (mode_str == "online") ? ScheduleMode::online
                                                   : ScheduleMode::finite_horizon;
  if (regime == RateRegime::estimation && mode == ScheduleMode::online)
    s_quote = std::min(s_quote, 0.995);
  const double target = theoretical_exponent(regime, r, s_quote, theta, mode, beta);

  // errors[seed][checkpoint]
  std::vector<std::vector<SpectralCheckpoint>> errors(n_seeds);
  parallel_for(n_seeds, [&](std::size_t i) {
    const std::uint64_t seed = seed0 + i;
    if (mode == ScheduleMode::online) {
      errors[i] = run_spectral(model, StepSchedule::online(eta, theta), ts, seed, beta);
    } else {
      std::vector<SpectralCheckpoint> rows;
      for (std::size_t T : ts) {
        auto cp = run_spectral(model, StepSchedule::finite_horizon(eta, theta, T), {T},
                               seed * 1000003ull + T, beta);
        rows.push_back(cp.front());
      }
      errors[i] = std::move(rows);
    }
  });

  std::filesystem::create_directories(outdir);
  CsvTable traj;
  traj.columns = {"trial", "t", "pred_err", "est_err", "misspec_err_beta"};
  for (int i = 0; i < n_seeds; ++i)
    for (const auto& cp : errors[i])
      traj.rows.push_back({static_cast<double>(i), static_cast<double>(cp.t), cp.errors.pred,
                           cp.errors.est, cp.errors.misspec});
  traj.write(outdir + "/trajectory.csv");

  auto pick = [&](const SpectralErrors& e) {
    switch (regime) {
      case RateRegime::prediction: return e.pred;
      case RateRegime::estimation: return e.est;
      case RateRegime::misspecified: return e.misspec;
    }
    return e.pred;
  };

  CsvTable mean_curve;
  mean_curve.columns = {"t", "mean_err", "stderr"};
  std::vector<std::pair<double, double>> fit_pts;
  for (std::size_t c = 0; c < ts.size(); ++c) {
    double mean = 0.0;
    for (int i = 0; i < n_seeds; ++i) mean += pick(errors[i][c].errors);
    mean /= n_seeds;
    double var = 0.0;
    for (int i = 0; i < n_seeds; ++i) {
      const double d = pick(errors[i][c].errors) - mean;
      var += d * d;
    }
    const double se = n_seeds > 1 ? std::sqrt(var / (n_seeds - 1) / n_seeds) : 0.0;
    mean_curve.rows.push_back({static_cast<double>(ts[c]), mean, se});
    fit_pts.emplace_back(static_cast<double>(ts[c]), mean);
  }
  mean_curve.write(outdir + "/mean_curve.csv");

  const double fit_tmin = cfg.get_double("fit.t_min", static_cast<double>(ts.front()));
  const double fit_tmax = cfg.get_double("fit.t_max", static_cast<double>(ts.back()));
  const double slope = fit_rate(fit_pts, fit_tmin, fit_tmax);
  const bool pass = std::abs(slope - target) <= tolerance;

  ExperimentOutcome out;
  out.pass = pass;
  out.summary.set("experiment", std::string("spectral-rate"));
  out.summary.set("config_hash", config_hash(cfg));
  out.summary.set("regime", to_string(regime));
  out.summary.set("mode", mode_str);
  out.summary.set("n_modes", static_cast<double>(n_modes));
  out.summary.set("m", static_cast<double>(m));
  out.summary.set("r", r);
  out.summary.set("s_eff", s_eff);
  out.summary.set("rate_s", s_quote);
  out.summary.set("sigma", sigma);
  out.summary.set("theta", theta);
  out.summary.set("eta", eta);
  if (regime == RateRegime::misspecified) out.summary.set("beta", beta);
  out.summary.set("seeds", static_cast<double>(n_seeds));
  out.summary.set("theoretical_exponent", target);
  out.summary.set("fitted_slope", slope);
  out.summary.set("tolerance", tolerance);
  out.summary.set("pass", pass);
  out.summary.write(outdir + "/summary.txt");
  return out;
}

/// Operator recovery study: learn the kernel of an integral operator from
/// input/output pairs and track the reconstruction against the known truth.
inline ExperimentOutcome run_greens_experiment(const Config& cfg, const std::string& outdir) {
  const int n = static_cast<int>(cfg.get_int("grid.n", 65));
  const Grid1D grid = Grid1D::uniform(n, 0.0, 1.0);
  DatasetSpec dspec;
  dspec.forward.kind = ForwardKind::poisson;
  dspec.gp.tau = cfg.get_double("gp.tau", 3.0);
  dspec.gp.alpha = cfg.get_double("gp.alpha", 2.0);
  dspec.gp.n_modes = static_cast<int>(cfg.get_int("gp.n_modes", 16));
  dspec.noise_sigma = cfg.get_double("noise.sigma", 0.0);
  dspec.count = static_cast<int>(cfg.get_int("data.count"));
  dspec.seed = cfg.get_int("data.seed", 7);
  const FunctionDataset data = make_dataset(dspec, grid);

  const ScalarKernelSpec k1 = detail::kernel_from_config(cfg, "kernel.k1");
  const ScalarKernelSpec k2 = detail::kernel_from_config(cfg, "kernel.k2");
  const SeparableGreenKernel kernel = SeparableGreenKernel::make(k1, k2, grid, grid);

  const Dataset<SeparableGreenKernel> train = data.split(data.train_idx);
  const Dataset<SeparableGreenKernel> heldout = data.split(data.test_idx);
  const StepSchedule sched = detail::schedule_from_config(cfg, train.size());
  const std::size_t metrics_every = cfg.get_int("metrics_every", 100);
  const Eigen::MatrixXd truth = poisson_green_oracle(grid);

  const GreenRunResult rr = run_green(train, kernel, sched, metrics_every, &heldout, &truth);

  std::filesystem::create_directories(outdir);
  {
    std::ofstream out(outdir + "/trajectory.csv");
    out << "# gridY=" << n << " gridX=" << n << " domain=[0,1]\n";
    out << "trial,t,train_res,pred_err,green_rel_err\n";
    for (const auto& row : rr.trajectory)
      out << 0 << ',' << row.t << ',' << format_double(row.train_residual) << ','
          << format_double(row.pred_err) << ',' << format_double(row.green_rel_err) << '\n';
  }
  write_green_csv(rr.estimate.matrix(), grid, grid, outdir + "/green_final.csv");

  const auto& first = rr.trajectory.front();
  const auto& last = rr.trajectory.back();
  ExperimentOutcome out;
  out.summary.set("experiment", std::string("greens"));
  out.summary.set("config_hash", config_hash(cfg));
  out.summary.set("steps", static_cast<double>(rr.estimate.steps()));
  out.summary.set("first_pred_err", first.pred_err);
  out.summary.set("final_pred_err", last.pred_err);
  out.summary.set("final_green_rel_err", last.green_rel_err);
  out.summary.write(outdir + "/summary.txt");
  return out;
}

/// Encode-reduce-learn-decode study on a function-to-function task.
inline ExperimentOutcome run_encdec_experiment(const Config& cfg, const std::string& outdir) {
  const int n = static_cast<int>(cfg.get_int("grid.n", 65));
  const Grid1D grid = Grid1D::uniform(n, 0.0, 1.0);
  DatasetSpec dspec;
  const std::string fwd = cfg.get_string("forward", "heat");
  if (fwd == "heat") {
    dspec.forward.kind = ForwardKind::heat;
    dspec.forward.nu = cfg.get_double("heat.nu", 0.025);
    dspec.forward.t_end = cfg.get_double("heat.t_end", 1.0);
  } else if (fwd == "poisson") {
    dspec.forward.kind = ForwardKind::poisson;
  } else {
    throw config_error("forward must be heat or poisson");
  }
  dspec.gp.tau = cfg.get_double("gp.tau", 3.0);
  dspec.gp.alpha = cfg.get_double("gp.alpha", 2.0);
  dspec.gp.n_modes = static_cast<int>(cfg.get_int("gp.n_modes", 16));
  dspec.noise_sigma = cfg.get_double("noise.sigma", 0.0);
  dspec.count = static_cast<int>(cfg.get_int("data.count"));
  dspec.seed = cfg.get_int("data.seed", 7);
  const FunctionDataset data = make_dataset(dspec, grid);

  ReductionSpec red;
  const std::string kind = cfg.get_string("encdec.reduction", "points");
  if (kind == "points") {
    red.kind = ReductionKind::points;
    red.measurement =
        MeasurementSpec::uniform(static_cast<int>(cfg.get_int("encdec.points", 12)), 0.0, 1.0);
    red.lift_kernel.family =
        kernel_family_from_string(cfg.get_string("encdec.lift_family", "gaussian"));
    red.lift_kernel.lengthscale = cfg.get_double("encdec.lift_lengthscale", 0.15);
    red.jitter = cfg.get_double("encdec.jitter", 1e-10);
  } else if (kind == "pca") {
    red.kind = ReductionKind::pca;
    red.p = static_cast<int>(cfg.get_int("encdec.p", 8));
  } else {
    throw config_error("encdec.reduction must be points or pca");
  }

  const ScalarKernelSpec sgd_kernel = detail::kernel_from_config(cfg, "kernel");
  const std::size_t max_steps = cfg.get_int("T", 0);
  const StepSchedule sched =
      detail::schedule_from_config(cfg, max_steps ? max_steps : data.train_idx.size());
  const std::size_t metrics_every = cfg.get_int("metrics_every", 100);

  const EncDecResult rr =
      encdec_run(data, red, red, sgd_kernel, sched, metrics_every, max_steps);

  std::filesystem::create_directories(outdir);
  CsvTable traj;
  traj.columns = {"trial", "t", "reduced_err", "full_rel_err"};
  for (const auto& row : rr.trajectory)
    traj.rows.push_back({0.0, static_cast<double>(row.t), row.reduced_err, row.full_rel_err});
  traj.write(outdir + "/trajectory.csv");

  ExperimentOutcome out;
  out.summary.set("experiment", std::string("encdec"));
  out.summary.set("config_hash", config_hash(cfg));
  out.summary.set("first_full_rel_err", rr.trajectory.front().full_rel_err);
  out.summary.set("final_full_rel_err", rr.trajectory.back().full_rel_err);
  out.summary.write(outdir + "/summary.txt");
  return out;
}

/// Mean of a named column grouped by t, slope of the log-log fit in a window.
/// Rows from all trials are pooled by t before fitting.
[[nodiscard]] inline double csv_slope(const std::string& path, double t_min, double t_max,
                                      const std::string& column) {
  const CsvTable t = CsvTable::read(path);
  const int tcol = t.column_index("t");
  const int vcol = t.column_index(column);
  if (tcol < 0) throw std::runtime_error(path + ": no t column");
  if (vcol < 0) throw std::runtime_error(path + ": no column named " + column);
  std::map<double, std::pair<double, int>> groups;
  for (const auto& row : t.rows) {
    auto& g = groups[row[tcol]];
    g.first += row[vcol];
    g.second += 1;
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& [tt, g] : groups) pts.emplace_back(tt, g.first / g.second);
  return fit_rate(pts, t_min, t_max);
}

// ---------------------------------------------------------------------------
// Invariant battery behind `opkl validate`.

struct ValidationCheck {
  std::string name;
  bool pass;
  std::string detail;
};

[[nodiscard]] inline std::vector<ValidationCheck> run_validation_suite() {
  std::vector<ValidationCheck> checks;
  auto add = [&](const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass, detail});
  };
  char buf[160];

  {  // quadrature sanity on a smooth periodic integrand
    const Grid1D g = Grid1D::uniform(257, 0.0, 1.0);
    const GridFn s = GridFn::sample(g, [](double x) { return std::sin(2.0 * M_PI * x); });
    const double v = inner(s, s);
    std::snprintf(buf, sizeof(buf), "inner(sin,sin)=%.12g", v);
    add("quadrature", std::abs(v - 0.5) < 1e-8, buf);
  }
  {  // gram positive semidefiniteness
    Rng rng(11);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 12; ++i) {
      Eigen::VectorXd p(2);
      p << rng.uniform(), rng.uniform();
      pts.push_back(p);
    }
    double worst = 0.0;
    for (KernelFamily fam : {KernelFamily::gaussian, KernelFamily::matern12,
                             KernelFamily::matern32, KernelFamily::matern52,
                             KernelFamily::inverse_multiquadric}) {
      ScalarKernelSpec k{fam, 0.4, 1.0};
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram(k, pts));
      worst = std::min(worst, es.eigenvalues().minCoeff());
    }
    std::snprintf(buf, sizeof(buf), "min gram eigenvalue %.3g", worst);
    add("gram-psd", worst > -1e-10, buf);
  }
  {  // operator kernel symmetry and positivity
    Rng rng(13);
    const Grid1D g = Grid1D::uniform(33, 0.0, 1.0);
    const auto k = SeparableGreenKernel::make({KernelFamily::gaussian, 0.25, 1.0},
                                              {KernelFamily::matern32, 0.3, 1.0}, g, g);
    std::vector<GridFn> xs, ys;
    for (int i = 0; i < 4; ++i) {
      xs.push_back(GridFn::sample(g, [&](double x) { return std::sin(2 * M_PI * (i + 1) * x) + rng.normal() * 0.1; }));
      ys.push_back(GridFn::sample(g, [&](double x) { return std::cos(2 * M_PI * (i + 1) * x) + rng.normal() * 0.1; }));
    }
    double sym = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double a = inner(k.apply(xs[i], xs[j], ys[j]), ys[i]);
        const double b = inner(ys[j], k.apply(xs[j], xs[i], ys[i]));
        sym = std::max(sym, std::abs(a - b) / std::max(1.0, std::abs(a)));
      }
    const double form = psd_quadratic_form(k, xs, ys);
    std::snprintf(buf, sizeof(buf), "hermitian dev %.3g, quadratic form %.6g", sym, form);
    add("operator-kernel", sym < 1e-10 && form > -1e-8, buf);
  }
  {  // final-iterate representation identity
    const SpectralModel model = build_model(40, 2, 0.5, 0.5, 0.3, 21);
    double worst = 0.0;
    worst = std::max(worst, representation_check(model, StepSchedule::online(0.2, 0.6), 120, 1));
    worst = std::max(worst,
                     representation_check(model, StepSchedule::finite_horizon(0.3, 0.5, 120), 120, 2));
    std::snprintf(buf, sizeof(buf), "max relative deviation %.3g", worst);
    add("representation", worst < 1e-8, buf);
  }
  {  // interpolation norm equivalence
    const SpectralModel model = build_model(80, 1, 0.5, 0.5, 0.0, 5);
    Rng rng(31);
    double worst = 0.0;
    const double c_ref = interp_constant(0.5);
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::MatrixXd f(model.n_modes, 1);
      for (int i = 0; i < model.n_modes; ++i) f(i, 0) = rng.normal() * std::pow(i + 1.0, -1.5);
      const double lo = std::sqrt(model.sigmas[model.n_modes - 1]) * 1e-4;
      const double nrm = interp_norm_via_kfunc(model, f, 0.5, {lo, 1e8, 4000});
      const double direct = (f.array().square().rowwise().sum() *
                             model.sigmas.array().pow(-0.5)).sum();
      worst = std::max(worst, std::abs(nrm * nrm / direct - c_ref) / c_ref);
    }
    std::snprintf(buf, sizeof(buf), "relative constant error %.3g", worst);
    add("norm-equivalence", worst < 1e-3, buf);
  }
  {  // bias-variance upper bound
    const SpectralModel model = build_model(40, 2, 0.5, 0.75, 0.4, 33);
    const auto dc =
        decomposition_check(model, StepSchedule::finite_horizon(0.3, 0.5, 100), 100, 40, 0.5, 100);
    std::snprintf(buf, sizeof(buf), "slack %.4g, stderr %.4g", dc.slack, dc.stderr_);
    add("decomposition", dc.slack >= -2.0 * dc.stderr_, buf);
  }
  {  // contraction product majorant
    Rng rng(41);
    const SpectralModel model = build_model(60, 1, 0.5, 0.5, 0.0, 6);
    bool ok = true;
    double margin = 1e300;
    for (int trial = 0; trial < 25; ++trial) {
      const double eta1 = 0.05 + 0.9 * rng.uniform();
      const double theta = 0.1 + 0.8 * rng.uniform();
      const double beta = 2.0 * rng.uniform();
      const std::size_t T = 10 + rng.integer(400);
      std::vector<double> etas;
      for (std::size_t t = 1; t <= T; ++t) etas.push_back(eta1 * std::pow(t, -theta));
      const double lhs = contraction_product_norm(model.sigmas, etas, beta);
      const double rhs = contraction_product_bound(etas, beta);
      ok = ok && lhs <= rhs * (1.0 + 1e-12);
      margin = std::min(margin, rhs - lhs);
    }
    std::snprintf(buf, sizeof(buf), "min margin %.3g", margin);
    add("contraction-bound", ok, buf);
  }
  {  // step-sum majorants
    Rng rng(43);
    bool ok = true;
    for (int trial = 0; trial < 25; ++trial) {
      const double eta1 = 0.05 + 0.9 * rng.uniform();
      const double theta = 0.1 + 0.8 * rng.uniform();
      const double v = 0.2 + 2.8 * rng.uniform();
      const std::size_t T = 10 + rng.integer(2000);
      std::vector<double> etas;
      for (std::size_t t = 1; t <= T; ++t) etas.push_back(eta1 * std::pow(t, -theta));
      ok = ok && step_weighted_sum(etas, v) <=
                     step_weighted_sum_bound_decaying(eta1, theta, T, v, 16.0);
      std::vector<double> flat(T, eta1);
      if (eta1 * (T + 1) >= M_E)
        ok = ok && step_weighted_sum(flat, v) <= step_weighted_sum_bound_constant(eta1, T, v);
    }
    add("step-sum-bounds", ok, ok ? "all sampled schedules below the majorants" : "violated");
  }
  {  // reproducing property and section forms
    const Grid1D g = Grid1D::uniform(33, 0.0, 1.0);
    const auto k = SeparableGreenKernel::make({KernelFamily::gaussian, 0.2, 1.0},
                                              {KernelFamily::gaussian, 0.3, 1.0}, g, g);
    const double rep = reproducing_check(k, 10, 3);
    Rng rng(47);
    std::vector<GridFn> fs, gs;
    std::vector<double> alphas;
    for (int i = 0; i < 4; ++i) {
      fs.push_back(GridFn::sample(g, [&](double x) { return std::sin(2 * M_PI * (i + 1) * x); }));
      gs.push_back(GridFn::sample(g, [&](double x) { return std::cos(M_PI * (i + 1) * x); }));
      alphas.push_back(rng.normal());
    }
    const auto sf = section_form_check(k, fs, gs, alphas);
    const double iso = std::abs(sf.operator_form - sf.scalar_form) /
                       std::max(1.0, std::abs(sf.scalar_form));
    std::snprintf(buf, sizeof(buf), "reproducing %.3g, isometry %.3g, form %.6g", rep, iso,
                  sf.operator_form);
    add("reproducing", rep < 1e-8 && iso < 1e-10 && sf.operator_form > -1e-8, buf);
  }
  {  // coefficient iteration matches the generic kernel-expansion learner
    const SpectralModel model = build_model(30, 2, 0.5, 0.5, 0.3, 17);
    const StepSchedule sched = StepSchedule::online(0.2, 0.6);
    const std::size_t T = 60;
    Rng rng(23);
    SpectralIterate it = SpectralIterate::zero(model);
    const TruncatedMercerKernel k = TruncatedMercerKernel::from_model(model);
    IterateState<TruncatedMercerKernel> st;
    Eigen::VectorXd phi, eps(model.m);
    const double ns = model.noise_sigma / std::sqrt(static_cast<double>(model.m));
    for (std::size_t t = 1; t <= T; ++t) {
      const double x = rng.uniform();
      for (int j = 0; j < model.m; ++j) eps[j] = ns * rng.normal();
      model.basis(x, phi);
      Eigen::VectorXd y = model.target_coeffs.transpose() * phi + eps;
      sgd_step(st, k, sched, x, y);
      spectral_sgd_step(model, it, sched.step_size(t), x, eps, phi);
    }
    double worst = 0.0, scale = 0.0;
    Rng prng(29);
    for (int p = 0; p < 20; ++p) {
      const double x = prng.uniform();
      model.basis(x, phi);
      const Eigen::VectorXd a = it.b.transpose() * phi;
      const Eigen::VectorXd b = predict(st, k, x);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
      scale = std::max(scale, a.cwiseAbs().maxCoeff());
    }
    std::snprintf(buf, sizeof(buf), "max prediction deviation %.3g (scale %.3g)", worst, scale);
    add("cross-implementation", worst <= 1e-8 * std::max(scale, 1.0), buf);
  }
  {  // dataset determinism and noise calibration
    DatasetSpec spec;
    spec.forward.kind = ForwardKind::heat;
    spec.gp.n_modes = 8;
    spec.noise_sigma = 0.3;
    spec.count = 40;
    spec.seed = 99;
    const Grid1D g = Grid1D::uniform(65, 0.0, 1.0);
    const FunctionDataset a = make_dataset(spec, g);
    const FunctionDataset b = make_dataset(spec, g);
    bool identical = true;
    for (int i = 0; i < spec.count; ++i)
      identical = identical && (a.inputs[i].values == b.inputs[i].values) &&
                  (a.outputs[i].values == b.outputs[i].values);
    add("dataset-determinism", identical && a.train_idx == b.train_idx,
        identical ? "regeneration is bit identical" : "draws differ");
  }
  return checks;
}

}  // namespace opkl
