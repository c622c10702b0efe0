#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "opkl/greens.hpp"

using namespace opkl;

namespace {

GridFn bandlimited(const Grid1D& g, Rng& rng, int modes = 4) {
  GridFn f = GridFn::zero(g);
  for (int m = 1; m <= modes; ++m) {
    const double ac = rng.normal(), as = rng.normal();
    for (int i = 0; i < g.size(); ++i) {
      const double x = g.points()[i];
      f.values[i] += ac * std::cos(2.0 * M_PI * m * x) + as * std::sin(2.0 * M_PI * m * x);
    }
  }
  return f;
}

SeparableGreenKernel test_kernel(const Grid1D& g, double ell = 0.2) {
  const ScalarKernelSpec spec{KernelFamily::gaussian, ell, 1.0};
  return SeparableGreenKernel::make(spec, spec, g, g);
}

}  // namespace

TEST_CASE("hinge kernel oracle values", "[greens]") {
  const Grid1D grid = Grid1D::uniform(101, 0.0, 1.0);
  const Eigen::MatrixXd g = poisson_green_oracle(grid);
  // boundary rows and columns vanish
  REQUIRE(g.row(0).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(g.row(100).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(g.col(0).cwiseAbs().maxCoeff() == 0.0);
  // symmetry and closed-form spots
  REQUIRE((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(g(25, 75) == Catch::Approx(0.0625).epsilon(1e-15));
  REQUIRE(g(50, 50) == Catch::Approx(0.25).epsilon(1e-15));
  for (int i = 0; i < 101; i += 10) {
    const double x = grid.points()[i];
    REQUIRE(g(i, i) == Catch::Approx(x * (1.0 - x)).margin(1e-15));
  }
  REQUIRE_THROWS_AS(poisson_green_oracle(Grid1D::uniform(11, 0.0, 2.0)),
                    std::invalid_argument);
}

TEST_CASE("operator application solves the two-point problem", "[greens]") {
  // constant source: u(x) = x (1 - x) / 2; integrand is piecewise linear with
  // its kink on a node, so the quadrature is exact
  const Grid1D grid = Grid1D::uniform(65, 0.0, 1.0);
  const Eigen::MatrixXd g = poisson_green_oracle(grid);
  const GridFn one(grid, Eigen::VectorXd::Ones(65));
  const GridFn u = apply_green(g, grid, one);
  REQUIRE(u.values[32] == Catch::Approx(0.125).margin(1e-14));
  REQUIRE(u.values[0] == Catch::Approx(0.0).margin(1e-15));

  // sine source: u(x) = sin(pi x) / pi^2
  const Grid1D fine = Grid1D::uniform(1025, 0.0, 1.0);
  const Eigen::MatrixXd gf = poisson_green_oracle(fine);
  GridFn s = GridFn::zero(fine);
  for (int i = 0; i < 1025; ++i) s.values[i] = std::sin(M_PI * fine.points()[i]);
  const GridFn us = apply_green(gf, fine, s);
  REQUIRE(us.values[512] == Catch::Approx(0.10132118364233778).margin(1e-6));

  GridFn wrong = GridFn::zero(Grid1D::uniform(33, 0.0, 1.0));
  REQUIRE_THROWS_AS(apply_green(g, grid, wrong), shape_error);
}

TEST_CASE("operator application agrees with a difference solver", "[greens]") {
  // oracle: tridiagonal finite differences for -u'' = f, u(0) = u(1) = 0
  const int n = 257;
  const Grid1D grid = Grid1D::uniform(n, 0.0, 1.0);
  const Eigen::MatrixXd g = poisson_green_oracle(grid);
  GridFn f = GridFn::zero(grid);
  for (int i = 0; i < n; ++i) {
    const double x = grid.points()[i];
    f.values[i] = std::sin(2.0 * M_PI * x) + 0.5 * std::cos(M_PI * x);
  }
  const GridFn u = apply_green(g, grid, f);

  const double h = 1.0 / (n - 1);
  const int m = n - 2;
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(m, 2.0 / (h * h));
  Eigen::VectorXd rhs(m);
  for (int i = 0; i < m; ++i) rhs[i] = f.values[i + 1];
  // Thomas sweep
  Eigen::VectorXd c(m), d(m);
  c[0] = -1.0 / (h * h) / diag[0];
  d[0] = rhs[0] / diag[0];
  for (int i = 1; i < m; ++i) {
    const double w = diag[i] - (-1.0 / (h * h)) * c[i - 1];
    c[i] = -1.0 / (h * h) / w;
    d[i] = (rhs[i] - (-1.0 / (h * h)) * d[i - 1]) / w;
  }
  Eigen::VectorXd sol(m);
  sol[m - 1] = d[m - 1];
  for (int i = m - 2; i >= 0; --i) sol[i] = d[i] - c[i] * sol[i + 1];

  for (int i = 0; i < m; i += 16)
    REQUIRE(u.values[i + 1] == Catch::Approx(sol[i]).margin(1e-4));
}

TEST_CASE("first update is a positive rank-one correction", "[greens]") {
  const Grid1D grid = Grid1D::uniform(17, 0.0, 1.0);
  const auto k = test_kernel(grid);
  Rng rng(5);
  const GridFn f = bandlimited(grid, rng);
  const GridFn u = bandlimited(grid, rng);

  GreenEstimate est(k);
  const StepSchedule sched = StepSchedule::online(0.3, 0.5);
  const double rnorm = green_sgd_step(est, k, sched, f, u);
  REQUIRE(rnorm == Catch::Approx(norm(u)).epsilon(1e-13));

  const GridFn k1u = k.apply_k1(u);
  const GridFn k2f = k.apply_k2(f);
  const Eigen::MatrixXd expect = 0.3 * k1u.values * k2f.values.transpose();
  REQUIRE((est.matrix() - expect).cwiseAbs().maxCoeff() <= 1e-14);
  REQUIRE(est.steps() == 1);
}

TEST_CASE("matrix estimate tracks the generic expansion learner", "[greens]") {
  const Grid1D grid = Grid1D::uniform(21, 0.0, 1.0);
  const auto k = test_kernel(grid);
  Rng rng(9);
  Dataset<SeparableGreenKernel> data;
  const Eigen::MatrixXd truth = poisson_green_oracle(grid);
  for (int i = 0; i < 40; ++i) {
    GridFn f = bandlimited(grid, rng);
    data.inputs.push_back(f);
    data.outputs.push_back(apply_green(truth, grid, f));
  }
  const StepSchedule sched = StepSchedule::online(0.8, 0.5);
  const auto gr = run_green(data, k, sched, 10);
  const auto rr = run(data, k, sched, 10);

  Rng prng(31);
  for (int p = 0; p < 3; ++p) {
    const GridFn probe = bandlimited(grid, prng);
    const GridFn via_matrix = gr.estimate.predict(probe);
    const GridFn via_expansion = predict(rr.state, k, probe);
    REQUIRE(norm(via_matrix - via_expansion) <= 1e-10);
  }
  // trajectories see identical residuals
  REQUIRE(gr.trajectory.size() == rr.trajectory.size());
  for (std::size_t i = 0; i < gr.trajectory.size(); ++i) {
    REQUIRE(gr.trajectory[i].t == rr.trajectory[i].t);
    REQUIRE(gr.trajectory[i].train_residual ==
            Catch::Approx(rr.trajectory[i].train_residual).margin(1e-10));
  }
}

TEST_CASE("estimate rank is bounded by the step count", "[greens]") {
  const Grid1D grid = Grid1D::uniform(33, 0.0, 1.0);
  const auto k = test_kernel(grid);
  Rng rng(12);
  GreenEstimate est(k);
  const StepSchedule sched = StepSchedule::online(0.5, 0.5);
  for (int t = 0; t < 3; ++t)
    (void)green_sgd_step(est, k, sched, bandlimited(grid, rng), bandlimited(grid, rng));
  const Eigen::VectorXd sv =
      est.matrix().bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).singularValues();
  REQUIRE(sv[0] > 0.0);
  for (int i = 3; i < sv.size(); ++i) REQUIRE(sv[i] <= 1e-10 * sv[0]);
}

TEST_CASE("relative operator error", "[greens]") {
  const Grid1D grid = Grid1D::uniform(33, 0.0, 1.0);
  const Eigen::MatrixXd truth = poisson_green_oracle(grid);
  REQUIRE(green_relative_error(truth, truth, grid, grid) == 0.0);
  REQUIRE(green_relative_error(2.0 * truth, truth, grid, grid) ==
          Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE_THROWS_AS(
      green_relative_error(truth, Eigen::MatrixXd::Zero(33, 33), grid, grid),
      std::invalid_argument);
  REQUIRE_THROWS_AS(
      green_relative_error(Eigen::MatrixXd::Zero(17, 33), truth, grid, grid), shape_error);
}

TEST_CASE("trajectory rows follow the tick convention", "[greens]") {
  const Grid1D grid = Grid1D::uniform(17, 0.0, 1.0);
  const auto k = test_kernel(grid);
  Rng rng(2);
  Dataset<SeparableGreenKernel> data;
  const Eigen::MatrixXd truth = poisson_green_oracle(grid);
  for (int i = 0; i < 5; ++i) {
    GridFn f = bandlimited(grid, rng);
    data.inputs.push_back(f);
    data.outputs.push_back(apply_green(truth, grid, f));
  }
  const auto res = run_green(data, k, StepSchedule::online(0.5, 0.5), 2, nullptr, &truth);
  std::vector<std::size_t> ts;
  for (const auto& row : res.trajectory) ts.push_back(row.t);
  REQUIRE(ts == std::vector<std::size_t>{1, 2, 4, 6});
  for (const auto& row : res.trajectory) {
    REQUIRE(std::isnan(row.pred_err));  // no held-out set supplied
    REQUIRE(std::isfinite(row.green_rel_err));
  }
  // first tick sees the zero estimate: relative error one, residual |u_1|
  REQUIRE(res.trajectory[0].green_rel_err == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(res.trajectory[0].train_residual ==
          Catch::Approx(norm(data.outputs[0])).epsilon(1e-12));

  Dataset<SeparableGreenKernel> empty;
  REQUIRE_THROWS_AS(run_green(empty, k, StepSchedule::online(0.5, 0.5), 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(run_green(data, k, StepSchedule::online(0.5, 0.5), 0),
                    std::invalid_argument);
}

TEST_CASE("training shrinks the operator error", "[greens]") {
  const Grid1D grid = Grid1D::uniform(33, 0.0, 1.0);
  const auto k = test_kernel(grid);
  Rng rng(21);
  Dataset<SeparableGreenKernel> data;
  const Eigen::MatrixXd truth = poisson_green_oracle(grid);
  for (int i = 0; i < 200; ++i) {
    GridFn f = bandlimited(grid, rng);
    data.inputs.push_back(f);
    data.outputs.push_back(apply_green(truth, grid, f));
  }
  const auto res = run_green(data, k, StepSchedule::online(5.0, 0.5), 50, nullptr, &truth);
  REQUIRE(res.trajectory.back().green_rel_err < 0.8);
  REQUIRE(res.trajectory.back().green_rel_err < res.trajectory.front().green_rel_err);
}

TEST_CASE("section pairings agree across evaluation routes", "[greens]") {
  const Grid1D grid = Grid1D::uniform(33, 0.0, 1.0);
  const auto k = test_kernel(grid);
  REQUIRE(reproducing_check(k, 20, 41) <= 1e-8);

  Rng rng(6);
  std::vector<GridFn> fs, gs;
  std::vector<double> alphas;
  for (int i = 0; i < 6; ++i) {
    fs.push_back(bandlimited(grid, rng));
    gs.push_back(bandlimited(grid, rng));
    alphas.push_back(rng.normal());
  }
  const auto form = section_form_check(k, fs, gs, alphas);
  const double scale = std::max({std::abs(form.operator_form), std::abs(form.scalar_form), 1e-12});
  REQUIRE(std::abs(form.operator_form - form.scalar_form) / scale <= 1e-10);
  REQUIRE(form.operator_form >= -1e-10);
  REQUIRE(form.scalar_form >= -1e-10);

  std::vector<double> short_alphas{1.0};
  REQUIRE_THROWS_AS(section_form_check(k, fs, gs, short_alphas), std::invalid_argument);
}
