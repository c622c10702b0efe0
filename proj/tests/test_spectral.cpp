#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "opkl/sgd.hpp"
#include "opkl/spectral.hpp"

using namespace opkl;

TEST_CASE("model construction fixes spectrum, target, and trace", "[spectral]") {
  const auto model = build_model(4, 1, 1.0, 1.0, 0.0, 7);
  REQUIRE(model.sigmas[0] == Catch::Approx(1.0).epsilon(1e-15));
  REQUIRE(model.sigmas[1] == Catch::Approx(0.5).epsilon(1e-15));
  REQUIRE(model.sigmas[2] == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
  REQUIRE(model.sigmas[3] == Catch::Approx(0.25).epsilon(1e-15));
  REQUIRE(model.g_coeffs.norm() == Catch::Approx(1.0).epsilon(1e-13));
  // target = sigma^r g, here r = 1
  for (int i = 0; i < 4; ++i)
    REQUIRE(model.target_coeffs(i, 0) ==
            Catch::Approx(model.sigmas[i] * model.g_coeffs(i, 0)).epsilon(1e-14));
  REQUIRE(model.kappa_sq() == Catch::Approx(2.0 * (25.0 / 12.0)).epsilon(1e-14));

  REQUIRE_THROWS_AS(build_model(0, 1, 0.5, 0.5, 0.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(build_model(4, 0, 0.5, 0.5, 0.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(build_model(4, 1, 1.5, 0.5, 0.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(build_model(4, 1, 0.5, -0.1, 0.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(build_model(4, 1, 0.5, 0.5, -1.0, 1), std::invalid_argument);
}

TEST_CASE("cosine basis is orthonormal and matches the direct form", "[spectral]") {
  const auto model = build_model(6, 1, 0.5, 0.5, 0.0, 3);
  Eigen::VectorXd phi;
  // recurrence vs direct cosines
  for (double x : {0.0, 0.137, 0.5, 0.73, 1.0}) {
    model.basis(x, phi);
    for (int n = 1; n <= 6; ++n)
      REQUIRE(phi[n - 1] ==
              Catch::Approx(std::sqrt(2.0) * std::cos(M_PI * n * x)).margin(1e-12));
  }
  // orthonormality under the uniform measure, trapezoid quadrature
  const int q = 4001;
  Eigen::MatrixXd gramm = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < q; ++i) {
    const double x = static_cast<double>(i) / (q - 1);
    const double w = (i == 0 || i == q - 1) ? 0.5 : 1.0;
    model.basis(x, phi);
    gramm += (w / (q - 1)) * phi * phi.transpose();
  }
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      REQUIRE(gramm(a, b) == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-6));
}

TEST_CASE("error norms follow the per-mode weights", "[spectral]") {
  // oracle: two modes worked by hand with sigmas (1, 0.25)
  auto model = build_model(2, 1, 0.5, 0.5, 0.0, 1);
  REQUIRE(model.sigmas[1] == Catch::Approx(0.25).epsilon(1e-15));
  model.target_coeffs(0, 0) = 0.2;
  model.target_coeffs(1, 0) = 0.1;
  SpectralIterate it = SpectralIterate::zero(model);
  it.b(0, 0) = 0.5;
  it.b(1, 0) = -0.25;
  // d = (0.3, -0.35): pred = .09 + .1225; est divides by sigma; beta = 0.5
  const auto e = exact_errors(model, it, 0.5);
  REQUIRE(e.pred == Catch::Approx(0.2125).epsilon(1e-14));
  REQUIRE(e.est == Catch::Approx(0.09 + 0.49).epsilon(1e-14));
  REQUIRE(e.misspec == Catch::Approx(0.09 + 0.245).epsilon(1e-14));
}

TEST_CASE("single step from zero matches the closed form", "[spectral]") {
  const auto model = build_model(8, 2, 0.5, 0.75, 0.3, 21);
  const std::uint64_t seed = 99;
  const StepSchedule sched = StepSchedule::online(0.35, 0.5);
  const auto cps = run_spectral(model, sched, {1}, seed, 0.5);
  REQUIRE(cps.size() == 1);
  REQUIRE(cps[0].t == 1);

  // replay the draw: x first, then the m noise components
  Rng rng(seed);
  const double x = rng.uniform();
  Eigen::VectorXd eps(model.m);
  for (int j = 0; j < model.m; ++j) eps[j] = model.noise_sigma / std::sqrt(2.0) * rng.normal();
  Eigen::VectorXd phi;
  model.basis(x, phi);
  const Eigen::VectorXd y = model.target_coeffs.transpose() * phi + eps;
  SpectralIterate hand = SpectralIterate::zero(model);
  hand.b = 0.35 * model.sigmas.cwiseProduct(phi) * y.transpose();
  const auto expect = exact_errors(model, hand, 0.5);
  REQUIRE(cps[0].errors.pred == Catch::Approx(expect.pred).margin(1e-14));
  REQUIRE(cps[0].errors.est == Catch::Approx(expect.est).margin(1e-14));
  REQUIRE(cps[0].errors.misspec == Catch::Approx(expect.misspec).margin(1e-14));
}

TEST_CASE("checkpoint runs agree with a manual replay", "[spectral]") {
  const auto model = build_model(12, 2, 0.5, 0.5, 0.2, 4);
  const StepSchedule sched = StepSchedule::online(0.3, 0.6);
  const auto cps = run_spectral(model, sched, {5, 12}, 31, 0.4);
  REQUIRE(cps.size() == 2);

  Rng rng(31);
  SpectralIterate it = SpectralIterate::zero(model);
  Eigen::VectorXd phi, eps(model.m);
  const double scale = model.noise_sigma / std::sqrt(static_cast<double>(model.m));
  std::size_t idx = 0;
  for (std::size_t t = 1; t <= 12; ++t) {
    const double x = rng.uniform();
    for (int j = 0; j < model.m; ++j) eps[j] = scale * rng.normal();
    spectral_sgd_step(model, it, sched.step_size(t), x, eps, phi);
    if (t == 5 || t == 12) {
      const auto e = exact_errors(model, it, 0.4);
      REQUIRE(cps[idx].t == t);
      REQUIRE(cps[idx].errors.pred == Catch::Approx(e.pred).margin(1e-15));
      ++idx;
    }
  }
  REQUIRE_THROWS_AS(run_spectral(model, sched, {}, 1, 0.5), std::invalid_argument);
}

TEST_CASE("coefficient iteration tracks the kernel-expansion learner", "[spectral]") {
  // identical draws through both implementations, predictions compared at
  // probe points after every step
  const auto model = build_model(10, 2, 0.5, 0.75, 0.25, 17);
  const auto kernel = TruncatedMercerKernel::from_model(model);
  const StepSchedule sched = StepSchedule::online(0.3, 0.6);

  Rng rng(55);
  SpectralIterate it = SpectralIterate::zero(model);
  IterateState<TruncatedMercerKernel> st;
  Eigen::VectorXd phi, eps(model.m);
  const double scale = model.noise_sigma / std::sqrt(static_cast<double>(model.m));
  const std::vector<double> probes{0.12, 0.48, 0.93};
  for (std::size_t t = 1; t <= 80; ++t) {
    const double x = rng.uniform();
    for (int j = 0; j < model.m; ++j) eps[j] = scale * rng.normal();
    model.basis(x, phi);
    const Eigen::VectorXd y = model.target_coeffs.transpose() * phi + eps;
    spectral_sgd_step(model, it, sched.step_size(t), x, eps, phi);
    sgd_step(st, kernel, sched, x, y);
    for (double p : probes) {
      model.basis(p, phi);
      const Eigen::VectorXd ha = it.b.transpose() * phi;
      const Eigen::VectorXd hb = predict(st, kernel, p);
      REQUIRE((ha - hb).norm() <= 1e-10);
    }
  }
}

TEST_CASE("k-functional hits the per-mode crossover", "[spectral]") {
  const auto model = build_model(3, 1, 0.5, 0.5, 0.0, 2);
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3, 1);
  f(1, 0) = 1.0;  // single active mode, sigma_2 = 2^-2
  const double t_cross = std::sqrt(model.sigmas[1]);
  REQUIRE(kfunctional2(model, f, t_cross) == Catch::Approx(std::sqrt(0.5)).epsilon(1e-14));
  // monotone in t, saturating at |f|
  REQUIRE(kfunctional2(model, f, 1e-6) < 1e-5);
  REQUIRE(kfunctional2(model, f, 1e6) == Catch::Approx(1.0).epsilon(1e-10));
  REQUIRE_THROWS_AS(kfunctional2(model, f, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(kfunctional2(model, Eigen::MatrixXd::Zero(2, 1), 1.0),
                    std::invalid_argument);
}

TEST_CASE("interpolation constant matches the closed form", "[spectral]") {
  // int_0^inf s^(1-2 beta) / (1+s^2) ds = (pi/2) / sin(pi (1-beta))
  REQUIRE(interp_constant(0.5) == Catch::Approx(M_PI / 2.0).epsilon(1e-9));
  REQUIRE(interp_constant(0.25) == Catch::Approx(2.221441469079183).epsilon(1e-9));
  REQUIRE(interp_constant(0.75) == Catch::Approx(2.221441469079183).epsilon(1e-9));
  REQUIRE_THROWS_AS(interp_constant(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(interp_constant(1.0), std::invalid_argument);
}

TEST_CASE("k-functional norm reproduces the weighted spectral sum", "[spectral]") {
  const auto model = build_model(50, 2, 0.5, 0.5, 0.0, 9);
  Rng rng(13);
  Eigen::MatrixXd f(50, 2);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 2; ++j) f(i, j) = rng.normal();
  const double beta = 0.5;
  double spectral_sum = 0.0;
  for (int i = 0; i < 50; ++i)
    spectral_sum += std::pow(model.sigmas[i], -beta) * f.row(i).squaredNorm();
  const double sig_min = model.sigmas[49];
  const LogGrid grid{std::sqrt(sig_min) * 1e-4, 1e6, 8000};
  const double nrm = interp_norm_via_kfunc(model, f, beta, grid);
  REQUIRE(nrm * nrm / (spectral_sum * interp_constant(beta)) ==
          Catch::Approx(1.0).margin(1e-3));

  const LogGrid bad{0.5, 1e6, 8000};  // t_min above the spectrum floor
  REQUIRE_THROWS_AS(interp_norm_via_kfunc(model, f, beta, bad), std::invalid_argument);
}

TEST_CASE("effective dimension scales with the stated exponent", "[spectral]") {
  const auto model = build_model(1000, 1, 0.5, 0.5, 0.0, 5);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i <= 12; ++i) {
    const double lam = std::pow(10.0, -4.0 + 0.25 * i);
    pts.emplace_back(lam, effective_dimension(model, lam));
  }
  const double slope = fit_rate(pts, 1e-5, 1.0);
  REQUIRE(slope >= -0.6);
  REQUIRE(slope <= -0.4);
  REQUIRE_THROWS_AS(effective_dimension(model, 0.0), std::invalid_argument);
}

TEST_CASE("closed-form error representation holds along trajectories", "[spectral]") {
  const auto m1 = build_model(20, 2, 0.5, 0.75, 0.3, 5);
  REQUIRE(representation_check(m1, StepSchedule::online(0.25, 0.6), 150, 8) <= 1e-8);
  const auto m2 = build_model(12, 1, 1.0, 0.5, 0.0, 6);
  REQUIRE(representation_check(m2, StepSchedule::finite_horizon(0.2, 0.4, 200), 200, 9) <= 1e-8);
  REQUIRE(representation_check(m1, StepSchedule::online(0.25, 0.6), 1, 8) <= 1e-12);
  REQUIRE_THROWS_AS(representation_check(m1, StepSchedule::online(0.25, 0.6), 0, 8),
                    std::invalid_argument);
}

TEST_CASE("target is a fixed point of the noiseless update", "[spectral]") {
  const auto model = build_model(10, 2, 0.5, 0.75, 0.0, 3);
  SpectralIterate it{model.target_coeffs};
  Eigen::VectorXd phi;
  const Eigen::VectorXd eps = Eigen::VectorXd::Zero(model.m);
  Rng rng(77);
  for (int t = 0; t < 25; ++t) spectral_sgd_step(model, it, 0.4, rng.uniform(), eps, phi);
  REQUIRE((it.b - model.target_coeffs).norm() == 0.0);
}

TEST_CASE("error splits into contraction and noise accumulation", "[spectral]") {
  const auto model = build_model(16, 2, 0.5, 0.75, 0.3, 11);
  const StepSchedule sched = StepSchedule::online(0.2, 0.6);
  const auto chk = decomposition_check(model, sched, 100, 60, 0.5, 1000);
  REQUIRE(chk.slack >= -2.0 * chk.stderr_);
  // alpha = 1/2 contraction term never exceeds the target's squared norm
  REQUIRE(chk.t1 <= model.target_coeffs.squaredNorm() + 1e-12);
  REQUIRE(chk.lhs > 0.0);
  REQUIRE_THROWS_AS(decomposition_check(model, sched, 100, 60, 0.3, 1000),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(decomposition_check(model, sched, 100, 1, 0.5, 1000),
                    std::invalid_argument);
}

TEST_CASE("log-log fit recovers exact power laws", "[spectral]") {
  std::vector<std::pair<double, double>> pts;
  for (double t : {10.0, 25.0, 60.0, 140.0, 500.0}) pts.emplace_back(t, 3.7 / t);
  REQUIRE(fit_rate(pts, 1.0, 1000.0) == Catch::Approx(-1.0).margin(1e-12));
  // points outside the window are ignored
  pts.emplace_back(2000.0, 1e6);
  pts.emplace_back(0.5, 1e-9);
  REQUIRE(fit_rate(pts, 1.0, 1000.0) == Catch::Approx(-1.0).margin(1e-12));
  std::vector<std::pair<double, double>> one{{10.0, 1.0}};
  REQUIRE_THROWS_AS(fit_rate(one, 1.0, 1000.0), std::invalid_argument);
}

TEST_CASE("contraction product norm and its majorant", "[spectral]") {
  Eigen::VectorXd eig(2);
  eig << 0.5, 0.25;
  const std::vector<double> etas{0.5, 1.0};
  // by hand: mode 2 wins, 0.25^0.5 * (0.875 * 0.75)^2
  REQUIRE(contraction_product_norm(eig, etas, 0.5) ==
          Catch::Approx(0.21533203125).epsilon(1e-15));
  REQUIRE(contraction_product_norm(eig, etas, 0.0) ==
          Catch::Approx(0.875 * 0.875 * 0.75 * 0.75).epsilon(1e-14));

  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + static_cast<int>(rng.integer(6));
    Eigen::VectorXd ev(n);
    for (int i = 0; i < n; ++i) ev[i] = 0.05 + 0.95 * rng.uniform();
    const double lam_max = ev.maxCoeff();
    const std::size_t T = 2 + rng.integer(40);
    std::vector<double> sched(T);
    for (auto& e : sched) e = 0.99 * rng.uniform() / lam_max;
    const double beta = (trial % 4 == 0) ? 0.0 : rng.uniform();
    const double lhs = contraction_product_norm(ev, sched, beta);
    const double rhs = contraction_product_bound(sched, beta);
    REQUIRE(lhs <= rhs * (1.0 + 1e-12));
  }
  REQUIRE_THROWS_AS(contraction_product_norm(Eigen::VectorXd(), etas, 0.5),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(contraction_product_bound({}, 0.5), std::invalid_argument);
}

TEST_CASE("step-weighted sums match brute force and stay below bounds", "[spectral]") {
  const std::vector<double> etas{0.5, 0.4, 0.35, 0.3, 0.28, 0.25, 0.22};
  for (double v : {0.3, 0.5, 1.0, 1.7}) {
    double brute = 0.0;
    for (std::size_t t = 1; t <= etas.size() - 1; ++t) {
      double suffix = 0.0;
      for (std::size_t j = t + 1; j <= etas.size(); ++j) suffix += etas[j - 1];
      brute += etas[t - 1] * etas[t - 1] / (1.0 + std::pow(suffix, v));
    }
    REQUIRE(step_weighted_sum(etas, v) == Catch::Approx(brute).epsilon(1e-15));
  }
  REQUIRE_THROWS_AS(step_weighted_sum({0.5}, 1.0), std::invalid_argument);

  // decaying-step majorant with the swept constant
  for (double theta : {0.2, 0.5, 0.8}) {
    for (double v : {0.5, 1.0, 2.0}) {
      for (std::size_t T : {std::size_t{50}, std::size_t{500}}) {
        for (double eta1 : {0.1, 1.0}) {
          const StepSchedule s = StepSchedule::online(eta1, theta);
          std::vector<double> sched(T);
          for (std::size_t t = 1; t <= T; ++t) sched[t - 1] = s.step_size(t);
          const double lhs = step_weighted_sum(sched, v);
          const double rhs = step_weighted_sum_bound_decaying(eta1, theta, T, v, 16.0);
          REQUIRE(lhs <= rhs);
        }
      }
    }
  }
  // the constant 16 is not slack by orders of magnitude
  {
    const std::size_t T = 1000;
    const StepSchedule s = StepSchedule::online(1.0, 0.5);
    std::vector<double> sched(T);
    for (std::size_t t = 1; t <= T; ++t) sched[t - 1] = s.step_size(t);
    const double lhs = step_weighted_sum(sched, 1.0);
    const double rhs = step_weighted_sum_bound_decaying(1.0, 0.5, T, 1.0, 16.0);
    REQUIRE(rhs <= 16.0 * lhs);
  }

  // constant-step majorant; the v = 1 branch needs eta (T+1) >= e
  for (double v : {0.5, 1.0, 2.0}) {
    for (std::size_t T : {std::size_t{20}, std::size_t{200}}) {
      const double eta1 = 0.5;
      std::vector<double> sched(T, eta1);
      REQUIRE(eta1 * (T + 1) >= M_E);
      const double lhs = step_weighted_sum(sched, v);
      REQUIRE(lhs <= step_weighted_sum_bound_constant(eta1, T, v));
    }
  }
}

TEST_CASE("truncated kernel evaluates the spectral sum", "[spectral]") {
  const auto model = build_model(6, 2, 0.5, 0.5, 0.0, 8);
  const auto kernel = TruncatedMercerKernel::from_model(model);
  Eigen::VectorXd pa, pb;
  for (auto [x, y] : {std::pair{0.2, 0.7}, {0.0, 1.0}, {0.4, 0.4}}) {
    model.basis(x, pa);
    model.basis(y, pb);
    double direct = 0.0;
    for (int n = 0; n < 6; ++n) direct += model.sigmas[n] * pa[n] * pb[n];
    REQUIRE(kernel.eval_scalar(x, y) == Catch::Approx(direct).margin(1e-13));
  }
  REQUIRE(kernel.kappa_at(0.3) == Catch::Approx(kernel.eval_scalar(0.3, 0.3)).epsilon(1e-15));
  Eigen::VectorXd v(2);
  v << 1.0, -2.0;
  const Eigen::VectorXd out = kernel.apply(0.2, 0.7, v);
  REQUIRE(out[0] == Catch::Approx(kernel.eval_scalar(0.2, 0.7) * 1.0).epsilon(1e-15));
  REQUIRE(out[1] == Catch::Approx(kernel.eval_scalar(0.2, 0.7) * -2.0).epsilon(1e-15));
  REQUIRE_THROWS_AS(kernel.apply(0.2, 0.7, Eigen::VectorXd::Ones(3)), shape_error);
}
