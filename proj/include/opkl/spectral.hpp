#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <vector>

#include "opkl/common.hpp"
#include "opkl/sgd.hpp"

namespace opkl {

/**
 * Diagonal testbed with a fully known spectrum.
 *
 * Inputs are uniform on [0, 1]; the feature basis is phi_n(x) =
 * sqrt(2) cos(pi n x), orthonormal in L2[0,1], with eigenvalues
 * sigma_n = n^(-1/s_eff) of multiplicity m.  The target has coefficients
 * a_(n,j) = sigma_n^r g_(n,j) against a direction matrix g of unit Frobenius
 * norm, so smoothness and capacity are dialed in exactly and every error
 * norm is a finite weighted coefficient sum.
 */
struct SpectralModel {
  int n_modes = 0;
  int m = 0;
  double s_eff = 0.0;       // spectrum decay: sigma_n = n^(-1/s_eff)
  double r = 0.0;           // target smoothness
  double noise_sigma = 0.0; // observation noise level, E|eps|^2 = sigma^2
  Eigen::VectorXd sigmas;          // n_modes
  Eigen::MatrixXd g_coeffs;        // n_modes x m, |g|_F = 1
  Eigen::MatrixXd target_coeffs;   // a = sigma^r g

  /// sup_x |K(x, x)| = k(0, 0) = 2 sum_n sigma_n, attained at x = 0.
  [[nodiscard]] double kappa_sq() const { return 2.0 * sigmas.sum(); }

  /// Evaluate all basis functions at x into phi (resized to n_modes).
  void basis(double x, Eigen::VectorXd& phi) const {
    phi.resize(n_modes);
    const double c = std::cos(M_PI * x);
    double prev = 1.0;   // cos(0)
    double cur = c;      // cos(pi x)
    const double s2 = std::sqrt(2.0);
    for (int n = 1; n <= n_modes; ++n) {
      phi[n - 1] = s2 * cur;
      const double next = 2.0 * c * cur - prev;
      prev = cur;
      cur = next;
    }
  }
};

[[nodiscard]] inline SpectralModel build_model(int n_modes, int m, double s_eff, double r,
                                               double noise_sigma, std::uint64_t seed) {
  if (n_modes < 1) throw std::invalid_argument("build_model: n_modes must be positive");
  if (m < 1) throw std::invalid_argument("build_model: m must be positive");
  if (!(s_eff > 0.0 && s_eff <= 1.0))
    throw std::invalid_argument("build_model: s_eff must lie in (0, 1]");
  if (!(r >= 0.0)) throw std::invalid_argument("build_model: r must be nonnegative");
  if (!(noise_sigma >= 0.0))
    throw std::invalid_argument("build_model: noise_sigma must be nonnegative");
  SpectralModel model;
  model.n_modes = n_modes;
  model.m = m;
  model.s_eff = s_eff;
  model.r = r;
  model.noise_sigma = noise_sigma;
  model.sigmas.resize(n_modes);
  for (int n = 1; n <= n_modes; ++n)
    model.sigmas[n - 1] = std::pow(static_cast<double>(n), -1.0 / s_eff);
  Rng rng(seed);
  model.g_coeffs.resize(n_modes, m);
  for (int i = 0; i < n_modes; ++i)
    for (int j = 0; j < m; ++j) model.g_coeffs(i, j) = rng.normal();
  model.g_coeffs /= model.g_coeffs.norm();
  model.target_coeffs =
      model.sigmas.array().pow(r).matrix().asDiagonal() * model.g_coeffs;
  return model;
}

/// Iterate coefficients against the model basis, n_modes x m.
struct SpectralIterate {
  Eigen::MatrixXd b;

  static SpectralIterate zero(const SpectralModel& model) {
    return SpectralIterate{Eigen::MatrixXd::Zero(model.n_modes, model.m)};
  }
};

/**
 * One stochastic step at sample point x with noise vector eps (length m):
 * observe y = h_target(x) + eps, update b <- b - eta sigma phi(x) (h(x) - y)'.
 * The draws are passed in so independent implementations can replay them.
 */
inline void spectral_sgd_step(const SpectralModel& model, SpectralIterate& it, double eta,
                              double x, const Eigen::VectorXd& eps, Eigen::VectorXd& phi_buf) {
  model.basis(x, phi_buf);
  Eigen::VectorXd rho = it.b.transpose() * phi_buf;             // h_t(x)
  rho.noalias() -= model.target_coeffs.transpose() * phi_buf;   // - h_target(x)
  rho -= eps;                                                   // - y
  it.b.noalias() -= eta * model.sigmas.cwiseProduct(phi_buf) * rho.transpose();
}

struct SpectralErrors {
  double pred;     // |h - h_target|^2 in L2
  double est;      // |h - h_target|^2 in the kernel space (beta = 1)
  double misspec;  // intermediate norm at the requested beta
};

[[nodiscard]] inline SpectralErrors exact_errors(const SpectralModel& model,
                                                 const SpectralIterate& it, double beta) {
  const Eigen::MatrixXd d = it.b - model.target_coeffs;
  const Eigen::VectorXd row = d.array().square().matrix().rowwise().sum();
  SpectralErrors e{};
  e.pred = row.sum();
  e.est = (row.array() / model.sigmas.array()).sum();
  e.misspec = (row.array() * model.sigmas.array().pow(-beta)).sum();
  return e;
}

/**
 * Run the iteration for max(checkpoints) steps with draws from seed and
 * return the exact errors after each checkpoint step count.
 */
struct SpectralCheckpoint {
  std::size_t t;
  SpectralErrors errors;
};

[[nodiscard]] inline std::vector<SpectralCheckpoint> run_spectral(
    const SpectralModel& model, const StepSchedule& sched, const std::vector<std::size_t>& checkpoints,
    std::uint64_t seed, double beta) {
  if (checkpoints.empty()) throw std::invalid_argument("run_spectral: no checkpoints");
  std::vector<std::size_t> cps = checkpoints;
  std::sort(cps.begin(), cps.end());
  const std::size_t T = cps.back();
  Rng rng(seed);
  SpectralIterate it = SpectralIterate::zero(model);
  Eigen::VectorXd phi, eps(model.m);
  const double noise_scale = model.noise_sigma / std::sqrt(static_cast<double>(model.m));
  std::vector<SpectralCheckpoint> out;
  std::size_t next = 0;
  for (std::size_t t = 1; t <= T; ++t) {
    const double x = rng.uniform();
    for (int j = 0; j < model.m; ++j) eps[j] = noise_scale * rng.normal();
    spectral_sgd_step(model, it, sched.step_size(t), x, eps, phi);
    while (next < cps.size() && cps[next] == t) {
      out.push_back({t, exact_errors(model, it, beta)});
      ++next;
    }
  }
  return out;
}

/// K-functional between L2 and the kernel space at parameter t, evaluated
/// through the explicit per-mode minimizer.
[[nodiscard]] inline double kfunctional2(const SpectralModel& model,
                                         const Eigen::MatrixXd& f_coeffs, double t) {
  if (f_coeffs.rows() != model.n_modes)
    throw std::invalid_argument("kfunctional2: coefficient rows must match n_modes");
  if (!(t > 0.0)) throw std::invalid_argument("kfunctional2: t must be positive");
  const double t2 = t * t;
  double s = 0.0;
  for (int n = 0; n < model.n_modes; ++n) {
    const double q = t2 / model.sigmas[n];
    const double w = q / (q + 1.0);
    s += w * f_coeffs.row(n).squaredNorm();
  }
  return std::sqrt(s);
}

struct LogGrid {
  double t_min;
  double t_max;
  int n;
};

/**
 * Interpolation-space norm computed from the K-functional:
 * the square integrates (t^(-beta) K2(f, t))^2 dt/t over a logarithmic grid.
 * The grid must blanket the spectrum: t_min well below sqrt(sigma_min) and
 * t_max large enough that the t^(-2 beta) tail is negligible.
 */
[[nodiscard]] inline double interp_norm_via_kfunc(const SpectralModel& model,
                                                  const Eigen::MatrixXd& f_coeffs, double beta,
                                                  const LogGrid& grid) {
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("interp_norm_via_kfunc: beta must lie in (0, 1)");
  const double sig_min = model.sigmas[model.n_modes - 1];
  if (!(grid.t_min > 0.0) || grid.t_min > std::sqrt(sig_min) * 1e-2 || grid.t_max < 1e2 ||
      grid.n < 16)
    throw std::invalid_argument("interp_norm_via_kfunc: log grid does not blanket the spectrum");
  const double u_lo = std::log(grid.t_min), u_hi = std::log(grid.t_max);
  const double du = (u_hi - u_lo) / (grid.n - 1);
  double acc = 0.0;
  for (int i = 0; i < grid.n; ++i) {
    const double t = std::exp(u_lo + du * i);
    const double k2 = kfunctional2(model, f_coeffs, t);
    const double g = std::pow(t, -2.0 * beta) * k2 * k2;
    acc += (i == 0 || i == grid.n - 1) ? 0.5 * g : g;
  }
  return std::sqrt(acc * du);
}

/// Constant relating the K-functional norm to the spectral sum
/// sum sigma_n^(-beta) f_n^2: the substitution integral
/// int_0^inf s^(1-2 beta) / (1 + s^2) ds on a logarithmic grid.
[[nodiscard]] inline double interp_constant(double beta, int n = 160000, double u_lo = -45.0,
                                            double u_hi = 45.0) {
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("interp_constant: beta must lie in (0, 1)");
  const double du = (u_hi - u_lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = u_lo + du * i;
    const double g = std::exp(u * (2.0 - 2.0 * beta)) / (1.0 + std::exp(2.0 * u));
    acc += (i == 0 || i == n) ? 0.5 * g : g;
  }
  return acc * du;
}

/// Trace of L_K (L_K + lam)^(-1); each of the n_modes eigenvalues has
/// multiplicity m.
[[nodiscard]] inline double effective_dimension(const SpectralModel& model, double lam) {
  if (!(lam > 0.0)) throw std::invalid_argument("effective_dimension: lam must be positive");
  return model.m * (model.sigmas.array() / (model.sigmas.array() + lam)).sum();
}

/**
 * Checks the closed-form representation of the error of the final iterate:
 * running the iteration for T steps, the deviation h_(T+1) - h_target must
 * equal the deterministic contraction of the target plus the weighted sum of
 * the per-step noise terms
 *   W_t = L_K (h_t - h_target) + phi(x_t) (y_t - h_t(x_t)) sigma-weighted,
 * accumulated with the same contraction factors.  Returns the largest
 * coefficient discrepancy relative to the largest deviation coefficient.
 */
[[nodiscard]] inline double representation_check(const SpectralModel& model,
                                                 const StepSchedule& sched, std::size_t T,
                                                 std::uint64_t seed) {
  if (T == 0) throw std::invalid_argument("representation_check: T must be positive");
  Rng rng(seed);
  SpectralIterate it = SpectralIterate::zero(model);
  Eigen::VectorXd phi, eps(model.m);
  const double noise_scale = model.noise_sigma / std::sqrt(static_cast<double>(model.m));
  Eigen::MatrixXd bias = model.target_coeffs;              // prod (1 - eta sigma) a
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(model.n_modes, model.m);
  for (std::size_t t = 1; t <= T; ++t) {
    const double eta = sched.step_size(t);
    const double x = rng.uniform();
    for (int j = 0; j < model.m; ++j) eps[j] = noise_scale * rng.normal();
    model.basis(x, phi);
    // W_t from the state before the step.
    Eigen::VectorXd rho = it.b.transpose() * phi;
    rho.noalias() -= model.target_coeffs.transpose() * phi;
    rho -= eps;                                            // h_t(x_t) - y_t
    Eigen::MatrixXd w =
        model.sigmas.asDiagonal() * (it.b - model.target_coeffs) -
        model.sigmas.cwiseProduct(phi) * rho.transpose();
    const Eigen::ArrayXd contract = 1.0 - eta * model.sigmas.array();
    acc = contract.matrix().asDiagonal() * acc + eta * w;
    bias = contract.matrix().asDiagonal() * bias;
    // The actual step with the same draw.
    it.b.noalias() -= eta * model.sigmas.cwiseProduct(phi) * rho.transpose();
  }
  const Eigen::MatrixXd lhs = it.b - model.target_coeffs;
  const Eigen::MatrixXd rhs = -bias + acc;
  const double scale = lhs.array().abs().maxCoeff();
  if (scale == 0.0) return (rhs.array().abs().maxCoeff() == 0.0) ? 0.0 : 1.0;
  return (lhs - rhs).array().abs().maxCoeff() / scale;
}

struct DecompositionCheck {
  double lhs;       // Monte Carlo estimate of E |L_K^alpha (h_(T+1) - h_target)|_K^2
  double t1;        // deterministic contraction term
  double t2;        // accumulated noise term
  double slack;     // t1 + t2 - lhs, expected >= -2 stderr
  double stderr_;   // Monte Carlo standard error of lhs
};

/**
 * Bias-variance upper bound on the final iterate error, checked by Monte
 * Carlo.  alpha = 0 measures the kernel-space norm, alpha = 1/2 the L2 norm.
 * The running prediction errors entering the noise term are estimated across
 * the same seeds.
 */
[[nodiscard]] inline DecompositionCheck decomposition_check(const SpectralModel& model,
                                                            const StepSchedule& sched,
                                                            std::size_t T, int n_seeds,
                                                            double alpha, std::uint64_t seed0) {
  if (T == 0) throw std::invalid_argument("decomposition_check: T must be positive");
  if (n_seeds < 2) throw std::invalid_argument("decomposition_check: need at least 2 seeds");
  if (alpha != 0.0 && alpha != 0.5)
    throw std::invalid_argument("decomposition_check: alpha must be 0 or 1/2");
  const int N = model.n_modes;
  Eigen::VectorXd etas(T);
  for (std::size_t t = 1; t <= T; ++t) etas[t - 1] = sched.step_size(t);

  // K-space weight sigma^(2 alpha - 1) per mode.
  const Eigen::ArrayXd kw = model.sigmas.array().pow(2.0 * alpha - 1.0);

  std::vector<double> lhs_samples(n_seeds);
  Eigen::VectorXd running_pred = Eigen::VectorXd::Zero(T);  // mean of pred err at iterate t
  Eigen::VectorXd phi, eps(model.m);
  const double noise_scale = model.noise_sigma / std::sqrt(static_cast<double>(model.m));
  for (int sidx = 0; sidx < n_seeds; ++sidx) {
    Rng rng(seed0 + static_cast<std::uint64_t>(sidx));
    SpectralIterate it = SpectralIterate::zero(model);
    for (std::size_t t = 1; t <= T; ++t) {
      running_pred[t - 1] += (it.b - model.target_coeffs).squaredNorm();
      const double x = rng.uniform();
      for (int j = 0; j < model.m; ++j) eps[j] = noise_scale * rng.normal();
      spectral_sgd_step(model, it, etas[t - 1], x, eps, phi);
    }
    const Eigen::MatrixXd d = it.b - model.target_coeffs;
    lhs_samples[sidx] = (d.array().square().rowwise().sum() * kw).sum();
  }
  running_pred /= n_seeds;

  double lhs = 0.0;
  for (double v : lhs_samples) lhs += v;
  lhs /= n_seeds;
  double var = 0.0;
  for (double v : lhs_samples) var += (v - lhs) * (v - lhs);
  var /= (n_seeds - 1);
  const double se = std::sqrt(var / n_seeds);

  // Deterministic term: full contraction of the target.
  Eigen::ArrayXd prod = Eigen::ArrayXd::Ones(N);
  for (std::size_t t = 0; t < T; ++t) prod *= 1.0 - etas[t] * model.sigmas.array();
  const Eigen::ArrayXd arow = model.target_coeffs.array().square().rowwise().sum();
  const double t1 = (kw * prod.square() * arow).sum();

  // Noise term: suffix contraction operator norms, walked backwards.
  const double ks = model.kappa_sq();
  Eigen::ArrayXd suffix = Eigen::ArrayXd::Ones(N);
  const Eigen::ArrayXd opw = model.sigmas.array().pow(2.0 * alpha);
  double t2 = 0.0;
  for (std::size_t t = T; t >= 1; --t) {
    const double opnorm = (opw * suffix.square()).maxCoeff();
    t2 += 2.0 * ks * (model.noise_sigma * model.noise_sigma + running_pred[t - 1]) *
          etas[t - 1] * etas[t - 1] * opnorm;
    suffix *= 1.0 - etas[t - 1] * model.sigmas.array();
  }
  return DecompositionCheck{lhs, t1, t2, t1 + t2 - lhs, se};
}

/// Least-squares slope of log(err) against log(t) for points with
/// t_min <= t <= t_max.
[[nodiscard]] inline double fit_rate(const std::vector<std::pair<double, double>>& points,
                                     double t_min, double t_max) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& [t, err] : points) {
    if (t < t_min || t > t_max) continue;
    if (!(t > 0.0) || !(err > 0.0))
      throw std::invalid_argument("fit_rate: points must have positive t and err");
    const double lx = std::log(t), ly = std::log(err);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("fit_rate: fewer than 2 points in the window");
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_rate: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

/// max_n lam_n^beta prod_(j=l)^(T) (1 - eta_j lam_n)^2 over the given
/// eigenvalues; requires eta_j lam_max < 1.
[[nodiscard]] inline double contraction_product_norm(const Eigen::VectorXd& eigvals,
                                                     const std::vector<double>& etas, double beta) {
  if (eigvals.size() == 0) throw std::invalid_argument("contraction_product_norm: no eigenvalues");
  double best = 0.0;
  for (int n = 0; n < eigvals.size(); ++n) {
    const double lam = eigvals[n];
    double p = (beta == 0.0) ? 1.0 : std::pow(lam, beta);  // 0^0 = 1 convention
    for (double eta : etas) {
      const double f = 1.0 - eta * lam;
      p *= f * f;
    }
    best = std::max(best, p);
  }
  return best;
}

/// Closed-form majorant (beta / 2e)^beta (sum eta_j)^(-beta) for the
/// contraction product norm, with 0^0 = 1.
[[nodiscard]] inline double contraction_product_bound(const std::vector<double>& etas,
                                                      double beta) {
  double s = 0.0;
  for (double eta : etas) s += eta;
  if (!(s > 0.0)) throw std::invalid_argument("contraction_product_bound: step sum must be positive");
  if (beta == 0.0) return 1.0;
  return std::pow(beta / (2.0 * M_E), beta) * std::pow(s, -beta);
}

/// sum_(t=1)^(T-1) eta_t^2 / (1 + (sum_(j=t+1)^T eta_j)^v).
[[nodiscard]] inline double step_weighted_sum(const std::vector<double>& etas, double v) {
  const std::size_t T = etas.size();
  if (T < 2) throw std::invalid_argument("step_weighted_sum: need at least 2 steps");
  double acc = 0.0, suffix = 0.0;
  std::vector<double> suf(T + 1, 0.0);
  for (std::size_t t = T; t >= 1; --t) {
    suf[t - 1] = suffix + etas[t - 1];
    suffix = suf[t - 1];
  }
  for (std::size_t t = 1; t <= T - 1; ++t) acc += etas[t - 1] * etas[t - 1] / (1.0 + std::pow(suf[t], v));
  return acc;
}

/// Majorant of step_weighted_sum for eta_t = eta1 t^(-theta), up to the
/// sweep constant delta.
[[nodiscard]] inline double step_weighted_sum_bound_decaying(double eta1, double theta,
                                                             std::size_t T, double v,
                                                             double delta) {
  const double pre = eta1 * eta1 / std::min(1.0, std::pow(eta1 / (1.0 - theta), v));
  const double Tp = static_cast<double>(T) + 1.0;
  double b;
  if (v < 1.0) {
    if (theta < 0.5)
      b = std::pow(Tp, 1.0 - v - theta * (2.0 - v));
    else if (theta == 0.5)
      b = std::pow(Tp, -v / 2.0) * std::log(Tp);
    else
      b = std::pow(Tp, -v * (1.0 - theta));
  } else if (v == 1.0) {
    b = (theta <= 0.5) ? std::pow(Tp, -theta) * std::log(Tp) : std::pow(Tp, -(1.0 - theta));
  } else {
    b = std::pow(Tp, -std::min(theta, v * (1.0 - theta)));
  }
  return delta * pre * b;
}

/// Majorant of step_weighted_sum for constant steps; the constant is
/// explicit here.
[[nodiscard]] inline double step_weighted_sum_bound_constant(double eta1, std::size_t T,
                                                             double v) {
  const double Tp = static_cast<double>(T) + 1.0;
  if (v < 1.0) return std::pow(eta1, 2.0 - v) * std::pow(Tp, 1.0 - v) / (1.0 - v);
  if (v == 1.0) return eta1 * (1.0 + std::log(eta1 * Tp));
  return eta1 * v / (v - 1.0);
}

/**
 * The model's own kernel k(x, x') = sum_n sigma_n phi_n(x) phi_n(x') acting
 * as the identity on R^m, usable with the generic kernel-expansion learner.
 * Exists to cross-check the coefficient-space iteration against the generic
 * path on identical draws.
 */
struct TruncatedMercerKernel {
  using Input = double;
  using Output = Eigen::VectorXd;

  Eigen::VectorXd sigmas;
  int m = 0;

  static TruncatedMercerKernel from_model(const SpectralModel& model) {
    return TruncatedMercerKernel{model.sigmas, model.m};
  }

  [[nodiscard]] double eval_scalar(double x, double x2) const {
    const int n_modes = static_cast<int>(sigmas.size());
    const double cx = std::cos(M_PI * x), cy = std::cos(M_PI * x2);
    double px = 1.0, qx = cx, py = 1.0, qy = cy;
    double acc = 0.0;
    for (int n = 1; n <= n_modes; ++n) {
      acc += sigmas[n - 1] * 2.0 * qx * qy;
      const double nx = 2.0 * cx * qx - px;
      px = qx;
      qx = nx;
      const double ny = 2.0 * cy * qy - py;
      py = qy;
      qy = ny;
    }
    return acc;
  }

  [[nodiscard]] Output apply(const Input& x, const Input& x2, const Output& y) const {
    if (y.size() != m) throw shape_error("TruncatedMercerKernel::apply: output dimension mismatch");
    return eval_scalar(x, x2) * y;
  }

  [[nodiscard]] Output zero_output() const { return Output::Zero(m); }

  [[nodiscard]] double kappa_at(const Input& x) const { return eval_scalar(x, x); }
};

}  // namespace opkl
