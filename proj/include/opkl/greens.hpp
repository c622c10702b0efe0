#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "opkl/sgd.hpp"

namespace opkl {

/**
 * Green's function of the one-dimensional Poisson problem -u'' = f with
 * Dirichlet boundary on [0, 1]: G(y, x) = min(x, y) (1 - max(x, y)),
 * tabulated on grid x grid.
 */
[[nodiscard]] inline Eigen::MatrixXd poisson_green_oracle(const Grid1D& grid) {
  if (!(grid.a() == 0.0 && grid.b() == 1.0))
    throw std::invalid_argument("poisson_green_oracle: grid must cover [0, 1]");
  const int n = grid.size();
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i) {
    const double y = grid.points()[i];
    for (int j = 0; j < n; ++j) {
      const double x = grid.points()[j];
      g(i, j) = std::min(x, y) * (1.0 - std::max(x, y));
    }
  }
  return g;
}

/// u(y) = int G(y, x) f(x) dx by quadrature; rows of G live on grid_y,
/// columns on f's grid.
[[nodiscard]] inline GridFn apply_green(const Eigen::MatrixXd& g, const Grid1D& grid_y,
                                        const GridFn& f) {
  if (g.rows() != grid_y.size() || g.cols() != f.grid.size())
    throw shape_error("apply_green: matrix shape does not match the grids");
  return GridFn(grid_y, g * f.grid.weights().cwiseProduct(f.values));
}

/**
 * Rank-accumulating estimate of an integral kernel.  Each step appends a
 * separable term and folds it into the assembled matrix
 *   G = - sum_t eta_t (K1 r_t) outer (K2 f_t),
 * so applying the current estimate stays one quadrature matrix-vector
 * product regardless of the step count.
 */
class GreenEstimate {
public:
  explicit GreenEstimate(const SeparableGreenKernel& k)
      : grid_y_(k.grid_y()), grid_x_(k.grid_x()),
        g_(Eigen::MatrixXd::Zero(k.grid_y().size(), k.grid_x().size())) {}

  [[nodiscard]] const Eigen::MatrixXd& matrix() const { return g_; }
  [[nodiscard]] const Grid1D& grid_y() const { return grid_y_; }
  [[nodiscard]] const Grid1D& grid_x() const { return grid_x_; }
  [[nodiscard]] std::size_t steps() const { return steps_; }

  [[nodiscard]] GridFn predict(const GridFn& f) const { return apply_green(g_, grid_y_, f); }

  void append(double eta, const GridFn& k1r, const GridFn& k2f) {
    g_.noalias() -= eta * k1r.values * k2f.values.transpose();
    ++steps_;
  }

private:
  Grid1D grid_y_, grid_x_;
  Eigen::MatrixXd g_;
  std::size_t steps_ = 0;
};

/**
 * One stochastic step of the kernel-space iteration on operator estimates:
 * with residual r_t = G_t f_t - u_t, the update subtracts
 * eta_t (K1 r_t) outer (K2 f_t).  Returns the residual norm.
 */
inline double green_sgd_step(GreenEstimate& est, const SeparableGreenKernel& k,
                             const StepSchedule& sched, const GridFn& f, const GridFn& u) {
  const double eta = sched.step_size(est.steps() + 1);
  GridFn r = est.predict(f);
  r -= u;
  const double rnorm = norm(r);
  if (!std::isfinite(rnorm)) throw numeric_error("green_sgd_step: residual is not finite");
  est.append(eta, k.apply_k1(r), k.apply_k2(f));
  return rnorm;
}

struct GreenTrajectoryRow {
  std::size_t t;
  double step_size;
  double train_residual;
  double pred_err;       // mean squared L2 error on the held-out pairs (nan if none)
  double green_rel_err;  // weighted relative Frobenius error vs truth (nan if none)
};

struct GreenRunResult {
  GreenEstimate estimate;
  std::vector<GreenTrajectoryRow> trajectory;
};

/// Weighted relative Frobenius distance between two kernels on the same grids.
[[nodiscard]] inline double green_relative_error(const Eigen::MatrixXd& g,
                                                 const Eigen::MatrixXd& truth,
                                                 const Grid1D& grid_y, const Grid1D& grid_x) {
  if (g.rows() != truth.rows() || g.cols() != truth.cols())
    throw shape_error("green_relative_error: shapes differ");
  const Eigen::VectorXd& wy = grid_y.weights();
  const Eigen::VectorXd& wx = grid_x.weights();
  const Eigen::MatrixXd d2 = (g - truth).array().square().matrix();
  const Eigen::MatrixXd t2 = truth.array().square().matrix();
  const double num = wy.dot(d2 * wx);
  const double den = wy.dot(t2 * wx);
  if (!(den > 0.0)) throw std::invalid_argument("green_relative_error: truth has zero norm");
  return std::sqrt(num / den);
}

/**
 * Single pass over operator data.  Rows are recorded at step indices
 * 1, metrics_every, 2*metrics_every, ... plus a final row after the pass,
 * mirroring the generic learner's trajectory convention.
 */
inline GreenRunResult run_green(const Dataset<SeparableGreenKernel>& data,
                                const SeparableGreenKernel& k, const StepSchedule& sched,
                                std::size_t metrics_every,
                                const Dataset<SeparableGreenKernel>* heldout = nullptr,
                                const Eigen::MatrixXd* truth = nullptr) {
  if (data.inputs.empty()) throw std::invalid_argument("run_green: dataset is empty");
  if (data.inputs.size() != data.outputs.size())
    throw std::invalid_argument("run_green: input and output counts differ");
  if (metrics_every == 0) throw std::invalid_argument("run_green: metrics_every must be positive");
  const std::size_t T = (sched.mode() == ScheduleMode::finite_horizon)
                            ? std::min<std::size_t>(data.size(), sched.horizon())
                            : data.size();
  GreenRunResult result{GreenEstimate(k), {}};

  auto heldout_err = [&]() {
    if (!heldout || heldout->inputs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (std::size_t i = 0; i < heldout->inputs.size(); ++i) {
      GridFn d = result.estimate.predict(heldout->inputs[i]);
      d -= heldout->outputs[i];
      const double e = norm(d);
      acc += e * e;
    }
    return acc / heldout->inputs.size();
  };
  auto rel_err = [&]() {
    if (!truth) return std::numeric_limits<double>::quiet_NaN();
    return green_relative_error(result.estimate.matrix(), *truth, k.grid_y(), k.grid_x());
  };
  auto record = [&](std::size_t t, double eta, double res) {
    result.trajectory.push_back({t, eta, res, heldout_err(), rel_err()});
  };

  for (std::size_t t = 1; t <= T; ++t) {
    const bool tick = (t == 1) || (t % metrics_every == 0);
    if (tick) {
      GridFn r = result.estimate.predict(data.inputs[t - 1]);
      r -= data.outputs[t - 1];
      record(t, sched.step_size(t), norm(r));
    }
    green_sgd_step(result.estimate, k, sched, data.inputs[t - 1], data.outputs[t - 1]);
  }
  GridFn r = result.estimate.predict(data.inputs[T - 1]);
  r -= data.outputs[T - 1];
  record(T + 1, sched.step_size(T), norm(r));
  return result;
}

/**
 * Reproducing-property check: for h built from kernel sections, the
 * kernel-space pairing with another section must equal the output-space
 * pairing of the evaluation.  Probes are random bandlimited functions.
 * Returns the largest relative discrepancy.
 */
[[nodiscard]] inline double reproducing_check(const SeparableGreenKernel& k, int n_probes,
                                              std::uint64_t seed) {
  if (n_probes < 1) throw std::invalid_argument("reproducing_check: need at least one probe");
  Rng rng(seed);
  auto random_fn = [&rng](const Grid1D& g) {
    GridFn f = GridFn::zero(g);
    for (int mode = 1; mode <= 4; ++mode) {
      const double ac = rng.normal(), as = rng.normal();
      for (int i = 0; i < g.size(); ++i) {
        const double x = g.points()[i];
        f.values[i] += ac * std::cos(2.0 * M_PI * mode * x) + as * std::sin(2.0 * M_PI * mode * x);
      }
    }
    return f;
  };

  const int n_terms = 5;
  std::vector<GridFn> fs, gs;
  std::vector<double> alphas;
  for (int i = 0; i < n_terms; ++i) {
    fs.push_back(random_fn(k.grid_x()));
    gs.push_back(random_fn(k.grid_y()));
    alphas.push_back(rng.normal());
  }

  double worst = 0.0;
  for (int p = 0; p < n_probes; ++p) {
    const GridFn f = random_fn(k.grid_x());
    const GridFn g = random_fn(k.grid_y());
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < n_terms; ++i) {
      // Kernel-space pairing via the section algebra.
      lhs += alphas[i] * inner(k.apply(fs[i], f, g), gs[i]);
      // Evaluation route: <h(f), g> in the output space.
      rhs += alphas[i] * inner(k.apply(f, fs[i], gs[i]), g);
    }
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

/**
 * Pairing of operator estimates against the scalar product-kernel route:
 * for sums of sections, sum_ij a_i a_j <K(f_i, f_j) g_j, g_i> must equal
 * sum_ij a_i a_j <g_i, K1 g_j> <f_i, K2 f_j>, and both are nonnegative.
 */
struct SectionFormCheck {
  double operator_form;
  double scalar_form;
};

[[nodiscard]] inline SectionFormCheck section_form_check(const SeparableGreenKernel& k,
                                                         const std::vector<GridFn>& fs,
                                                         const std::vector<GridFn>& gs,
                                                         const std::vector<double>& alphas) {
  if (fs.size() != gs.size() || fs.size() != alphas.size())
    throw std::invalid_argument("section_form_check: mismatched term counts");
  double op = 0.0, sc = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    for (std::size_t j = 0; j < fs.size(); ++j) {
      const double a = alphas[i] * alphas[j];
      op += a * inner(k.apply(fs[i], fs[j], gs[j]), gs[i]);
      sc += a * inner(gs[i], k.apply_k1(gs[j])) * inner(fs[i], k.apply_k2(fs[j]));
    }
  }
  return SectionFormCheck{op, sc};
}

}  // namespace opkl
