#pragma once

#include <cstdio>
#include <functional>
#include <limits>
#include <vector>

#include "opkl/kernels.hpp"

namespace opkl {

enum class ScheduleMode { online, finite_horizon };

/**
 * Step-size schedule for the single-pass iteration.
 *
 * online:         eta_t = eta1 * t^(-theta), any horizon.
 * finite_horizon: eta_t = eta * T^(-theta'), constant over a run of length T.
 */
class StepSchedule {
public:
  static StepSchedule online(double eta1, double theta) {
    if (!(eta1 > 0.0)) throw std::invalid_argument("StepSchedule: eta1 must be positive");
    if (!(theta > 0.0 && theta < 1.0))
      throw std::invalid_argument("StepSchedule: theta must lie in (0, 1)");
    StepSchedule s;
    s.mode_ = ScheduleMode::online;
    s.eta1_ = eta1;
    s.theta_ = theta;
    return s;
  }

  static StepSchedule finite_horizon(double eta, double theta_prime, std::size_t horizon) {
    if (!(eta > 0.0)) throw std::invalid_argument("StepSchedule: eta must be positive");
    if (!(theta_prime > 0.0 && theta_prime < 1.0))
      throw std::invalid_argument("StepSchedule: theta' must lie in (0, 1)");
    if (horizon == 0) throw std::invalid_argument("StepSchedule: horizon must be positive");
    StepSchedule s;
    s.mode_ = ScheduleMode::finite_horizon;
    s.eta1_ = eta;
    s.theta_ = theta_prime;
    s.horizon_ = horizon;
    return s;
  }

  [[nodiscard]] ScheduleMode mode() const { return mode_; }
  [[nodiscard]] double eta1() const { return eta1_; }
  [[nodiscard]] double theta() const { return theta_; }
  [[nodiscard]] std::size_t horizon() const { return horizon_; }

  /// Step size for 1-based step index t.
  [[nodiscard]] double step_size(std::size_t t) const {
    if (t == 0) throw std::invalid_argument("StepSchedule::step_size: t is 1-based");
    if (mode_ == ScheduleMode::online) return eta1_ * std::pow(static_cast<double>(t), -theta_);
    if (t > horizon_)
      throw std::invalid_argument("StepSchedule::step_size: t exceeds the horizon");
    return eta1_ * std::pow(static_cast<double>(horizon_), -theta_);
  }

private:
  ScheduleMode mode_ = ScheduleMode::online;
  double eta1_ = 0.0;
  double theta_ = 0.0;
  std::size_t horizon_ = 0;
};

struct ScheduleBounds {
  double gamma;     // admissible step-size scale from the convergence analysis
  double max_step;  // min over the full bracket, using 1/kappa_sq for the
                    // unobservable inverse operator norm
};

/**
 * Advisory step-size bounds.
 *
 * With trace_lks <= 0 the capacity-independent constants are used; otherwise
 * the capacity-dependent ones with Tr(L_K^s).  delta is the absolute constant
 * of the underlying analysis and is not explicit there; callers supply a
 * value (1 is a reasonable default).  Bounds are conservative by design and
 * runs are not clamped to them.
 */
[[nodiscard]] inline ScheduleBounds schedule_bounds(double kappa_sq, double theta,
                                                    double trace_lks, double s, double delta,
                                                    ScheduleMode mode) {
  if (!(kappa_sq > 0.0)) throw std::invalid_argument("schedule_bounds: kappa_sq must be positive");
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("schedule_bounds: theta must lie in (0, 1)");
  double gamma = 0.0;
  if (trace_lks > 0.0) {
    const double cap = kappa_sq * trace_lks * (1.0 + std::pow(kappa_sq, 1.0 - s));
    if (mode == ScheduleMode::online) {
      if (s < 1.0) {
        gamma = (1.0 - s) / (8.0 * cap * (delta + 1.0));
      } else {
        // s = 1 branch; degenerate (nonpositive) unless theta > 1/2.
        gamma = (2.0 * theta - 1.0) / (16.0 * cap * (delta + 1.0) * theta);
      }
    } else {
      gamma = s / (16.0 * cap * (s + 1.0));
    }
  } else {
    const double base = 4.0 * kappa_sq * (1.0 + 2.0 * kappa_sq);
    gamma = (mode == ScheduleMode::online) ? theta / (base * (delta + 1.0))
                                           : theta / (base * (1.0 + 2.0 * theta));
  }
  const double horizon_cap = (mode == ScheduleMode::online) ? 1.0 - theta : 1.0;
  return ScheduleBounds{gamma, std::min({1.0 / kappa_sq, horizon_cap, gamma})};
}

/// Sample pairs for a single-pass run.
template <class Kernel>
struct Dataset {
  std::vector<typename Kernel::Input> inputs;
  std::vector<typename Kernel::Output> outputs;

  [[nodiscard]] std::size_t size() const { return inputs.size(); }
};

/**
 * Kernel-expansion iterate h = sum_t coeffs[t] weighted kernel sections at
 * centers[t].  The iteration starts from the zero function: empty state.
 */
template <class Kernel>
struct IterateState {
  std::vector<typename Kernel::Input> centers;
  std::vector<typename Kernel::Output> coeffs;

  [[nodiscard]] std::size_t steps() const { return centers.size(); }
};

template <class Kernel>
[[nodiscard]] typename Kernel::Output predict(const IterateState<Kernel>& state, const Kernel& k,
                                              const typename Kernel::Input& x) {
  typename Kernel::Output acc = k.zero_output();
  for (std::size_t i = 0; i < state.centers.size(); ++i)
    acc += k.apply(x, state.centers[i], state.coeffs[i]);
  return acc;
}

/**
 * One stochastic step: append the section at x with coefficient
 * -eta_t (h_t(x) - y).  Returns the norm of the residual h_t(x) - y.
 */
template <class Kernel>
double sgd_step(IterateState<Kernel>& state, const Kernel& k, const StepSchedule& sched,
                const typename Kernel::Input& x, const typename Kernel::Output& y) {
  const std::size_t t = state.steps() + 1;
  const double eta = sched.step_size(t);
  typename Kernel::Output residual = predict(state, k, x);
  residual -= y;
  const double rnorm = y_norm(residual);
  if (!std::isfinite(rnorm)) throw numeric_error("sgd_step: residual is not finite");
  residual *= -eta;
  state.centers.push_back(x);
  state.coeffs.push_back(std::move(residual));
  return rnorm;
}

template <class Kernel>
struct Metric {
  std::string name;
  std::function<double(const IterateState<Kernel>&, std::size_t)> fn;
};

struct TrajectoryRow {
  std::size_t t;          // iterate index; the final row is at T + 1
  double step_size;
  double train_residual;  // |h_t(x_t) - y_t|; for the final row the iterate
                          // after the pass evaluated on the last sample
  std::vector<double> extra;
};

template <class Kernel>
struct RunResult {
  IterateState<Kernel> state;
  std::vector<TrajectoryRow> trajectory;
  std::vector<std::string> metric_names;
  bool step_size_warning = false;
};

/**
 * Single pass over the dataset.  Metric rows are recorded at iterate indices
 * 1, metrics_every, 2*metrics_every, ... plus one final row for the iterate
 * after the pass.
 */
template <class Kernel>
RunResult<Kernel> run(const Dataset<Kernel>& data, const Kernel& k, const StepSchedule& sched,
                      std::size_t metrics_every, const std::vector<Metric<Kernel>>& metrics = {}) {
  if (data.inputs.empty()) throw std::invalid_argument("run: dataset is empty");
  if (data.inputs.size() != data.outputs.size())
    throw std::invalid_argument("run: input and output counts differ");
  if (metrics_every == 0) throw std::invalid_argument("run: metrics_every must be positive");
  const std::size_t T = (sched.mode() == ScheduleMode::finite_horizon)
                            ? std::min<std::size_t>(data.size(), sched.horizon())
                            : data.size();

  RunResult<Kernel> result;
  for (const auto& m : metrics) result.metric_names.push_back(m.name);

  // A first step of size >= 1/kappa_sq mostly overwrites the iterate
  // instead of averaging; flag it but keep going.
  {
    std::vector<typename Kernel::Input> probes;
    for (std::size_t i = 0; i < std::min<std::size_t>(data.size(), 64); ++i)
      probes.push_back(data.inputs[i]);
    const double ks = kappa_sq(k, probes);
    if (sched.step_size(1) * ks >= 1.0) {
      result.step_size_warning = true;
      std::fprintf(stderr,
                   "warning: first step size %.3g * kappa_sq %.3g >= 1, early updates may overshoot\n",
                   sched.step_size(1), ks);
    }
  }

  auto record = [&](std::size_t t, double eta, double res) {
    TrajectoryRow row{t, eta, res, {}};
    row.extra.reserve(metrics.size());
    for (const auto& m : metrics) row.extra.push_back(m.fn(result.state, t));
    result.trajectory.push_back(std::move(row));
  };

  for (std::size_t t = 1; t <= T; ++t) {
    const bool tick = (t == 1) || (t % metrics_every == 0);
    const typename Kernel::Input& x = data.inputs[t - 1];
    const typename Kernel::Output& y = data.outputs[t - 1];
    if (tick) {
      // Residual of the step about to be taken, reported for iterate h_t.
      typename Kernel::Output r = predict(result.state, k, x);
      r -= y;
      record(t, sched.step_size(t), y_norm(r));
    }
    sgd_step(result.state, k, sched, x, y);
  }
  // Final iterate, evaluated on the last visited sample.
  typename Kernel::Output r = predict(result.state, k, data.inputs[T - 1]);
  r -= data.outputs[T - 1];
  record(T + 1, sched.step_size(T), y_norm(r));
  return result;
}

}  // namespace opkl
