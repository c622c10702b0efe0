#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "opkl/datagen.hpp"

namespace opkl {

/// Point-evaluation encoder: sample a function at fixed locations.
struct MeasurementSpec {
  Eigen::VectorXd points;

  static MeasurementSpec uniform(int m, double a, double b) {
    if (m < 1) throw std::invalid_argument("MeasurementSpec: need at least one point");
    MeasurementSpec s;
    s.points.resize(m);
    if (m == 1) {
      s.points[0] = 0.5 * (a + b);
    } else {
      for (int i = 0; i < m; ++i) s.points[i] = a + (b - a) * i / (m - 1);
    }
    return s;
  }
};

/// Piecewise-linear point evaluation of a grid function.
[[nodiscard]] inline double eval_linear(const GridFn& f, double xi) {
  const Eigen::VectorXd& xs = f.grid.points();
  const int n = f.grid.size();
  if (xi < xs[0] || xi > xs[n - 1])
    throw std::invalid_argument("eval_linear: point outside the grid domain");
  // Binary search for the bracketing cell.
  int lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (xs[mid] <= xi ? lo : hi) = mid;
  }
  const double w = (xi - xs[lo]) / (xs[hi] - xs[lo]);
  return (1.0 - w) * f.values[lo] + w * f.values[hi];
}

[[nodiscard]] inline Eigen::VectorXd measure(const GridFn& f, const MeasurementSpec& spec) {
  Eigen::VectorXd c(spec.points.size());
  for (int i = 0; i < spec.points.size(); ++i) c[i] = eval_linear(f, spec.points[i]);
  return c;
}

/**
 * Minimum-norm decoder through a scalar kernel: given values c at the
 * measurement points, the lift is xi -> k(xi, points) (k(points, points) +
 * jitter I)^(-1) c.  The factorization is cached at construction.
 */
class Interpolator {
public:
  static Interpolator make(ScalarKernelSpec kernel, Eigen::VectorXd points,
                           double jitter = 1e-10) {
    kernel.validate();
    if (points.size() == 0) throw std::invalid_argument("Interpolator: no points");
    if (jitter < 0.0) throw std::invalid_argument("Interpolator: jitter must be nonnegative");
    Interpolator it;
    it.kernel_ = kernel;
    it.points_ = std::move(points);
    it.jitter_ = jitter;
    const int m = static_cast<int>(it.points_.size());
    Eigen::MatrixXd g(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = kernel.eval(it.points_[i], it.points_[j]);
    g.diagonal().array() += jitter;
    it.gram_ = g;
    it.fact_.compute(g);
    if (it.fact_.info() != Eigen::Success)
      throw linear_solve_error("Interpolator: factorization of the gram matrix failed");
    return it;
  }

  [[nodiscard]] const Eigen::VectorXd& points() const { return points_; }

  /// Expansion coefficients of the minimum-norm interpolant of c.
  [[nodiscard]] Eigen::VectorXd coefficients(const Eigen::VectorXd& c) const {
    if (c.size() != points_.size())
      throw shape_error("Interpolator: value count does not match point count");
    Eigen::VectorXd alpha = fact_.solve(c);
    const double scale = c.norm();
    if ((gram_ * alpha - c).norm() > 1e-8 * std::max(scale, 1.0) || !alpha.allFinite())
      throw linear_solve_error("Interpolator: gram system is numerically singular");
    return alpha;
  }

  [[nodiscard]] double evaluate(const Eigen::VectorXd& alpha, double xi) const {
    double acc = 0.0;
    for (int i = 0; i < points_.size(); ++i) acc += alpha[i] * kernel_.eval(xi, points_[i]);
    return acc;
  }

  /// Lift measurement values c to a function on the grid.
  [[nodiscard]] GridFn lift(const Eigen::VectorXd& c, const Grid1D& grid) const {
    const Eigen::VectorXd alpha = coefficients(c);
    GridFn out = GridFn::zero(grid);
    for (int i = 0; i < grid.size(); ++i) out.values[i] = evaluate(alpha, grid.points()[i]);
    return out;
  }

private:
  ScalarKernelSpec kernel_;
  Eigen::VectorXd points_;
  double jitter_ = 0.0;
  Eigen::MatrixXd gram_;
  Eigen::LDLT<Eigen::MatrixXd> fact_;
};

struct ProjectionCheck {
  double roundtrip_err;    // measure(lift(c)) vs c, max over probes
  double idempotency_err;  // P(P f) vs P f in L2, max over probes
};

/**
 * encode-then-decode diagnostics: measuring a lift must reproduce the
 * measurement vector, and the composite projection P = lift of measure must
 * be idempotent on functions.
 */
[[nodiscard]] inline ProjectionCheck projection_check(const Interpolator& interp,
                                                      const MeasurementSpec& spec,
                                                      const std::vector<GridFn>& probes) {
  if (probes.empty()) throw std::invalid_argument("projection_check: no probes");
  double rt = 0.0, idem = 0.0;
  for (const GridFn& f : probes) {
    const Eigen::VectorXd c = measure(f, spec);
    const GridFn lifted = interp.lift(c, f.grid);
    rt = std::max(rt, (measure(lifted, spec) - c).norm() / std::max(c.norm(), 1e-12));
    const GridFn once = interp.lift(measure(f, spec), f.grid);
    const GridFn twice = interp.lift(measure(once, spec), f.grid);
    idem = std::max(idem, norm(twice - once) / std::max(norm(once), 1e-12));
  }
  return ProjectionCheck{rt, idem};
}

/// Principal-component encoder fitted to a sample of coefficient vectors.
struct PcaBasis {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;       // dim x p, orthonormal columns
  Eigen::VectorXd singular_values;  // all of them, descending
  int p = 0;

  [[nodiscard]] Eigen::VectorXd encode(const Eigen::VectorXd& v) const {
    if (v.size() != mean.size()) throw shape_error("PcaBasis::encode: dimension mismatch");
    return components.transpose() * (v - mean);
  }
  [[nodiscard]] Eigen::VectorXd decode(const Eigen::VectorXd& c) const {
    if (c.size() != p) throw shape_error("PcaBasis::decode: coefficient count mismatch");
    return mean + components * c;
  }

  /// Mean squared reconstruction error over the fitting sample equals the
  /// discarded spectrum: sum of squared singular values beyond p divided by
  /// the sample count.
  [[nodiscard]] double discarded_energy(int sample_count) const {
    double s = 0.0;
    for (int j = p; j < singular_values.size(); ++j)
      s += singular_values[j] * singular_values[j];
    return s / sample_count;
  }
};

[[nodiscard]] inline PcaBasis pca_fit(const std::vector<Eigen::VectorXd>& samples, int p) {
  if (samples.empty()) throw std::invalid_argument("pca_fit: no samples");
  const int dim = static_cast<int>(samples[0].size());
  const int n = static_cast<int>(samples.size());
  if (p < 1 || p > std::min(dim, n))
    throw std::invalid_argument("pca_fit: p must lie in [1, min(dim, sample count)]");
  Eigen::MatrixXd x(n, dim);
  for (int i = 0; i < n; ++i) {
    if (samples[i].size() != dim) throw shape_error("pca_fit: inconsistent sample dimensions");
    x.row(i) = samples[i];
  }
  PcaBasis basis;
  basis.mean = x.colwise().mean();
  x.rowwise() -= basis.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  basis.components = svd.matrixV().leftCols(p);
  basis.singular_values = svd.singularValues();
  basis.p = p;
  return basis;
}

enum class ReductionKind { points, pca };

/// How one side (input or output) of the operator data is reduced.
struct ReductionSpec {
  ReductionKind kind = ReductionKind::points;
  MeasurementSpec measurement;       // points
  ScalarKernelSpec lift_kernel;      // points: kernel of the minimum-norm lift
  double jitter = 1e-10;             // points
  int p = 0;                         // pca
};

/// Fitted encoder/decoder pair for one side.
class Codec {
public:
  static Codec fit(const ReductionSpec& spec, const std::vector<GridFn>& train,
                   const Grid1D& grid) {
    Codec c;
    c.kind_ = spec.kind;
    c.grid_ = grid;
    if (spec.kind == ReductionKind::points) {
      c.spec_ = spec.measurement;
      c.interp_ = Interpolator::make(spec.lift_kernel, spec.measurement.points, spec.jitter);
    } else {
      std::vector<Eigen::VectorXd> vals;
      vals.reserve(train.size());
      for (const GridFn& f : train) vals.push_back(f.values);
      c.pca_ = pca_fit(vals, spec.p);
    }
    return c;
  }

  [[nodiscard]] int dim() const {
    return kind_ == ReductionKind::points ? static_cast<int>(spec_.points.size()) : pca_->p;
  }

  [[nodiscard]] Eigen::VectorXd encode(const GridFn& f) const {
    return kind_ == ReductionKind::points ? measure(f, spec_) : pca_->encode(f.values);
  }

  [[nodiscard]] GridFn decode(const Eigen::VectorXd& c) const {
    if (kind_ == ReductionKind::points) return interp_->lift(c, grid_);
    return GridFn(grid_, pca_->decode(c));
  }

private:
  ReductionKind kind_ = ReductionKind::points;
  Grid1D grid_;
  MeasurementSpec spec_;
  std::optional<Interpolator> interp_;
  std::optional<PcaBasis> pca_;
};

struct EncDecTrajectoryRow {
  std::size_t t;
  double reduced_err;   // mean relative error of encoded predictions, held out
  double full_rel_err;  // mean relative L2 error of decoded predictions, held out
};

struct EncDecResult {
  IterateState<DiagonalKernel> state;
  std::vector<EncDecTrajectoryRow> trajectory;
  Codec input_codec, output_codec;
};

/**
 * Reduce operator data to vector pairs, run the generic learner with the
 * radial kernel acting identically on the reduced output space, and score
 * both in the reduced space and after decoding.  Codecs are fitted on the
 * training split only.
 */
inline EncDecResult encdec_run(const FunctionDataset& data, const ReductionSpec& input_red,
                               const ReductionSpec& output_red, ScalarKernelSpec sgd_kernel,
                               const StepSchedule& sched, std::size_t metrics_every,
                               std::size_t max_steps = 0) {
  if (!sgd_kernel.is_radial())
    throw std::invalid_argument("encdec_run: the learner kernel must be radial");
  if (data.train_idx.empty() || data.test_idx.empty())
    throw std::invalid_argument("encdec_run: dataset must carry train and test splits");

  std::vector<GridFn> train_in, train_out;
  for (int i : data.train_idx) {
    train_in.push_back(data.inputs[i]);
    train_out.push_back(data.outputs[i]);
  }
  EncDecResult result{
      {}, {}, Codec::fit(input_red, train_in, data.grid), Codec::fit(output_red, train_out, data.grid)};
  const Codec& ci = result.input_codec;
  const Codec& co = result.output_codec;

  Dataset<DiagonalKernel> reduced;
  const std::size_t T0 = max_steps == 0 ? train_in.size() : std::min(max_steps, train_in.size());
  for (std::size_t i = 0; i < T0; ++i) {
    reduced.inputs.push_back(ci.encode(train_in[i]));
    reduced.outputs.push_back(co.encode(train_out[i]));
  }
  std::vector<Eigen::VectorXd> test_cin;
  std::vector<Eigen::VectorXd> test_cout;
  for (int i : data.test_idx) {
    test_cin.push_back(ci.encode(data.inputs[i]));
    test_cout.push_back(co.encode(data.outputs[i]));
  }

  const DiagonalKernel k = DiagonalKernel::identity(sgd_kernel, co.dim());
  auto heldout = [&](const IterateState<DiagonalKernel>& st) {
    double red = 0.0, full = 0.0;
    for (std::size_t i = 0; i < test_cin.size(); ++i) {
      const int idx = data.test_idx[i];
      const Eigen::VectorXd pred = predict(st, k, test_cin[i]);
      red += (pred - test_cout[i]).norm() / std::max(test_cout[i].norm(), 1e-12);
      const GridFn lifted = co.decode(pred);
      full += norm(lifted - data.outputs[idx]) / std::max(norm(data.outputs[idx]), 1e-12);
    }
    return std::make_pair(red / test_cin.size(), full / test_cin.size());
  };

  std::vector<Metric<DiagonalKernel>> metrics;  // errors recorded via rows below
  RunResult<DiagonalKernel> rr = run(reduced, k, sched, metrics_every, metrics);
  // Re-walk the trajectory ticks to score held-out errors at those states.
  // The state is append-only, so truncated views reproduce each iterate.
  result.state = std::move(rr.state);
  IterateState<DiagonalKernel> view;
  for (const TrajectoryRow& row : rr.trajectory) {
    const std::size_t steps = row.t - 1;  // iterate h_t has t - 1 terms
    view.centers.assign(result.state.centers.begin(), result.state.centers.begin() + steps);
    view.coeffs.assign(result.state.coeffs.begin(), result.state.coeffs.begin() + steps);
    const auto [red, full] = heldout(view);
    result.trajectory.push_back({row.t, red, full});
  }
  return result;
}

}  // namespace opkl
