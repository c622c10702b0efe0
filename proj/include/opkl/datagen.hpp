#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "opkl/greens.hpp"

namespace opkl {

/**
 * Gaussian process on [0, 1] with a Matern-like periodic spectrum: the
 * covariance eigenvalues are mu_0 = tau^(-2 alpha) on the constant mode and
 * mu_k = (4 pi^2 k^2 + tau^2)^(-alpha) on the frequency-k cosine and sine
 * modes.  Draws are truncated Karhunen-Loeve expansions.
 */
struct GpSpec {
  double tau = 3.0;
  double alpha = 2.0;
  int n_modes = 16;  // frequencies 1..n_modes, two basis functions each

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("GpSpec: tau must be positive");
    if (!(alpha > 0.0)) throw std::invalid_argument("GpSpec: alpha must be positive");
    if (n_modes < 0) throw std::invalid_argument("GpSpec: n_modes must be nonnegative");
  }

  [[nodiscard]] double mu0() const { return std::pow(tau, -2.0 * alpha); }
  [[nodiscard]] double mu(int k) const {
    return std::pow(4.0 * M_PI * M_PI * k * k + tau * tau, -alpha);
  }
};

/// One GP draw on the grid.  Draw order: constant mode, then per frequency
/// the cosine then sine coefficient.
[[nodiscard]] inline GridFn sample_gp(const GpSpec& spec, const Grid1D& grid, Rng& rng) {
  spec.validate();
  GridFn f = GridFn::zero(grid);
  f.values.array() += std::sqrt(spec.mu0()) * rng.normal();
  const double s2 = std::sqrt(2.0);
  for (int k = 1; k <= spec.n_modes; ++k) {
    const double amp = std::sqrt(spec.mu(k));
    const double zc = rng.normal(), zs = rng.normal();
    for (int i = 0; i < grid.size(); ++i) {
      const double x = grid.points()[i];
      f.values[i] += amp * s2 * (zc * std::cos(2.0 * M_PI * k * x) + zs * std::sin(2.0 * M_PI * k * x));
    }
  }
  return f;
}

/**
 * Periodic heat propagator: project onto the real Fourier basis by
 * quadrature, scale frequency k by exp(-nu (2 pi k)^2 t_end), leave the
 * constant mode unchanged, and resynthesize.  Frequencies above the grid's
 * reliable band are dropped.
 */
[[nodiscard]] inline GridFn heat_forward(const GridFn& f, double nu, double t_end) {
  if (!(nu > 0.0)) throw std::invalid_argument("heat_forward: nu must be positive");
  if (!(t_end >= 0.0)) throw std::invalid_argument("heat_forward: t_end must be nonnegative");
  const Grid1D& g = f.grid;
  const double len = g.b() - g.a();
  const int kmax = (g.size() - 1) / 2 - 1;
  if (kmax < 1) throw std::invalid_argument("heat_forward: grid too coarse for any frequency");
  GridFn out = GridFn::zero(g);
  const double c0 = integrate(f) / len;
  out.values.array() += c0;
  const double s2 = std::sqrt(2.0);
  GridFn basis = GridFn::zero(g);
  for (int k = 1; k <= kmax; ++k) {
    const double damp = std::exp(-nu * std::pow(2.0 * M_PI * k / len, 2.0) * t_end);
    for (int trig = 0; trig < 2; ++trig) {
      for (int i = 0; i < g.size(); ++i) {
        const double ph = 2.0 * M_PI * k * (g.points()[i] - g.a()) / len;
        basis.values[i] = s2 * (trig == 0 ? std::cos(ph) : std::sin(ph));
      }
      const double coef = inner(f, basis) / len;
      out.values += damp * coef * basis.values;
    }
  }
  return out;
}

enum class ForwardKind { poisson, heat, custom };

struct ForwardSpec {
  ForwardKind kind = ForwardKind::poisson;
  double nu = 0.025;    // heat
  double t_end = 1.0;   // heat
  std::optional<Eigen::MatrixXd> custom_green;
};

struct DatasetSpec {
  ForwardSpec forward;
  GpSpec gp;
  double noise_sigma = 0.0;  // E |eps|_L2^2 = noise_sigma^2
  int count = 0;
  std::uint64_t seed = 0;
};

/// Operator-learning sample: input/output function pairs with a fixed
/// train/validation/test split.
struct FunctionDataset {
  Grid1D grid;
  std::vector<GridFn> inputs;
  std::vector<GridFn> outputs;
  std::vector<int> train_idx, val_idx, test_idx;

  [[nodiscard]] Dataset<SeparableGreenKernel> split(const std::vector<int>& idx) const {
    Dataset<SeparableGreenKernel> d;
    for (int i : idx) {
      d.inputs.push_back(inputs[i]);
      d.outputs.push_back(outputs[i]);
    }
    return d;
  }
};

/**
 * Draw inputs from the GP, push them through the forward map, add white
 * observation noise on the grid scaled so that E |eps|_L2^2 = sigma^2, and
 * split 70/15/15 by a seeded shuffle.  Everything is a pure function of
 * (spec, grid), so regeneration is bit identical.
 */
[[nodiscard]] inline FunctionDataset make_dataset(const DatasetSpec& spec, const Grid1D& grid) {
  if (spec.count < 1) throw std::invalid_argument("make_dataset: count must be positive");
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("make_dataset: negative noise");
  spec.gp.validate();
  FunctionDataset ds;
  ds.grid = grid;
  Rng rng(spec.seed);

  std::optional<Eigen::MatrixXd> green;
  if (spec.forward.kind == ForwardKind::poisson) {
    green = poisson_green_oracle(grid);
  } else if (spec.forward.kind == ForwardKind::custom) {
    if (!spec.forward.custom_green)
      throw std::invalid_argument("make_dataset: custom forward needs a kernel matrix");
    green = *spec.forward.custom_green;
  }

  const double pt_noise = spec.noise_sigma / std::sqrt(grid.b() - grid.a());
  for (int i = 0; i < spec.count; ++i) {
    GridFn f = sample_gp(spec.gp, grid, rng);
    GridFn u = green ? apply_green(*green, grid, f)
                     : heat_forward(f, spec.forward.nu, spec.forward.t_end);
    if (spec.noise_sigma > 0.0) {
      for (int j = 0; j < grid.size(); ++j) u.values[j] += pt_noise * rng.normal();
    }
    ds.inputs.push_back(std::move(f));
    ds.outputs.push_back(std::move(u));
  }

  std::vector<int> order(spec.count);
  for (int i = 0; i < spec.count; ++i) order[i] = i;
  shuffle(order, rng);
  const int n_train = static_cast<int>(0.7 * spec.count);
  const int n_val = static_cast<int>(0.15 * spec.count);
  ds.train_idx.assign(order.begin(), order.begin() + n_train);
  ds.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  ds.test_idx.assign(order.begin() + n_train + n_val, order.end());
  return ds;
}

}  // namespace opkl
