#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "opkl/grid.hpp"

namespace opkl {

enum class KernelFamily {
  gaussian,
  matern12,
  matern32,
  matern52,
  inverse_multiquadric,
  dot_product,
};

[[nodiscard]] inline std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::matern12: return "matern12";
    case KernelFamily::matern32: return "matern32";
    case KernelFamily::matern52: return "matern52";
    case KernelFamily::inverse_multiquadric: return "inverse-multiquadric";
    case KernelFamily::dot_product: return "dot-product";
  }
  return "?";
}

[[nodiscard]] inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "gaussian") return KernelFamily::gaussian;
  if (s == "matern12") return KernelFamily::matern12;
  if (s == "matern32") return KernelFamily::matern32;
  if (s == "matern52") return KernelFamily::matern52;
  if (s == "inverse-multiquadric") return KernelFamily::inverse_multiquadric;
  if (s == "dot-product") return KernelFamily::dot_product;
  throw std::invalid_argument("unknown kernel family: " + s);
}

/**
 * Scalar kernel in closed form.
 *
 * All families except dot-product are radial: they depend on the inputs only
 * through the Euclidean distance.  lengthscale is ignored by dot-product.
 */
struct ScalarKernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double lengthscale = 1.0;
  double amplitude = 1.0;

  void validate() const {
    if (!(amplitude > 0.0))
      throw std::invalid_argument("ScalarKernelSpec: amplitude must be positive");
    if (family != KernelFamily::dot_product && !(lengthscale > 0.0))
      throw std::invalid_argument("ScalarKernelSpec: lengthscale must be positive");
  }

  [[nodiscard]] bool is_radial() const { return family != KernelFamily::dot_product; }

  /// Evaluate a radial family at distance d >= 0.
  [[nodiscard]] double radial(double d) const {
    validate();
    if (!is_radial())
      throw std::invalid_argument("ScalarKernelSpec::radial: dot-product is not radial");
    const double u = d / lengthscale;
    switch (family) {
      case KernelFamily::gaussian:
        return amplitude * std::exp(-0.5 * u * u);
      case KernelFamily::matern12:
        return amplitude * std::exp(-u);
      case KernelFamily::matern32: {
        const double s = std::sqrt(3.0) * u;
        return amplitude * (1.0 + s) * std::exp(-s);
      }
      case KernelFamily::matern52: {
        const double s = std::sqrt(5.0) * u;
        return amplitude * (1.0 + s + s * s / 3.0) * std::exp(-s);
      }
      case KernelFamily::inverse_multiquadric:
        return amplitude / std::sqrt(1.0 + u * u);
      default:
        return 0.0;
    }
  }

  [[nodiscard]] double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& x2) const {
    if (x.size() != x2.size())
      throw shape_error("ScalarKernelSpec::eval: inputs have different dimensions");
    if (family == KernelFamily::dot_product) {
      validate();
      return amplitude * x.dot(x2);
    }
    return radial((x - x2).norm());
  }

  [[nodiscard]] double eval(double x, double x2) const {
    if (family == KernelFamily::dot_product) {
      validate();
      return amplitude * x * x2;
    }
    return radial(std::abs(x - x2));
  }
};

[[nodiscard]] inline Eigen::MatrixXd gram(const ScalarKernelSpec& k,
                                          const std::vector<Eigen::VectorXd>& pts) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      g(i, j) = k.eval(pts[i], pts[j]);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

/**
 * Operator-valued kernel K(x, x') = k(x, x') * diag(t) acting on R^m.
 */
struct DiagonalKernel {
  using Input = Eigen::VectorXd;
  using Output = Eigen::VectorXd;

  ScalarKernelSpec scalar;
  Eigen::VectorXd diag_t;

  static DiagonalKernel make(ScalarKernelSpec k, Eigen::VectorXd t) {
    k.validate();
    if (t.size() == 0 || (t.array() <= 0.0).any())
      throw std::invalid_argument("DiagonalKernel: diagonal entries must be positive");
    return DiagonalKernel{std::move(k), std::move(t)};
  }

  static DiagonalKernel identity(ScalarKernelSpec k, int m) {
    return make(std::move(k), Eigen::VectorXd::Ones(m));
  }

  [[nodiscard]] Output apply(const Input& x, const Input& x2, const Output& y) const {
    if (y.size() != diag_t.size())
      throw shape_error("DiagonalKernel::apply: output dimension mismatch");
    return scalar.eval(x, x2) * diag_t.cwiseProduct(y);
  }

  [[nodiscard]] Output zero_output() const { return Output::Zero(diag_t.size()); }

  /// Operator norm of K(x, x).
  [[nodiscard]] double kappa_at(const Input& x) const {
    return scalar.eval(x, x) * diag_t.maxCoeff();
  }
};

/**
 * Separable kernel for learning integral operators: inputs and outputs are
 * functions, K(f1, f2) g = <f1, K2 f2> * (K1 g) with K1, K2 the integral
 * operators of two scalar kernels on the output and input domains.
 */
class SeparableGreenKernel {
public:
  using Input = GridFn;
  using Output = GridFn;

  static SeparableGreenKernel make(ScalarKernelSpec k1, ScalarKernelSpec k2,
                                   const Grid1D& grid_y, const Grid1D& grid_x) {
    k1.validate();
    k2.validate();
    SeparableGreenKernel k;
    k.k1_ = k1;
    k.k2_ = k2;
    k.gy_ = grid_y;
    k.gx_ = grid_x;
    k.k1_mat_ = kernel_matrix(k1, grid_y, grid_y);
    k.k2_mat_ = kernel_matrix(k2, grid_x, grid_x);
    // Operator norm of K1 on L2(grid_y): largest eigenvalue of the
    // symmetrized discretization W^(1/2) K1 W^(1/2).
    Eigen::VectorXd sw = grid_y.weights().array().sqrt();
    Eigen::MatrixXd sym = sw.asDiagonal() * k.k1_mat_ * sw.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    k.k1_op_norm_ = es.eigenvalues().cwiseAbs().maxCoeff();
    return k;
  }

  [[nodiscard]] const Grid1D& grid_y() const { return gy_; }
  [[nodiscard]] const Grid1D& grid_x() const { return gx_; }
  [[nodiscard]] const ScalarKernelSpec& k1() const { return k1_; }
  [[nodiscard]] const ScalarKernelSpec& k2() const { return k2_; }
  [[nodiscard]] double k1_operator_norm() const { return k1_op_norm_; }

  /// Integral operator of k1 applied to a function on grid_y.
  [[nodiscard]] GridFn apply_k1(const GridFn& g) const {
    if (g.grid != gy_) throw shape_error("SeparableGreenKernel: function not on output grid");
    return GridFn(gy_, k1_mat_ * g.grid.weights().cwiseProduct(g.values));
  }

  /// Integral operator of k2 applied to a function on grid_x.
  [[nodiscard]] GridFn apply_k2(const GridFn& f) const {
    if (f.grid != gx_) throw shape_error("SeparableGreenKernel: function not on input grid");
    return GridFn(gx_, k2_mat_ * f.grid.weights().cwiseProduct(f.values));
  }

  [[nodiscard]] Output apply(const Input& x, const Input& x2, const Output& y) const {
    const double c = inner(x, apply_k2(x2));
    GridFn out = apply_k1(y);
    out *= c;
    return out;
  }

  [[nodiscard]] Output zero_output() const { return GridFn::zero(gy_); }

  /// Operator norm of K(f, f) = <f, K2 f> * K1.
  [[nodiscard]] double kappa_at(const Input& f) const {
    return inner(f, apply_k2(f)) * k1_op_norm_;
  }

private:
  static Eigen::MatrixXd kernel_matrix(const ScalarKernelSpec& k, const Grid1D& rows,
                                       const Grid1D& cols) {
    Eigen::MatrixXd m(rows.size(), cols.size());
    for (int i = 0; i < rows.size(); ++i)
      for (int j = 0; j < cols.size(); ++j) m(i, j) = k.eval(rows.points()[i], cols.points()[j]);
    return m;
  }

  ScalarKernelSpec k1_, k2_;
  Grid1D gy_, gx_;
  Eigen::MatrixXd k1_mat_, k2_mat_;
  double k1_op_norm_ = 0.0;
};

/**
 * Radial kernel on encoded inputs, identity action on the reduced output
 * space.  The projection onto that space is applied by the caller, so apply
 * is simply k(|x - x2|) * y.
 */
struct ProjectedRadialKernel {
  using Input = Eigen::VectorXd;
  using Output = Eigen::VectorXd;

  ScalarKernelSpec scalar;
  int output_dim = 0;

  static ProjectedRadialKernel make(ScalarKernelSpec k, int output_dim) {
    k.validate();
    if (!k.is_radial())
      throw std::invalid_argument("ProjectedRadialKernel: kernel must be radial");
    if (output_dim < 1)
      throw std::invalid_argument("ProjectedRadialKernel: output_dim must be positive");
    return ProjectedRadialKernel{std::move(k), output_dim};
  }

  [[nodiscard]] Output apply(const Input& x, const Input& x2, const Output& y) const {
    if (y.size() != output_dim)
      throw shape_error("ProjectedRadialKernel::apply: output dimension mismatch");
    return scalar.radial((x - x2).norm()) * y;
  }

  [[nodiscard]] Output zero_output() const { return Output::Zero(output_dim); }

  [[nodiscard]] double kappa_at(const Input&) const { return scalar.radial(0.0); }
};

// Output-space inner product and norm, overloaded per output type.
[[nodiscard]] inline double y_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b);
}
[[nodiscard]] inline double y_inner(const GridFn& a, const GridFn& b) { return inner(a, b); }
[[nodiscard]] inline double y_norm(const Eigen::VectorXd& a) { return a.norm(); }
[[nodiscard]] inline double y_norm(const GridFn& a) { return norm(a); }

/// Largest operator norm of K(x, x) over a probe set.
template <class Kernel>
[[nodiscard]] double kappa_sq(const Kernel& k, const std::vector<typename Kernel::Input>& probes) {
  if (probes.empty()) throw std::invalid_argument("kappa_sq: probe set is empty");
  double best = 0.0;
  for (const auto& x : probes) best = std::max(best, k.kappa_at(x));
  return best;
}

/// Quadratic form sum_ij <K(x_i, x_j) y_j, y_i>; nonnegative for a positive
/// semidefinite operator kernel.
template <class Kernel>
[[nodiscard]] double psd_quadratic_form(const Kernel& k,
                                        const std::vector<typename Kernel::Input>& xs,
                                        const std::vector<typename Kernel::Output>& ys) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("psd_quadratic_form: point and value counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < xs.size(); ++j) s += y_inner(k.apply(xs[i], xs[j], ys[j]), ys[i]);
  return s;
}

}  // namespace opkl
