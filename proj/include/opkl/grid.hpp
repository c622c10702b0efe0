#pragma once

#include <Eigen/Core>
#include <string>

#include "opkl/common.hpp"

namespace opkl {

/**
 * One-dimensional quadrature grid on [a, b].
 *
 * Points are strictly ascending and carry composite trapezoid weights.  Two
 * grids are considered the same discretization when they have the same size
 * and endpoints; mixing functions from different discretizations is an error,
 * never an implicit resample.
 */
class Grid1D {
public:
  Grid1D() = default;

  static Grid1D uniform(int n, double a, double b) {
    if (n < 2) throw std::invalid_argument("Grid1D::uniform: need at least 2 points");
    if (!(a < b)) throw std::invalid_argument("Grid1D::uniform: need a < b");
    Grid1D g;
    g.pts_.resize(n);
    g.w_.resize(n);
    const double h = (b - a) / (n - 1);
    for (int i = 0; i < n; ++i) {
      g.pts_[i] = a + h * i;
      g.w_[i] = (i == 0 || i == n - 1) ? 0.5 * h : h;
    }
    g.pts_[n - 1] = b;
    return g;
  }

  /// Build from ascending points (general composite trapezoid weights).
  static Grid1D from_points(const Eigen::VectorXd& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 2) throw std::invalid_argument("Grid1D::from_points: need at least 2 points");
    for (int i = 1; i < n; ++i) {
      if (!(pts[i] > pts[i - 1]))
        throw std::invalid_argument("Grid1D::from_points: points must be strictly ascending");
    }
    Grid1D g;
    g.pts_ = pts;
    g.w_.resize(n);
    g.w_[0] = 0.5 * (pts[1] - pts[0]);
    g.w_[n - 1] = 0.5 * (pts[n - 1] - pts[n - 2]);
    for (int i = 1; i < n - 1; ++i) g.w_[i] = 0.5 * (pts[i + 1] - pts[i - 1]);
    return g;
  }

  [[nodiscard]] int size() const { return static_cast<int>(pts_.size()); }
  [[nodiscard]] double a() const { return pts_[0]; }
  [[nodiscard]] double b() const { return pts_[pts_.size() - 1]; }
  [[nodiscard]] const Eigen::VectorXd& points() const { return pts_; }
  [[nodiscard]] const Eigen::VectorXd& weights() const { return w_; }

  friend bool operator==(const Grid1D& x, const Grid1D& y) {
    return x.size() == y.size() && x.a() == y.a() && x.b() == y.b();
  }
  friend bool operator!=(const Grid1D& x, const Grid1D& y) { return !(x == y); }

private:
  Eigen::VectorXd pts_, w_;
};

/// Function values sampled on a Grid1D.
struct GridFn {
  Grid1D grid;
  Eigen::VectorXd values;

  GridFn() = default;
  GridFn(Grid1D g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size())
      throw shape_error("GridFn: value count does not match grid size");
  }

  static GridFn zero(const Grid1D& g) { return GridFn(g, Eigen::VectorXd::Zero(g.size())); }

  template <class F>
  static GridFn sample(const Grid1D& g, F&& f) {
    Eigen::VectorXd v(g.size());
    for (int i = 0; i < g.size(); ++i) v[i] = f(g.points()[i]);
    return GridFn(g, std::move(v));
  }

  GridFn& operator+=(const GridFn& o) {
    require_same_grid(o);
    values += o.values;
    return *this;
  }
  GridFn& operator-=(const GridFn& o) {
    require_same_grid(o);
    values -= o.values;
    return *this;
  }
  GridFn& operator*=(double c) {
    values *= c;
    return *this;
  }
  friend GridFn operator+(GridFn x, const GridFn& y) { return x += y; }
  friend GridFn operator-(GridFn x, const GridFn& y) { return x -= y; }
  friend GridFn operator*(double c, GridFn x) { return x *= c; }

  void require_same_grid(const GridFn& o) const {
    if (grid != o.grid) throw shape_error("GridFn: operands live on different grids");
  }
};

/// Trapezoid inner product on the grid.
[[nodiscard]] inline double inner(const GridFn& f, const GridFn& g) {
  f.require_same_grid(g);
  return (f.grid.weights().array() * f.values.array() * g.values.array()).sum();
}

[[nodiscard]] inline double norm(const GridFn& f) {
  return std::sqrt((f.grid.weights().array() * f.values.array().square()).sum());
}

/// Quadrature of f alone.
[[nodiscard]] inline double integrate(const GridFn& f) {
  return f.grid.weights().dot(f.values);
}

}  // namespace opkl
