#pragma once

#include <Eigen/Dense>

namespace shockstab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class BoundaryCondition { DirichletEndstates, NeumannZero };

/// Uniform grid on [x_min, x_max] with m nodes.
///
/// Multi-component grid functions are stored node-major: component c of
/// node i lives at index i*n + c.
class Grid1D {
 public:
  Grid1D() = default;
  Grid1D(double x_min, double x_max, int m,
         BoundaryCondition bc = BoundaryCondition::DirichletEndstates);

  /// Grid with spacing as close as possible to h (rounded so the nodes
  /// hit both ends).
  static Grid1D with_spacing(double x_min, double x_max, double h,
                             BoundaryCondition bc = BoundaryCondition::DirichletEndstates);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  int m() const { return m_; }
  double h() const { return h_; }
  BoundaryCondition bc() const { return bc_; }
  double x(int i) const { return x_min_ + h_ * i; }
  Vec nodes() const;
  int interior() const { return m_ - 2; }

  /// Index of the node closest to x.
  int nearest(double x) const;

  /// Grid with half the spacing on the same interval.
  Grid1D refined() const;

  bool same_as(const Grid1D& other) const;

 private:
  double x_min_ = 0.0;
  double x_max_ = 1.0;
  int m_ = 3;
  double h_ = 0.5;
  BoundaryCondition bc_ = BoundaryCondition::DirichletEndstates;
};

/// Trapezoid quadrature of a scalar grid function.
double trapezoid(const Grid1D& g, const Vec& f);

/// Componentwise extraction from a node-major field.
Vec component(const Vec& field, int n, int c);

}  // namespace shockstab
