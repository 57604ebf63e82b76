#pragma once

#include <functional>
#include <string>

#include "shockstab/discretization.hpp"
#include "shockstab/profile.hpp"

namespace shockstab {

using MatVec = std::function<Vec(const Vec&)>;

/// Discrete linearization about a standing wave, acting on interior nodes
/// with homogeneous Dirichlet data. Vectors are node-major of length
/// n * (m - 2). The inner product is h * dot, which is the trapezoid rule
/// for functions vanishing at both ends; the adjoint is the transpose.
class LinearizedOperator {
 public:
  LinearizedOperator() = default;

  /// Jacobian of the method-of-lines right-hand side at p.ubar. phi is the
  /// discrete null vector nearest to the profile derivative.
  LinearizedOperator(const ParabolicSystem& sys, const Profile& p);

  /// Generic matrix with a supplied zero-mode seed (may be empty).
  LinearizedOperator(Grid1D g, int n, SpMat matrix, Vec phi_seed = Vec());

  const Grid1D& grid() const { return grid_; }
  int n() const { return n_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }
  const SpMat& matrix() const { return matrix_; }
  SpMat adjoint() const { return matrix_.transpose(); }
  Vec apply(const Vec& v) const;
  Vec apply_adjoint(const Vec& v) const;

  double inner(const Vec& a, const Vec& b) const { return grid_.h() * a.dot(b); }
  double norm(const Vec& a) const { return std::sqrt(inner(a, a)); }

  bool has_phi() const { return phi_.size() > 0; }
  /// Zero mode used by the projections (discrete null vector).
  const Vec& phi() const { return phi_; }
  /// Profile derivative restricted to interior nodes.
  const Vec& phi_profile() const { return phi_profile_; }
  double phi_norm2() const { return pi2_coeff_; }
  /// Eigenvalue of the discrete null vector (tends to 0 with h).
  double zero_eigenvalue() const { return zero_eigenvalue_; }

  /// ||L ubar_x|| / ||ubar_x|| for the profile derivative.
  double zero_mode_residual() const;

  /// Max-row-sum norm, used to size Krylov steps.
  double norm_inf() const { return norm_inf_; }

  /// Interior length check; throws GridMismatch.
  void check(const Vec& v) const;

 private:
  Grid1D grid_;
  int n_ = 1;
  SpMat matrix_;
  Vec phi_, phi_profile_;
  double pi2_coeff_ = 0.0;
  double zero_eigenvalue_ = 0.0;
  double norm_inf_ = 0.0;

  void init_phi(const Vec& seed);
};

/// Scalar operator v'' + b(x) v' + c(x) v on interior nodes (Dirichlet).
LinearizedOperator coefficient_operator(const Grid1D& g, const std::function<double(double)>& b,
                                        const std::function<double(double)>& c,
                                        Vec phi_seed = Vec());

/// pi_2 v = <phi, v> / |phi|^2.
double pi2(const LinearizedOperator& op, const Vec& v);

/// which = 2: phi pi_2 v; which = 1: v - phi pi_2 v.
Vec project_pi(const LinearizedOperator& op, const Vec& v, int which);

/// L0 = Pi1 L Pi1 acting on full interior vectors (phi direction maps to 0).
class ReducedOperator {
 public:
  explicit ReducedOperator(const LinearizedOperator& op);
  const LinearizedOperator& base() const { return *op_; }
  Vec apply(const Vec& v) const;
  Vec restrict_to(const Vec& v) const { return project_pi(*op_, v, 1); }
  /// Orthonormal (in h * dot) basis of phi-perp, dim x (dim - 1).
  Mat basis() const;
  /// Matrix of L0 in basis() coordinates.
  Mat coordinates_matrix() const;

 private:
  const LinearizedOperator* op_;
};

struct ExpvStats {
  int steps = 0;
  int rejections = 0;
  double error_estimate = 0.0;
};

/// Krylov approximation of exp(t A) v with local error control (relative
/// to |v|). anorm bounds ||A||.
Vec expv(const MatVec& a, double anorm, const Vec& v, double t, double tol = 1e-10,
         int krylov_dim = 30, ExpvStats* stats = nullptr);

/// e^{tL} v0.
Vec semigroup_apply(const LinearizedOperator& op, const Vec& v0, double t, double tol = 1e-10);
/// e^{t L0} v0.
Vec semigroup_apply(const ReducedOperator& op, const Vec& v0, double t, double tol = 1e-10);

struct CertifiedSemigroup {
  Vec value;
  /// Relative difference between tol and tol / 100 runs.
  double relative_error = 0.0;
};
CertifiedSemigroup semigroup_apply_certified(const LinearizedOperator& op, const Vec& v0, double t,
                                             double tol = 1e-10);

/// Matrix Market dump of L.
void write_matrix_market(const LinearizedOperator& op, const std::string& path);

}  // namespace shockstab
