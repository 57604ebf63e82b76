#pragma once

#include <Eigen/Sparse>
#include <memory>

#include "shockstab/grid.hpp"
#include "shockstab/model.hpp"

namespace shockstab {

using SpMat = Eigen::SparseMatrix<double>;

/// Method-of-lines form u_t = D2 u + R(u) of a parabolic system on a grid
/// with Dirichlet endstates. D2 is the centered second difference; R holds
/// everything else (flux divergence or reaction). Interior unknowns are the
/// nodes 1..m-2; boundary nodes are held at left_state()/right_state().
class ParabolicSystem {
 public:
  ParabolicSystem(Grid1D grid, int n, Vec left, Vec right)
      : grid_(std::move(grid)), n_(n), left_(std::move(left)), right_(std::move(right)) {}
  virtual ~ParabolicSystem() = default;

  int n() const { return n_; }
  const Grid1D& grid() const { return grid_; }
  const Vec& left_state() const { return left_; }
  const Vec& right_state() const { return right_; }
  int interior_size() const { return n_ * (grid_.m() - 2); }

  /// R(u) at every node; boundary entries are zero.
  virtual Vec reaction(const Vec& u) const = 0;
  /// dR/du at u restricted to interior unknowns.
  virtual SpMat reaction_jacobian(const Vec& u) const = 0;
  /// Whether R is in divergence form (mass-conserving).
  virtual bool conservative() const = 0;
  /// Same system with different Dirichlet values (e.g. zero for perturbations).
  virtual std::unique_ptr<ParabolicSystem> with_boundary(const Vec& left, const Vec& right) const = 0;

  Vec diffusion(const Vec& u) const;
  Vec rhs(const Vec& u) const { return diffusion(u) + reaction(u); }
  /// Jacobian of rhs on the interior unknowns.
  SpMat jacobian(const Vec& u) const;
  /// Centered second difference on interior unknowns (Dirichlet zero).
  SpMat diffusion_matrix() const;

  Vec interior(const Vec& full) const;
  Vec embed(const Vec& interior) const;  // boundary nodes take the Dirichlet values
  Vec embed_zero(const Vec& interior) const;

 protected:
  Grid1D grid_;
  int n_;
  Vec left_, right_;
};

/// R(u) = -D_x f(u) with centered flux differencing.
class ConservationSystem final : public ParabolicSystem {
 public:
  ConservationSystem(FluxModel model, Grid1D grid);
  ConservationSystem(FluxModel model, Grid1D grid, Vec left, Vec right);
  Vec reaction(const Vec& u) const override;
  SpMat reaction_jacobian(const Vec& u) const override;
  bool conservative() const override { return true; }
  std::unique_ptr<ParabolicSystem> with_boundary(const Vec& left, const Vec& right) const override;
  const FluxModel& model() const { return model_; }

 private:
  FluxModel model_;
};

/// R(u) = h(u, D_x u) with centered D_x.
class SemilinearSystem final : public ParabolicSystem {
 public:
  SemilinearSystem(SemilinearModel model, Grid1D grid);
  SemilinearSystem(SemilinearModel model, Grid1D grid, Vec left, Vec right);
  Vec reaction(const Vec& u) const override;
  SpMat reaction_jacobian(const Vec& u) const override;
  bool conservative() const override { return false; }
  std::unique_ptr<ParabolicSystem> with_boundary(const Vec& left, const Vec& right) const override;
  const SemilinearModel& model() const { return model_; }

 private:
  SemilinearModel model_;
};

/// Centered first difference of a full-length node-major field; one-sided
/// at the two boundary nodes.
Vec centered_derivative(const Grid1D& g, int n, const Vec& u);

/// Fourth-order derivative of a node-major field (five-point centered,
/// one-sided five-point stencils at the two nodes nearest each end).
Vec derivative4(const Grid1D& g, int n, const Vec& u);

/// Value of a node-major field at an arbitrary x by four-point Lagrange
/// interpolation. Outside the grid the nearest endstate is returned.
Vec interpolate(const Grid1D& g, int n, const Vec& u, double x);

/// u(x - shift) sampled on the grid; outside values come from left/right.
Vec shifted(const Grid1D& g, int n, const Vec& u, double shift, const Vec& left, const Vec& right);

}  // namespace shockstab
