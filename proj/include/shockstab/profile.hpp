#pragma once

#include <string>

#include "shockstab/discretization.hpp"
#include "shockstab/model.hpp"

namespace shockstab {

/// Discretized standing wave on a grid, with its derivative and a fitted
/// exponential tail rate.
struct Profile {
  Grid1D grid;
  int n = 1;
  Vec ubar;    // node-major, n * m
  Vec ubar_x;  // node-major, n * m
  Vec u_minus, u_plus;
  double theta_hat = 0.0;
  double theta_left = 0.0;
  double theta_right = 0.0;
  /// Relative misfit of the exponential tail model C e^{-theta |x|}.
  double tail_fit_error = 0.0;
  /// Sup-norm of the discrete equations at the returned solution.
  double residual_sup = 0.0;
  /// Sup-norm of (sixth-order difference of ubar) - (ODE vector field); an
  /// h-dependent truncation defect.
  double defect_sup = 0.0;
  int newton_iterations = 0;

  Vec at(int i) const { return ubar.segment(i * n, n); }
  Vec derivative_at(int i) const { return ubar_x.segment(i * n, n); }
};

struct ProfileOptions {
  int max_newton = 60;
  double newton_tol = 1e-13;
  /// Endstate tolerance used for the tail-resolution check.
  double boundary_tol = 1e-6;
  /// Width of the tanh initial guess; <= 0 picks one from the speeds.
  double ansatz_width = -1.0;
};

/// Fourth-order Hermite collocation of ubar_x = f(ubar) - f(u_minus), with
/// the asymptotic projection conditions at both ends and the phase pin
/// ubar_1(0) = (u_minus_1 + u_plus_1) / 2, solved by damped Newton from a
/// tanh ansatz.
Profile solve_profile_conservation(const FluxModel& m, const Grid1D& g,
                                   const ProfileOptions& opt = {});

/// Semilinear standing wave: discrete steady state of u_xx + h(u, u_x)
/// seeded by the model's closed-form profile (or a tanh ansatz).
Profile solve_profile_semilinear(const SemilinearModel& m, const Grid1D& g,
                                 const ProfileOptions& opt = {});

/// Discrete steady state of the method-of-lines system nearest to guess,
/// computed by bordered Newton with the same phase pin as the guess.
/// The returned profile is exactly stationary for the time steppers up to
/// the Newton tolerance.
Profile discrete_steady_state(const ParabolicSystem& sys, const Profile& guess,
                              const ProfileOptions& opt = {});

/// Least-squares fit of log|ubar_x| on the outer quarter of each tail.
void fit_tail_rates(Profile& p);

struct TransversalityReport {
  double angle = 0.0;
  bool is_transversal = false;
  int dim_unstable = 0;
  int dim_stable = 0;
  /// Distance of ubar_x(0)/|ubar_x(0)| from each transported subspace.
  double containment_unstable = 0.0;
  double containment_stable = 0.0;
};

/// Transports the unstable space of A_- forward and the stable space of A_+
/// backward along w' = df(ubar(x)) w to x = 0 and measures the minimal
/// principal angle between them after removing the common direction
/// ubar_x(0). substeps subdivides each grid cell (profile values at
/// sub-nodes by cubic Hermite interpolation).
TransversalityReport check_transversality(const FluxModel& m, const Profile& p, int substeps = 1);

/// Cubic Hermite interpolation of (ubar, ubar_x) at x.
Vec profile_value(const Profile& p, double x);

void write_profile_csv(const Profile& p, const std::string& path);
void write_profile_json(const Profile& p, const std::string& path);

}  // namespace shockstab
