#pragma once

#include <Eigen/SparseCholesky>
#include <memory>
#include <string>
#include <vector>

#include "shockstab/errors.hpp"
#include "shockstab/linop.hpp"

namespace shockstab {

struct NormChannels {
  double l1 = 0, l2 = 0, linf = 0, h2 = 0, h4 = 0;
};

/// Norms of a full-length node-major field. H^k proxies are
/// sqrt(sum_{j<=k} |D^j v|_{L2}^2) with centered differences (one-sided at
/// the ends).
NormChannels sobolev_norms(const Grid1D& g, int n, const Vec& v);

struct TrajectoryRecord {
  std::vector<double> t;
  std::vector<double> l1, l2, linf, h2, h4;
  std::vector<double> alpha, alpha_dot;
  std::vector<double> snapshot_t;
  std::vector<Vec> snapshots;
  std::string model = "";
  std::string scheme = "ARS(2,2,2) IMEX";
  Grid1D grid;
  int n = 1;
  double dt = 0.0;

  void push(double time, const NormChannels& c, double a = 0.0, double adot = 0.0);
  size_t size() const { return t.size(); }
};

void write_trajectory_csv(const TrajectoryRecord& tr, const std::string& path);

/// Second-order IMEX Runge-Kutta (ARS(2,2,2)) for u' = D u + b + E(u) with
/// D the Dirichlet second difference (implicit) and E explicit.
class ImexStepper {
 public:
  /// Full PDE on the interior of sys (boundary nodes at the endstates).
  explicit ImexStepper(const ParabolicSystem& sys, double dt);
  /// Perturbation v of a stationary state ubar: v' = rhs(ubar + v) - rhs(ubar)
  /// with zero Dirichlet data.
  ImexStepper(const ParabolicSystem& sys, const Vec& ubar_full, double dt);

  double dt() const { return dt_; }
  const ParabolicSystem& system() const { return *sys_; }

  /// One step on interior unknowns.
  Vec step(const Vec& u) const;
  /// Explicit part E(u).
  Vec explicit_part(const Vec& u) const;
  /// (I - gamma dt D)^{-1} r.
  Vec implicit_solve(const Vec& r) const;
  Vec implicit_part(const Vec& u) const { return d_ * u + b_; }

  static double gamma();
  static double delta();

 private:
  const ParabolicSystem* sys_;
  double dt_;
  SpMat d_;
  Vec b_;
  Vec ubar_;  // interior offset (perturbation mode)
  Vec r_ubar_;
  bool perturbation_ = false;
  Eigen::SimplicialLDLT<SpMat> solver_;
  void init();
};

/// Throws BlowUp when the state is not finite or exceeds the guard.
void guard_state(const Vec& u, double limit = 1e8);

/// One full-PDE step of a full-length field.
Vec step_pde(const ImexStepper& s, const Vec& u_full);
/// One perturbation step of a full-length field (zero boundary values).
Vec step_perturbation(const ImexStepper& s, const Vec& v_full);

/// Evolves the full PDE from u0 to time T, recording norms of u - ubar
/// every record_every steps and snapshots at the given stride (0: none) or,
/// when snapshot_times is nonempty, at the steps nearest to those times.
TrajectoryRecord evolve_pde(const ParabolicSystem& sys, const Profile& p, const Vec& u0_full, double T,
                            double dt, int record_every = 10, int snapshot_every = 0,
                            const std::vector<double>& snapshot_times = {});

/// Reduced shifted equations: v in phi-perp, alpha scalar, with
///   alpha' = -pi2(F(ubar + v)) / (1 + pi2(v_x))   (pi2 normalized),
///   v'     = Pi1(F(ubar + v) + alpha' v_x),
/// so that u(x, t) = ubar(x - alpha) + v(x - alpha, t).
struct ReducedState {
  Vec v;  // interior
  double alpha = 0.0;
  double time = 0.0;
};

/// pi_2 rescaled so that the profile derivative has coordinate 1.
double normalized_pi2(const LinearizedOperator& op, const Vec& v);

/// alpha0 = -normalized_pi2(raw), v0 = Pi1 raw for a raw perturbation of ubar.
ReducedState reduced_initial_data(const LinearizedOperator& op, const Vec& raw_interior);

class DenominatorSmall : public Error {
 public:
  DenominatorSmall(TrajectoryRecord rec, ReducedState st, double denom)
      : Error(ErrorCode::DenominatorSmall, "1 + pi2(v_x) = " + std::to_string(denom) + " <= 1/2"),
        record(std::move(rec)), state(std::move(st)) {}
  TrajectoryRecord record;
  ReducedState state;
};

struct ReducedOptions {
  double dt = 0.01;
  int record_every = 10;
  int snapshot_every = 0;
  /// Overrides snapshot_every when nonempty.
  std::vector<double> snapshot_times;
};

TrajectoryRecord evolve_reduced_shifted(const ParabolicSystem& sys, const LinearizedOperator& op,
                                        const Profile& p, const Vec& v0_interior, double alpha0,
                                        double T, const ReducedOptions& opt = {},
                                        ReducedState* final_state = nullptr);

/// ubar(x - alpha) + v(x - alpha) on the grid (full length).
Vec reconstruct(const ParabolicSystem& sys, const Profile& p, const ReducedState& s);

/// alpha' for the reduced state and 1 + pi2(v_x).
double reduced_alpha_dot(const ParabolicSystem& sys, const LinearizedOperator& op, const Profile& p,
                         const Vec& v, double* denom = nullptr);

/// N(v) = -(f(ubar + v) - f(ubar) - df(ubar) v) at every node.
struct NonlinearResidual {
  const FluxModel* model;
  const Profile* profile;
  Vec operator()(const Vec& v_full) const;
  /// max over samples of |N(v)|_{L2} / (|v|_inf |v|_{L2}).
  double quadratic_constant(const std::vector<Vec>& samples) const;
};

struct DampingReport {
  double theta = 0.1;
  double c_min = 0.0;
  double c_max = 100.0;
  double margin = INFINITY;
  bool feasible = true;
  int worst_index = -1;
};

/// Smallest C with |v(t)|_{H4}^2 <= C e^{-theta t}|v(0)|_{H4}^2 +
/// C int_0^t e^{-theta (t-s)} (|v|_{L2}^2 + |alpha'|^2) ds at every
/// recorded time. Throws Infeasible when C > c_max.
DampingReport damping_monitor(const TrajectoryRecord& tr, double theta = 0.1, double c_max = 100.0);

}  // namespace shockstab
