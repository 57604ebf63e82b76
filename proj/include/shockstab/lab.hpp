#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shockstab/csm.hpp"
#include "shockstab/evolve.hpp"
#include "shockstab/spectral.hpp"
#include "shockstab/tracking.hpp"

namespace shockstab {

/// Experiment description read from JSON. See README for the schema.
struct ExperimentConfig {
  std::string name = "run";
  /// burgers | coupled2 | cubic_pulse | poschl_teller
  std::string model = "burgers";
  Vec u_minus, u_plus;
  double x_min = -20.0, x_max = 20.0, h = 0.05;
  double dt = 0.01, T = 10.0;
  int record_every = 10;
  /// gaussian | translate | zero | random
  std::string shape = "gaussian";
  double amplitude = 0.01, center = 0.0, width = 1.0, shift = 0.05;
  unsigned seed = 1;
  /// none | project_cs | shoot
  std::string manifold_mode = "none";
  double trunc_eps = 0.05;
  double horizon = 60.0;
  double lp_dt = 0.05;
  std::vector<double> amplitudes{1e-3, 3e-3, 1e-2, 3e-2};
  double t_shoot = -1.0;
  std::string output_dir = "out";
  double t_lo = 50.0, t_hi = 500.0;
  double radius = -1.0;
  std::vector<double> eps_list{1e-4, 1e-3, 1e-2};
  double t_max = 30.0;
  double hold_time = 50.0;
  double y0 = -5.0;
  std::vector<double> t_list{1.0, 5.0, 10.0};
  std::vector<double> expect_eigenvalues;
  double eig_tol = 1e-3;
  bool check_refinement = true;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Path of file inside the run directory, created on demand. A relative
/// output_dir is placed under $SHOCKSTAB_OUTPUT_ROOT when it is set.
std::string output_path(const ExperimentConfig& cfg, const std::string& file);

/// Model, grid, discrete steady state and linearization.
struct Problem {
  ExperimentConfig cfg;
  Grid1D grid;
  std::unique_ptr<FluxModel> flux;
  std::unique_ptr<SemilinearModel> semi;
  std::unique_ptr<ParabolicSystem> sys;
  Profile profile;
  std::unique_ptr<LinearizedOperator> op;
  int n() const { return sys ? sys->n() : 1; }
};

/// poschl_teller builds only the operator d_xx + 6 sech^2 x.
std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg);
std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg, double h);

/// Initial perturbation v0 (full length, zero at the ends) of the given shape.
Vec make_perturbation(const Problem& pb, const ExperimentConfig& cfg);

/// min over alpha of |u - ubar(. - alpha)|_{L2}, golden-section search on
/// [guess - 1, guess + 1].
double translate_distance(const Problem& pb, const Vec& u_full, double guess = 0.0, double* argmin = nullptr);

struct ChannelFit {
  std::string name;
  double exponent = NAN;
  double ci = NAN;
  double target = 0.0;
  double tol = 0.0;
  double residual = NAN;
  int samples = 0;
  bool pass = false;
};

struct RateReport {
  std::vector<ChannelFit> fits;
  bool trivial = false;
  bool asymptotic = false;
  bool alpha_converged = false;
  double alpha_final = 0.0;
  double alpha_drift = 0.0;
  double e0_h2 = 0.0, e0_h4 = 0.0;
  std::vector<double> zeta;
  double zeta_final = 0.0;
  bool zeta_monotone = true;
  DampingReport damping;
  bool damping_ok = false;
  std::string damping_error;
  TrackingResult tracking;
  TrajectoryRecord trajectory;
  double runtime = 0.0;
  bool pass = false;
};

/// Least-squares exponent of a channel on [t_lo, t_hi] (needs >= 20 samples).
ChannelFit fit_channel(const std::string& name, const std::vector<double>& t, const std::vector<double>& y,
                       double t_lo, double t_hi, double target, double tol);

/// Reduced shifted evolution, shock tracking, exponent fits and damping check.
RateReport run_rates(const ExperimentConfig& cfg);
void write_rate_report_json(const RateReport& r, const std::string& path);

/// Reduced nonlinearity N(w) = Pi1(F(ubar + w) + alpha'(w) w_x) - L0 w, truncated at eps.
TruncatedNonlinearity reduced_nonlinearity(const Problem& pb, double eps);

struct ManifoldPrep {
  Vec w0, z0, v0;  // interior, phi-perp
  Vec z_coords;
  Vec z_lp;  // unstable coordinates of the Lyapunov-Perron solution at t = 0
  double lp_agreement = 0.0;
  double t_shoot = 0.0;
  double shoot_residual = 0.0;
  int newton_iterations = 0;
  LPTrajectory lp;
};

/// v0* = w0 + z0 with z0 in Sigma_u chosen by Newton shooting so that the
/// unstable coordinates vanish at t_shoot; cross-checked against the
/// Lyapunov-Perron solution. Throws ShootingDiverged or AmbiguousRoot.
ManifoldPrep prepare_on_manifold(const Problem& pb, const PdeSplitFlow& flow, const Vec& w0,
                                 const ExperimentConfig& cfg, bool with_lp = true);

/// Even center-stable direction used for preparation (unit norm).
Vec cs_direction(const Problem& pb, const PdeSplitFlow& flow);
/// Top unstable eigenfunction in phi-perp (unit norm).
Vec unstable_direction(const PdeSplitFlow& flow);

struct TangencyAudit {
  std::vector<double> w_norms, z_norms;
  double slope = NAN;
  double c_fit = 0.0;
  bool pass = false;
};
TangencyAudit tangency_audit(const Problem& pb, const PdeSplitFlow& flow, const ExperimentConfig& cfg);

struct ConditionalRun {
  double radius = 0.0;
  double max_distance = 0.0;  // prepared run on [0, hold_time]
  bool stays = false;
  double contrast_exit = NAN;
  double predicted_exit = NAN;
  bool contrast_exits = false;
  double shoot_lp_agreement = 0.0;
  double solution_defect = 0.0;
  bool pass = false;
};

/// Prepared run (Lyapunov-Perron trajectory) and the contrast run with
/// +1e-3 in the top unstable mode.
ConditionalRun run_conditional(const Problem& pb, const SpectralDecomposition& sd, const ExperimentConfig& cfg);

struct ExitReport {
  std::vector<double> eps, exit_times;
  double slope = NAN;
  double lambda_max = NAN;
  double radius = 0.0;
  bool slope_ok = false;
  std::vector<bool> cs_no_exit;
  bool pass = false;
};

/// First time the translate distance exceeds R, full PDE from ubar + eps psi.
/// Throws NoExit when it never does before t_max.
double exit_time(const Problem& pb, const Vec& seed_interior, double radius, double dt, double t_max);
ExitReport run_exit_time(const Problem& pb, const SpectralDecomposition& sd, const ExperimentConfig& cfg);
void write_exit_json(const ExitReport& r, const std::string& path);

struct GreenReport {
  std::vector<double> t_list;
  std::vector<double> c_fit, m_fit, eta_fit, margins, residual_mass;
  double floor = 0.0;
  bool feasible = false;
};

/// G = e^{Lt} delta_{y0} split as G_u + ubar_x e(y0, t) + remainder, with the
/// remainder fitted against a Gaussian-sum template. Throws TemplateInfeasible.
GreenReport green_probe(const Problem& pb, const SpectralDecomposition& sd, double y0,
                        const std::vector<double>& t_list, double c_max = 100.0);
void write_green_json(const GreenReport& r, const std::string& path);

/// Subcommand dispatch; returns 0 pass, 2 failed check, 1 error.
int cli(int argc, char** argv);

}  // namespace shockstab
