#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shockstab/evolve.hpp"
#include "shockstab/model.hpp"

namespace shockstab {

/// errfn(z) = (1 + erf z) / 2.
double errfn(double z);
/// Heat kernel e^{-y^2/4t} / sqrt(4 pi t).
double heat_kernel(double y, double t);

/// Shock-location kernel
///   e(y, t) = sum_k l_k^- (errfn((y + a_k^- t)/sqrt(4t)) - errfn((y - a_k^- t)/sqrt(4t))),  y <= 0,
/// with incoming speeds a_k^- > 0, and the mirror formula with a_k^+ < 0 for y > 0.
/// Coefficients l_k are row vectors of length n.
struct KernelE {
  int n = 1;
  std::vector<double> a_minus, a_plus;
  std::vector<Vec> l_minus, l_plus;
};

/// Scalar kernel with one incoming speed per side and a common coefficient.
KernelE scalar_kernel(double a_minus, double a_plus, double l);

/// Coefficients from the Liu-Majda mass decomposition: incoming mass r_k is
/// split as sum_j c_j r_j(outgoing) + delta_k [u], and l_k = delta_k l_k^T.
/// For translate data this gives alpha -> shift.
KernelE kernel_from_model(const FluxModel& m);

enum class KernelChannel { E, Ey, Et, Ety };

/// Row vector (length n). Throws DomainError for t <= 0 on derivative
/// channels or t < 0 on E.
Vec eval_kernel(const KernelE& k, double y, double t, KernelChannel which);

/// L^p norm in y (p <= 0 means sup norm) of a scalar channel, n = 1.
double kernel_lp_norm(const KernelE& k, KernelChannel which, double t, double p);

struct TrackingOptions {
  int picard_iterations = 2;
  double fixed_point_tol = 1e-6;
  /// Largest admissible gap between snapshots.
  double max_gap = 1.0;
};

struct TrackingResult {
  std::vector<double> t, alpha, alpha_dot;
  int iterations = 0;
  /// Sup change of alpha' in the last Picard sweep.
  double fixed_point_residual = 0.0;
  /// Max relative gap between alpha' and the centered difference of alpha on [1, T].
  double self_consistency = 0.0;
};

/// alpha(t) = -int e(y,t) v0 dy + int_0^t int e_y(y,t-s) (N(v) + alpha' v)(y,s) dy ds,
/// and alpha' with e_t, e_ty. v0 is the unshifted initial perturbation;
/// snapshots are full-length fields v(., s_j) with s_0 = 0. The s-integral
/// uses the trapezoid rule for alpha and the matching summation by parts
/// for alpha'.
TrackingResult compute_alpha(const KernelE& k, const Grid1D& g, const Vec& v0,
                             const std::vector<double>& snapshot_t,
                             const std::vector<Vec>& snapshots, const std::function<Vec(const Vec&)>& nonlinearity,
                             const TrackingOptions& opt = {});

/// Snapshot times 0, 0.1, ..., 10, then 11, 12, ... up to T.
std::vector<double> tracking_snapshot_times(double T);

/// Writes the tracking channels into tr.alpha / tr.alpha_dot at the
/// record times (linear interpolation) and returns the result.
TrackingResult attach_tracking(TrajectoryRecord& tr, const KernelE& k, const NonlinearResidual& nr,
                               const Vec& v0, const TrackingOptions& opt = {});

struct KernelAudit {
  std::vector<double> p_values;
  /// Fitted exponents of |e_y|_p, |e_t|_p, |e_ty|_p over the t window.
  std::vector<double> ey_exponents, et_exponents, ety_exponents;
  std::vector<double> targets, ety_targets;
  /// Constant C in |e_t|_inf <= C t^{-1/2}: min and max of the ratio.
  double c_fit_min = 0.0, c_fit_max = 0.0;
  double t_lo = 0.0, t_hi = 0.0;
  /// Smallest feasible M of the pointwise Gaussian template for e_y, and its C.
  double template_c = 0.0, template_m = 0.0;
  double max_fd_error = 0.0;
  bool exponents_ok = false;
};

/// Exponents are fitted on [t_lo, t_hi]; t_lo <= 0 picks 10 / min a^2 and
/// t_hi = 100 t_lo, where the two heat kernels in e_y are separated.
KernelAudit audit_kernel(const KernelE& k, double t_lo = -1.0, double t_hi = -1.0, int samples = 15,
                         double tol = 0.05);
void write_kernel_audit_json(const KernelAudit& a, const std::string& path);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace shockstab
