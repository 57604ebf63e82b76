#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shockstab/grid.hpp"

namespace shockstab {

/// Viscous conservation law u_t + f(u)_x = u_xx with a stationary shock
/// connecting u_minus (x -> -inf) to u_plus (x -> +inf).
struct FluxModel {
  std::string name;
  int n = 1;
  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> df;
  /// Second derivative as a bilinear form: d2f(u)[v, w].
  std::function<Vec(const Vec&, const Vec&, const Vec&)> d2f;
  Vec u_minus;
  Vec u_plus;

  /// |f(u_plus) - f(u_minus)|, zero for a stationary shock.
  double rankine_hugoniot_residual() const;
};

/// Monomial c * prod_j u_j^{p_j} used by polynomial flux tables.
struct FluxTerm {
  double coeff = 0.0;
  std::vector<int> powers;
};

FluxModel burgers(double u_minus, double u_plus);
/// f(u) = (u1^2/2 + u2, u2^2/2 + u1).
FluxModel coupled2(const Vec& u_minus, const Vec& u_plus);
/// Each component of f is a sum of monomials.
FluxModel polynomial_flux(std::string name, std::vector<std::vector<FluxTerm>> components,
                          const Vec& u_minus, const Vec& u_plus);

/// Characteristic data of A_- = df(u_minus), A_+ = df(u_plus). Speeds are
/// sorted ascending; r columns are right eigenvectors and l columns the
/// biorthonormal left eigenvectors (l_j . r_k = delta_jk).
struct EndpointData {
  Vec a_minus, a_plus;
  Mat r_minus, r_plus;
  Mat l_minus, l_plus;
  double max_eig_residual = 0.0;
  double max_biorth_error = 0.0;
};

/// Throws InvalidModel if either endpoint Jacobian has complex or repeated
/// eigenvalues (gap <= 1e-8 * spectral radius, |Im| >= 1e-10).
EndpointData endpoint_data(const FluxModel& m);

struct LaxReport {
  int dim_unstable_minus = 0;
  int dim_stable_plus = 0;
  bool is_lax = false;
  /// Index of the shock family: number of negative speeds at u_minus, plus one.
  int p_hyperbolic = 0;
};

/// Throws NearZeroSpeed if any |a| < 1e-8.
LaxReport check_lax(const FluxModel& m, const EndpointData& e);

/// Columns r_1^-..r_{p-1}^-, r_{p+1}^+..r_n^+, (u_plus - u_minus).
/// Throws DimensionMismatch when the column count is not n.
Mat liu_majda_matrix(const FluxModel& m, const EndpointData& e);
double liu_majda_determinant(const FluxModel& m, const EndpointData& e);

struct SpectrumBranch {
  bool minus_side = true;
  int index = 0;
  double speed = 0.0;
  std::vector<std::complex<double>> lambda;
};

/// lambda(k) = -i k a - k^2 for every characteristic speed a at both ends.
std::vector<SpectrumBranch> essential_spectrum_curves(const EndpointData& e,
                                                      const std::vector<double>& k_grid);

/// Semilinear parabolic system u_t = u_xx + h(u, u_x).
struct SemilinearModel {
  std::string name;
  int n = 1;
  std::function<Vec(const Vec&, const Vec&)> h;
  std::function<Mat(const Vec&, const Vec&)> dh_u;
  std::function<Mat(const Vec&, const Vec&)> dh_p;
  Vec u_minus;
  Vec u_plus;
  /// Closed-form standing wave, when known.
  std::function<Vec(double)> exact_profile;
};

/// u_t = u_xx - u + 2u^3 with standing pulse sech(x). Its linearization
/// d_xx - 1 + 6 sech^2 x has eigenvalues 3 (sech^2) and 0 (translation).
SemilinearModel cubic_pulse();

/// Observed convergence order of centered finite-difference derivatives of
/// h against dh_u, dh_p, sampled on the box |u|, |p| <= radius.
double semilinear_derivative_order(const SemilinearModel& m, double radius, int samples,
                                   unsigned seed = 7);

}  // namespace shockstab
