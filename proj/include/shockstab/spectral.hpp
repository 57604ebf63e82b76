#pragma once

#include <complex>
#include <string>
#include <vector>

#include "shockstab/linop.hpp"

namespace shockstab {

struct SpectralOptions {
  /// Eigenvalues with Re > re_cut count as unstable.
  double re_cut = 1e-6;
  /// Angle below which an eigenvector is identified with the zero mode.
  double zero_angle_tol = 1e-3;
  /// Residual ||(L - lambda) phi|| / ||phi|| above which the pair is treated
  /// as part of a Jordan cluster.
  double defect_tol = 1e-8;
  /// Relative gap below which two unstable eigenvalues form a cluster.
  double cluster_tol = 1e-6;
};

struct EigenPair {
  std::complex<double> lambda;
  CVec right;
  CVec left;
  double residual = 0.0;
};

/// Unstable part of the spectrum of a LinearizedOperator with a real basis
/// V of the unstable invariant subspace and a left basis W normalized by
/// h W^T V = I, so Pi_u = V h W^T and L V = V Lambda.
struct SpectralDecomposition {
  Grid1D grid;
  int n = 1;
  int p = 0;
  double re_cut = 1e-6;
  std::vector<std::complex<double>> all_eigenvalues;
  std::vector<EigenPair> unstable_pairs;
  Mat V, W, Lambda;
  bool used_schur = false;
  /// Eigenvalue identified with the translation mode (NaN if none).
  std::complex<double> zero_mode{NAN, NAN};
  double zero_mode_angle = NAN;

  double h() const { return grid.h(); }
  /// Sorted by decreasing real part.
  std::vector<std::complex<double>> unstable_eigenvalues() const;
  double lambda_max() const;
};

/// Dense eigenvalues (LAPACK dgeev), unstable eigenvectors by shifted
/// inverse iteration on L and L^T, with an ordered real Schur basis when a
/// Jordan cluster is suspected.
SpectralDecomposition compute_spectrum(const LinearizedOperator& op, const SpectralOptions& opt = {});

/// Throws UnresolvedSpectrum if the unstable counts differ.
void check_count_stable(const SpectralDecomposition& coarse, const SpectralDecomposition& fine);

/// Pi_u, Pi_cs and the tilde variants (Pi_u d_x = d_x Pi_u~).
class Projections {
 public:
  /// Tilde maps need mean-zero eigenfunctions; with require_tilde the
  /// constructor throws NonZeroMean otherwise.
  explicit Projections(const SpectralDecomposition& sd, bool require_tilde = true);

  Vec pi_u(const Vec& f) const;
  Vec pi_cs(const Vec& f) const { return f - pi_u(f); }
  Vec pi_u_tilde(const Vec& f) const;
  Vec pi_cs_tilde(const Vec& f) const { return f - pi_u_tilde(f); }
  /// Coordinates c with Pi_u f = V c.
  Vec coordinates(const Vec& f) const;
  /// V e^{Lambda t} c.
  Vec unstable_flow(const Vec& coords, double t) const;
  bool has_tilde() const { return has_tilde_; }
  const Mat& antiderivatives() const { return Phi_; }
  /// max_j |int phi_j| / int |phi_j|.
  double max_relative_mean() const { return max_mean_; }
  const SpectralDecomposition& decomposition() const { return *sd_; }

 private:
  const SpectralDecomposition* sd_;
  Mat Phi_, DW_;
  bool has_tilde_ = false;
  double max_mean_ = 0.0;
};

/// Centered derivative of an interior vector with zero Dirichlet data.
Vec interior_derivative(const Grid1D& g, int n, const Vec& v);

struct D1Report {
  int p = 0;
  double distance = 0.0;
  bool d1_ok = false;
  std::vector<std::complex<double>> eigenvalues;
  /// Residuals of the unstable eigenpairs.
  std::vector<double> residuals;
};

/// Distance from the eigenvalues (zero mode excluded: |lambda| < re_cut) to
/// {i tau : 0 < |tau| <= tau_max}, sampled on n_samples points and exactly.
D1Report scan_imaginary_axis(const std::vector<std::complex<double>>& eigenvalues, double tau_max,
                             int n_samples, double re_cut = 1e-6, double tol = 1e-6);
D1Report scan_imaginary_axis(const SpectralDecomposition& sd, double tau_max, int n_samples,
                             double tol = 1e-6);

/// Dense eigenvalues of a real matrix (LAPACK dgeev).
std::vector<std::complex<double>> dense_eigenvalues(const Mat& a);

void write_eigenpairs_csv(const SpectralDecomposition& sd, const std::string& path);
void write_d1_json(const D1Report& r, const std::string& path);

}  // namespace shockstab
