#include "shockstab/spectral.hpp"

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "json.hpp"
#include "shockstab/errors.hpp"

namespace shockstab {

namespace {

using cd = std::complex<double>;
using CSpMat = Eigen::SparseMatrix<cd>;

thread_local double g_select_cut = 0.0;
thread_local double g_exclude_re = NAN;
thread_local double g_exclude_im = NAN;

lapack_logical select_unstable(const double* wr, const double* wi) {
  if (!(*wr > g_select_cut)) return 0;
  if (std::isfinite(g_exclude_re) && std::hypot(*wr - g_exclude_re, *wi - g_exclude_im) < 1e-9)
    return 0;
  return 1;
}

/// Leading invariant subspace of a for the selected eigenvalues.
Mat schur_basis(const Mat& a, int& sdim) {
  const int n = static_cast<int>(a.rows());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor> t = a;
  Vec wr(n), wi(n);
  Mat vs(n, n);
  lapack_int sd = 0;
  const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', select_unstable, n, t.data(), n,
                                        &sd, wr.data(), wi.data(), vs.data(), n);
  if (info != 0) throw Error(ErrorCode::NonConvergence, "dgees failed");
  sdim = sd;
  return vs.leftCols(sd);
}

CVec phase_fixed(CVec v) {
  Eigen::Index k;
  v.cwiseAbs().maxCoeff(&k);
  const cd ph = std::conj(v[k]) / std::abs(v[k]);
  v *= ph;
  return v / v.norm();
}

struct Refined {
  cd lambda;
  CVec v;
  double residual;
};

Refined inverse_iteration(const SpMat& a, cd lambda, unsigned seed) {
  const int n = static_cast<int>(a.rows());
  const CSpMat ac = a.cast<cd>();
  CSpMat id(n, n);
  id.setIdentity();
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  CVec v(n);
  for (int i = 0; i < n; ++i) v[i] = cd(nd(gen), nd(gen));
  v.normalize();
  Refined r{lambda, v, 1e300};
  for (int outer = 0; outer < 3; ++outer) {
    const cd shift = r.lambda + cd(1e-13 * std::max(1.0, std::abs(r.lambda)), 0.0);
    Eigen::SparseLU<CSpMat> lu;
    CSpMat m = ac - shift * id;
    m.makeCompressed();
    lu.compute(m);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "inverse iteration factorization failed");
    for (int it = 0; it < 4; ++it) {
      CVec y = lu.solve(v);
      if (!y.allFinite()) break;
      v = y / y.norm();
    }
    const CVec av = ac * v;
    r.lambda = v.dot(av);  // conj(v)^T A v
    r.v = v;
    r.residual = (av - r.lambda * v).norm();
    if (r.residual <= 1e-13 * std::max(1.0, std::abs(r.lambda))) break;
  }
  return r;
}

}  // namespace

std::vector<std::complex<double>> dense_eigenvalues(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  Mat t = a;
  Vec wr(n), wi(n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, t.data(), n, wr.data(),
                                        wi.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw Error(ErrorCode::NonConvergence, "dgeev failed");
  std::vector<cd> out(n);
  for (int i = 0; i < n; ++i) out[i] = cd(wr[i], wi[i]);
  return out;
}

std::vector<std::complex<double>> SpectralDecomposition::unstable_eigenvalues() const {
  std::vector<cd> out;
  for (const auto& pr : unstable_pairs) out.push_back(pr.lambda);
  return out;
}

double SpectralDecomposition::lambda_max() const {
  double m = -INFINITY;
  for (const auto& pr : unstable_pairs) m = std::max(m, pr.lambda.real());
  return m;
}

SpectralDecomposition compute_spectrum(const LinearizedOperator& op, const SpectralOptions& opt) {
  SpectralDecomposition sd;
  sd.grid = op.grid();
  sd.n = op.n();
  sd.re_cut = opt.re_cut;
  const Mat dense = Mat(op.matrix());
  sd.all_eigenvalues = dense_eigenvalues(dense);
  const SpMat& a = op.matrix();
  const SpMat at = op.adjoint();
  const double h = op.grid().h();
  const double scale = std::max(1.0, op.norm_inf());

  // translation mode
  if (op.has_phi()) {
    cd best = sd.all_eigenvalues[0];
    for (const cd& z : sd.all_eigenvalues)
      if (std::abs(z - op.zero_eigenvalue()) < std::abs(best - op.zero_eigenvalue())) best = z;
    const Refined zr = inverse_iteration(a, best, 11);
    const CVec v = phase_fixed(zr.v);
    const Vec ref = op.phi_profile().size() ? op.phi_profile() : op.phi();
    const double c = std::abs(v.real().dot(ref)) / (v.real().norm() * ref.norm());
    sd.zero_mode = zr.lambda;
    sd.zero_mode_angle = std::acos(std::min(1.0, c));
  }

  std::vector<cd> cand;
  for (const cd& z : sd.all_eigenvalues)
    if (z.real() > opt.re_cut && z.imag() >= 0) cand.push_back(z);
  std::sort(cand.begin(), cand.end(), [](cd x, cd y) { return x.real() > y.real(); });

  bool suspect = false;
  unsigned seed = 101;
  std::vector<EigenPair> pairs;
  for (const cd& z : cand) {
    const Refined r = inverse_iteration(a, z, seed++);
    const CVec v = phase_fixed(r.v);
    if (op.has_phi() && std::abs(r.lambda - sd.zero_mode) < 1e-9 * scale) continue;
    if (op.has_phi()) {
      const double c = std::abs(v.real().dot(op.phi())) / (v.real().norm() * op.phi().norm());
      if (std::acos(std::min(1.0, c)) < opt.zero_angle_tol && std::abs(z.imag()) < 1e-12) continue;
    }
    const Refined l = inverse_iteration(at, std::conj(r.lambda), seed++);
    EigenPair pr;
    pr.lambda = r.lambda;
    pr.right = v;
    pr.left = phase_fixed(l.v);
    pr.residual = r.residual;
    if (r.residual > opt.defect_tol) suspect = true;
    pairs.push_back(pr);
  }
  for (size_t i = 0; i < pairs.size(); ++i)
    for (size_t j = i + 1; j < pairs.size(); ++j)
      if (std::abs(pairs[i].lambda - pairs[j].lambda) <
          opt.cluster_tol * std::max(1.0, std::abs(pairs[i].lambda)))
        suspect = true;

  int cols = 0;
  for (const auto& pr : pairs) cols += std::abs(pr.lambda.imag()) > 1e-10 ? 2 : 1;
  sd.p = cols;
  sd.unstable_pairs = pairs;

  if (cols == 0) {
    sd.V = Mat(op.dim(), 0);
    sd.W = Mat(op.dim(), 0);
    sd.Lambda = Mat(0, 0);
    return sd;
  }

  if (!suspect) {
    Mat V(op.dim(), cols), W(op.dim(), cols);
    int c = 0;
    for (const auto& pr : pairs) {
      // biorthonormal scaling inside a conjugate pair
      CVec left = pr.left;
      const cd s = h * left.dot(pr.right);
      if (std::abs(s) < 1e-14) {
        suspect = true;
        break;
      }
      left /= std::conj(s);
      if (std::abs(pr.lambda.imag()) > 1e-10) {
        V.col(c) = pr.right.real();
        V.col(c + 1) = pr.right.imag();
        W.col(c) = left.real();
        W.col(c + 1) = left.imag();
        c += 2;
      } else {
        V.col(c) = pr.right.real();
        W.col(c) = left.real();
        c += 1;
      }
    }
    if (!suspect) {
      const Mat M = h * W.transpose() * V;
      sd.V = V;
      sd.W = W * M.inverse().transpose();
    }
  }
  if (suspect) {
    g_select_cut = opt.re_cut;
    g_exclude_re = std::isfinite(sd.zero_mode.real()) ? sd.zero_mode.real() : NAN;
    g_exclude_im = std::isfinite(sd.zero_mode.imag()) ? sd.zero_mode.imag() : NAN;
    int sr = 0, sl = 0;
    const Mat V = schur_basis(dense, sr);
    const Mat Q = schur_basis(dense.transpose(), sl);
    if (sr != sl || sr == 0) throw Error(ErrorCode::DefectiveCluster, "left and right invariant subspaces disagree");
    const Mat M = h * Q.transpose() * V;
    sd.V = V;
    sd.W = Q * M.inverse().transpose();
    sd.p = sr;
    sd.used_schur = true;
  }
  sd.Lambda = h * sd.W.transpose() * (a * sd.V);
  return sd;
}

void check_count_stable(const SpectralDecomposition& coarse, const SpectralDecomposition& fine) {
  if (coarse.p != fine.p)
    throw Error(ErrorCode::UnresolvedSpectrum, "unstable count changes under refinement: " +
                                                   std::to_string(coarse.p) + " vs " + std::to_string(fine.p));
}

Vec interior_derivative(const Grid1D& g, int n, const Vec& v) {
  const int mi = g.interior();
  Vec out(v.size());
  for (int i = 0; i < mi; ++i)
    for (int c = 0; c < n; ++c) {
      const double l = i > 0 ? v[(i - 1) * n + c] : 0.0;
      const double r = i + 1 < mi ? v[(i + 1) * n + c] : 0.0;
      out[i * n + c] = (r - l) / (2 * g.h());
    }
  return out;
}

Projections::Projections(const SpectralDecomposition& sd, bool require_tilde) : sd_(&sd) {
  const int d = static_cast<int>(sd.V.rows());
  const int n = sd.n;
  const int mi = sd.grid.interior();
  const double h = sd.h();
  Phi_ = Mat::Zero(d, sd.p);
  DW_ = Mat::Zero(d, sd.p);
  for (int j = 0; j < sd.p; ++j) {
    DW_.col(j) = interior_derivative(sd.grid, n, sd.W.col(j));
    for (int c = 0; c < n; ++c) {
      double mean = 0.0, mass = 0.0;
      for (int i = 0; i < mi; ++i) {
        mean += h * sd.V(i * n + c, j);
        mass += h * std::abs(sd.V(i * n + c, j));
      }
      if (mass > 0) max_mean_ = std::max(max_mean_, std::abs(mean) / mass);
      // cumulative trapezoid from x_min after removing the mean (zero end values)
      const double shift = mean / (h * (mi + 1));
      double acc = 0.0, prev = 0.0;
      for (int i = 0; i < mi; ++i) {
        const double val = sd.V(i * n + c, j) - shift;
        acc += 0.5 * h * (prev + val);
        Phi_(i * n + c, j) = acc;
        prev = val;
      }
    }
  }
  has_tilde_ = max_mean_ <= 1e-6;
  if (require_tilde && !has_tilde_)
    throw Error(ErrorCode::NonZeroMean, "unstable eigenfunction has relative mean " + std::to_string(max_mean_));
}

Vec Projections::coordinates(const Vec& f) const {
  if (f.size() != sd_->V.rows()) throw Error(ErrorCode::GridMismatch, "vector length does not match spectrum");
  return sd_->h() * (sd_->W.transpose() * f);
}

Vec Projections::pi_u(const Vec& f) const { return sd_->V * coordinates(f); }

Vec Projections::pi_u_tilde(const Vec& f) const {
  if (!has_tilde_) throw Error(ErrorCode::NonZeroMean, "tilde projection needs mean-zero eigenfunctions");
  if (f.size() != sd_->V.rows()) throw Error(ErrorCode::GridMismatch, "vector length does not match spectrum");
  return -Phi_ * (sd_->h() * (DW_.transpose() * f));
}

Vec Projections::unstable_flow(const Vec& coords, double t) const {
  if (sd_->p == 0) return Vec::Zero(sd_->V.rows());
  const Mat e = (t * sd_->Lambda).exp();
  return sd_->V * (e * coords);
}

D1Report scan_imaginary_axis(const std::vector<std::complex<double>>& eigenvalues, double tau_max,
                             int n_samples, double re_cut, double tol) {
  D1Report r;
  r.distance = INFINITY;
  for (const cd& z : eigenvalues) {
    if (std::abs(z) < re_cut) continue;
    r.eigenvalues.push_back(z);
    if (z.real() > re_cut) ++r.p;
    double d;
    if (tau_max <= 0) {
      d = std::abs(z);
    } else {
      const double b = std::abs(z.imag());
      d = std::hypot(z.real(), b - std::clamp(b, 0.0, tau_max));
      for (int k = 1; k <= n_samples; ++k) {
        const double tau = tau_max * k / n_samples;
        d = std::min({d, std::abs(z - cd(0, tau)), std::abs(z + cd(0, tau))});
      }
    }
    r.distance = std::min(r.distance, d);
  }
  r.d1_ok = r.distance > tol;
  return r;
}

D1Report scan_imaginary_axis(const SpectralDecomposition& sd, double tau_max, int n_samples, double tol) {
  std::vector<cd> ev;
  const bool has_zero = std::isfinite(sd.zero_mode.real());
  for (const cd& z : sd.all_eigenvalues)
    if (!(has_zero && std::abs(z - sd.zero_mode) < 1e-9 * std::max(1.0, std::abs(z)))) ev.push_back(z);
  D1Report r = scan_imaginary_axis(ev, tau_max, n_samples, sd.re_cut, tol);
  r.p = sd.p;
  for (const auto& pr : sd.unstable_pairs) r.residuals.push_back(pr.residual);
  return r;
}

void write_eigenpairs_csv(const SpectralDecomposition& sd, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << std::setprecision(17);
  os << "index,re,im,residual\n";
  for (size_t j = 0; j < sd.unstable_pairs.size(); ++j)
    os << j << "," << sd.unstable_pairs[j].lambda.real() << "," << sd.unstable_pairs[j].lambda.imag()
       << "," << sd.unstable_pairs[j].residual << "\n";
  std::ofstream fs(path + ".functions.csv");
  if (!fs) throw Error(ErrorCode::Io, "cannot open " + path + ".functions.csv");
  fs << std::setprecision(17) << "x,component";
  for (int j = 0; j < sd.p; ++j) fs << ",phi_" << j + 1 << ",phi_tilde_" << j + 1;
  fs << "\n";
  for (int i = 0; i < sd.grid.interior(); ++i)
    for (int c = 0; c < sd.n; ++c) {
      fs << sd.grid.x(i + 1) << "," << c;
      for (int j = 0; j < sd.p; ++j) fs << "," << sd.V(i * sd.n + c, j) << "," << sd.W(i * sd.n + c, j);
      fs << "\n";
    }
}

void write_d1_json(const D1Report& r, const std::string& path) {
  nlohmann::json j;
  j["p"] = r.p;
  j["d1_ok"] = r.d1_ok;
  j["distance"] = std::isfinite(r.distance) ? nlohmann::json(r.distance) : nlohmann::json(nullptr);
  nlohmann::json ev = nlohmann::json::array();
  for (const cd& z : r.eigenvalues)
    if (z.real() > -1.0) ev.push_back({{"re", z.real()}, {"im", z.imag()}});
  j["unstable_residuals"] = r.residuals;
  j["eigenvalues"] = ev;
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << j.dump(2) << "\n";
}

}  // namespace shockstab
