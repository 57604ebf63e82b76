#include "shockstab/linop.hpp"

#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>
#include <unsupported/Eigen/SparseExtra>
#include <cmath>
#include <vector>

#include "shockstab/errors.hpp"

namespace shockstab {

namespace {

double sparse_norm_inf(const SpMat& a) {
  Vec rows = Vec::Zero(a.rows());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

double round2(double x) {
  if (x <= 0) return x;
  const double s = std::pow(10.0, std::floor(std::log10(x)) - 1);
  return std::ceil(x / s) * s;
}

}  // namespace

LinearizedOperator::LinearizedOperator(const ParabolicSystem& sys, const Profile& p)
    : grid_(sys.grid()), n_(sys.n()) {
  if (!grid_.same_as(p.grid)) throw Error(ErrorCode::GridMismatch, "profile lives on another grid");
  matrix_ = sys.jacobian(p.ubar);
  norm_inf_ = sparse_norm_inf(matrix_);
  phi_profile_ = sys.interior(p.ubar_x);
  if (phi_profile_.norm() > 0.0) init_phi(phi_profile_);
  else phi_profile_.resize(0);
}

LinearizedOperator::LinearizedOperator(Grid1D g, int n, SpMat matrix, Vec phi_seed)
    : grid_(std::move(g)), n_(n), matrix_(std::move(matrix)) {
  if (matrix_.rows() != n_ * grid_.interior() || matrix_.cols() != matrix_.rows())
    throw Error(ErrorCode::DimensionMismatch, "operator size does not match grid");
  matrix_.makeCompressed();
  norm_inf_ = sparse_norm_inf(matrix_);
  phi_profile_ = phi_seed;
  if (phi_seed.size()) init_phi(phi_seed);
}

void LinearizedOperator::init_phi(const Vec& seed) {
  check(seed);
  if (seed.norm() == 0.0) throw Error(ErrorCode::Degenerate, "zero-mode seed vanishes");
  Eigen::SparseLU<SpMat> lu;
  lu.compute(matrix_);
  Vec x = seed / norm(seed);
  if (lu.info() == Eigen::Success) {
    for (int it = 0; it < 4; ++it) {
      Vec y = lu.solve(x);
      if (!y.allFinite() || y.norm() == 0.0) break;
      x = y / norm(y);
    }
  }
  if (x.dot(seed) < 0) x = -x;
  phi_ = x;
  pi2_coeff_ = inner(phi_, phi_);
  zero_eigenvalue_ = inner(phi_, apply(phi_)) / pi2_coeff_;
}

void LinearizedOperator::check(const Vec& v) const {
  if (v.size() != dim()) throw Error(ErrorCode::GridMismatch, "vector length does not match operator");
}

Vec LinearizedOperator::apply(const Vec& v) const {
  check(v);
  return matrix_ * v;
}

Vec LinearizedOperator::apply_adjoint(const Vec& v) const {
  check(v);
  return matrix_.transpose() * v;
}

double LinearizedOperator::zero_mode_residual() const {
  if (phi_profile_.size() == 0) throw Error(ErrorCode::Degenerate, "operator has no zero-mode seed");
  return norm(apply(phi_profile_)) / norm(phi_profile_);
}

LinearizedOperator coefficient_operator(const Grid1D& g, const std::function<double(double)>& b,
                                        const std::function<double(double)>& c, Vec phi_seed) {
  const int mi = g.interior();
  const double h = g.h();
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < mi; ++i) {
    const double x = g.x(i + 1);
    const double bx = b ? b(x) : 0.0;
    t.emplace_back(i, i, -2.0 / (h * h) + (c ? c(x) : 0.0));
    if (i > 0) t.emplace_back(i, i - 1, 1.0 / (h * h) - bx / (2 * h));
    if (i + 1 < mi) t.emplace_back(i, i + 1, 1.0 / (h * h) + bx / (2 * h));
  }
  SpMat a(mi, mi);
  a.setFromTriplets(t.begin(), t.end());
  return LinearizedOperator(g, 1, std::move(a), std::move(phi_seed));
}

double pi2(const LinearizedOperator& op, const Vec& v) {
  op.check(v);
  if (!op.has_phi()) throw Error(ErrorCode::Degenerate, "operator has no zero mode");
  return op.inner(op.phi(), v) / op.phi_norm2();
}

Vec project_pi(const LinearizedOperator& op, const Vec& v, int which) {
  const Vec p2 = op.phi() * pi2(op, v);
  if (which == 2) return p2;
  if (which == 1) return v - p2;
  throw Error(ErrorCode::InvalidConfig, "projection index must be 1 or 2");
}

ReducedOperator::ReducedOperator(const LinearizedOperator& op) : op_(&op) {
  if (!op.has_phi()) throw Error(ErrorCode::Degenerate, "reduced operator needs a zero mode");
}

Vec ReducedOperator::apply(const Vec& v) const {
  return restrict_to(op_->apply(restrict_to(v)));
}

Mat ReducedOperator::basis() const {
  const int d = op_->dim();
  const Vec u = op_->phi() / op_->phi().norm();
  Eigen::HouseholderQR<Mat> qr(u);
  const Mat q = qr.householderQ() * Mat::Identity(d, d);
  return q.rightCols(d - 1) / std::sqrt(op_->grid().h());
}

Mat ReducedOperator::coordinates_matrix() const {
  const Mat q = basis();
  const Mat lq = op_->matrix() * q;
  return op_->grid().h() * q.transpose() * lq;
}

Vec expv(const MatVec& a, double anorm, const Vec& v, double t, double tol, int krylov_dim,
         ExpvStats* stats) {
  const int n = static_cast<int>(v.size());
  const double beta0 = v.norm();
  if (t == 0.0 || beta0 == 0.0) return v;
  if (t < 0) throw Error(ErrorCode::DomainError, "expv needs t >= 0");
  anorm = std::max(anorm, 1e-12);
  const int m = std::min(n, krylov_dim);
  const double gamma = 0.9, delta = 1.2;
  const double btol = 1e-14 * anorm;
  const double abstol = tol * beta0;

  Vec w = v;
  double beta = beta0;
  double t_now = 0.0;
  const double fact = std::pow((m + 1) / std::exp(1.0), m + 1) * std::sqrt(2 * M_PI * (m + 1));
  double t_new = (1.0 / anorm) * std::pow((fact * abstol) / (4.0 * beta * anorm), 1.0 / m);
  t_new = round2(t_new);
  ExpvStats st;
  double err_total = 0.0;
  int guard = 0;
  while (t_now < t) {
    if (++guard > 2000000) throw Error(ErrorCode::NonConvergence, "expv step budget exhausted");
    double t_step = std::min(t - t_now, t_new);
    Mat V = Mat::Zero(n, m + 1);
    Mat H = Mat::Zero(m + 2, m + 2);
    V.col(0) = w / beta;
    int k1 = 2, mb = m;
    for (int j = 0; j < m; ++j) {
      Vec p = a(V.col(j));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(p);
        p -= H(i, j) * V.col(i);
      }
      // second Gram-Schmidt pass
      for (int i = 0; i <= j; ++i) {
        const double c = V.col(i).dot(p);
        H(i, j) += c;
        p -= c * V.col(i);
      }
      const double s = p.norm();
      if (s < btol) {
        k1 = 0;
        mb = j + 1;
        t_step = t - t_now;
        break;
      }
      H(j + 1, j) = s;
      V.col(j + 1) = p / s;
    }
    double avnorm = 0.0;
    if (k1 != 0) {
      H(m + 1, m) = 1.0;
      avnorm = a(V.col(m)).norm();
    }
    Mat F;
    double err_loc = 0.0, xm = 1.0 / m;
    for (int rej = 0;; ++rej) {
      const int mx = mb + k1;
      F = (t_step * H.topLeftCorner(mx, mx)).exp();
      if (k1 == 0) {
        err_loc = btol;
        break;
      }
      const double phi1 = std::abs(beta * F(m, 0));
      const double phi2 = std::abs(beta * F(m + 1, 0) * avnorm);
      if (phi1 > 10 * phi2) {
        err_loc = phi2;
        xm = 1.0 / m;
      } else if (phi1 > phi2) {
        err_loc = (phi1 * phi2) / (phi1 - phi2);
        xm = 1.0 / m;
      } else {
        err_loc = phi1;
        xm = 1.0 / (m - 1);
      }
      if (err_loc <= delta * t_step * abstol / t) break;
      if (rej > 60) throw Error(ErrorCode::NonConvergence, "expv step rejected repeatedly");
      t_step = round2(gamma * t_step * std::pow(t_step * abstol / t / err_loc, xm));
      ++st.rejections;
    }
    const int mx = mb + std::max(0, k1 - 1);
    w = V.leftCols(std::min(mx, m + 1)) * (beta * F.col(0).head(std::min(mx, m + 1)));
    beta = w.norm();
    t_now += t_step;
    ++st.steps;
    err_total += err_loc;
    if (beta == 0.0) break;
    t_new = round2(gamma * t_step * std::pow(t_step * abstol / t / std::max(err_loc, 1e-300), xm));
    if (!(t_new > 0)) t_new = t - t_now;
  }
  st.error_estimate = err_total / beta0;
  if (stats) *stats = st;
  return w;
}

Vec semigroup_apply(const LinearizedOperator& op, const Vec& v0, double t, double tol) {
  op.check(v0);
  return expv([&](const Vec& x) { return Vec(op.matrix() * x); }, op.norm_inf(), v0, t, tol);
}

Vec semigroup_apply(const ReducedOperator& op, const Vec& v0, double t, double tol) {
  op.base().check(v0);
  return expv([&](const Vec& x) { return op.apply(x); }, 2.0 * op.base().norm_inf(), v0, t, tol);
}

CertifiedSemigroup semigroup_apply_certified(const LinearizedOperator& op, const Vec& v0, double t,
                                             double tol) {
  CertifiedSemigroup out;
  out.value = semigroup_apply(op, v0, t, tol / 100);
  const Vec coarse = semigroup_apply(op, v0, t, tol);
  const double nrm = std::max(out.value.norm(), 1e-300);
  out.relative_error = (coarse - out.value).norm() / nrm;
  return out;
}

void write_matrix_market(const LinearizedOperator& op, const std::string& path) {
  if (!Eigen::saveMarket(op.matrix(), path)) throw Error(ErrorCode::Io, "cannot write " + path);
}

}  // namespace shockstab
