#include "shockstab/csm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "shockstab/errors.hpp"

namespace shockstab {

namespace {

double bump(double s) { return s > 0 ? std::exp(-1.0 / s) : 0.0; }

/// exp of [[X, I, 0], [0, 0, I], [0, 0, 0]]: returns e^X, phi1(X), phi2(X).
void phi_functions(const Mat& x, Mat& e, Mat& p1, Mat& p2) {
  const int d = static_cast<int>(x.rows());
  Mat big = Mat::Zero(3 * d, 3 * d);
  big.topLeftCorner(d, d) = x;
  big.block(0, d, d, d).setIdentity();
  big.block(d, 2 * d, d, d).setIdentity();
  const Mat ex = big.exp();
  e = ex.topLeftCorner(d, d);
  p1 = ex.block(0, d, d, d);
  p2 = ex.block(0, 2 * d, d, d);
}

double op_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()[0];
}

}  // namespace

double cutoff(double x) {
  if (x <= 1.0) return 1.0;
  if (x >= 2.0) return 0.0;
  const double a = bump(2.0 - x), b = bump(x - 1.0);
  return a / (a + b);
}

double cutoff_derivative(double x) {
  if (x <= 1.0 || x >= 2.0) return 0.0;
  const double s = 2.0 - x, r = x - 1.0;
  const double a = bump(s), b = bump(r);
  const double da = a / (s * s), db = b / (r * r);
  return (-da * b - a * db) / ((a + b) * (a + b));
}

double cutoff_derivative_bound() {
  static const double value = [] {
    double m = 0.0;
    for (int i = 1; i < 20000; ++i) m = std::max(m, std::abs(cutoff_derivative(1.0 + i / 20000.0)));
    return m;
  }();
  return value;
}

Vec TruncatedNonlinearity::operator()(double t, const Vec& w) const {
  const double r = measure(w) / eps;
  if (r >= 2.0) return Vec::Zero(w.size());
  const double c = cutoff(r);
  return c * N(t, w);
}

LipschitzAudit audit_lipschitz(const TruncatedNonlinearity& n, int dim, int samples, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  auto random_point = [&](double radius) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = nd(gen);
    return Vec(v / v.norm() * radius * ud(gen));
  };
  LipschitzAudit a;
  for (int s = 0; s < samples; ++s) {
    const Vec w1 = random_point(2.5 * n.eps);
    Vec dir(dim);
    for (int i = 0; i < dim; ++i) dir[i] = nd(gen);
    dir *= 1e-3 * n.eps / dir.norm();
    const Vec w2 = w1 + dir;
    a.measured = std::max(a.measured, (n(0.0, w1) - n(0.0, w2)).norm() / dir.norm());
    // second derivative of the untruncated N along dir
    const double hh = 1e-2 * n.eps;
    const Vec u = dir / dir.norm();
    const Vec d2 = (n.N(0.0, w1 + hh * u) - 2 * n.N(0.0, w1) + n.N(0.0, w1 - hh * u)) / (hh * hh);
    a.second_derivative = std::max(a.second_derivative, d2.norm());
  }
  a.bound = 2.0 * a.second_derivative * n.eps * (1.0 + cutoff_derivative_bound());
  return a;
}

Dichotomy::Dichotomy(Mat a, double t_fit) : a_(std::move(a)) {
  const int d = dim();
  Eigen::EigenSolver<Mat> es(a_);
  const CMat v = es.eigenvectors();
  const CMat vi = v.inverse();
  const CVec ev = es.eigenvalues();
  CMat pu = CMat::Zero(d, d);
  double min_u = INFINITY, max_cs = -INFINITY;
  for (int k = 0; k < d; ++k) {
    if (ev[k].real() > 1e-12) {
      pu += v.col(k) * vi.row(k);
      ++ku_;
      min_u = std::min(min_u, ev[k].real());
    } else {
      max_cs = std::max(max_cs, ev[k].real());
    }
  }
  Pu_ = pu.real();
  eta = std::isfinite(min_u) ? 0.95 * min_u : 1.0;
  theta = std::max(0.0, std::isfinite(max_cs) ? max_cs : 0.0) + 0.05 * eta;
  c_cs = fitted_cs_constant(theta, t_fit);
  c_u = fitted_u_constant(eta, t_fit);
}

double Dichotomy::fitted_cs_constant(double th, double t_fit) const {
  const Mat pcs = Pi_cs();
  double c = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double t = t_fit * k / 100.0;
    c = std::max(c, op_norm(Mat(a_ * t).exp() * pcs) * std::exp(-th * t));
  }
  return c;
}

double Dichotomy::fitted_u_constant(double et, double t_fit) const {
  double c = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double t = t_fit * k / 100.0;
    c = std::max(c, op_norm(Mat(-a_ * t).exp() * Pu_) * std::exp(et * t));
  }
  return c;
}

void Dichotomy::ensure(double dt) const {
  if (fwd_.dt == dt) return;
  phi_functions(a_ * dt, fwd_.e, fwd_.p1, fwd_.p2);
  phi_functions(-a_ * dt, bwd_.e, bwd_.p1, bwd_.p2);
  fwd_.dt = bwd_.dt = dt;
}

Vec Dichotomy::step_cs(const Vec& y0, const Vec& g0, const Vec& g1, double dt) const {
  ensure(dt);
  const Vec c0 = pi_cs(g0), c1 = pi_cs(g1);
  return pi_cs(fwd_.e * y0 + dt * fwd_.p1 * c0 + dt * fwd_.p2 * (c1 - c0));
}

Vec Dichotomy::step_u_back(const Vec& y1, const Vec& g0, const Vec& g1, double dt) const {
  ensure(dt);
  const Vec c0 = pi_u(g0), c1 = pi_u(g1);
  return pi_u(bwd_.e * y1 - dt * bwd_.p1 * c1 - dt * bwd_.p2 * (c0 - c1));
}

PdeSplitFlow::PdeSplitFlow(const LinearizedOperator& op, const SpectralDecomposition& sd, double tol)
    : op_(&op), red_(op), tol_(tol) {
  const int p = sd.p;
  V_ = Mat(op.dim(), p);
  W_ = Mat(op.dim(), p);
  for (int j = 0; j < p; ++j) {
    V_.col(j) = project_pi(op, sd.V.col(j), 1);
    W_.col(j) = project_pi(op, sd.W.col(j), 1);
  }
  if (p > 0) {
    const Mat m = op.grid().h() * W_.transpose() * V_;
    W_ = W_ * m.inverse().transpose();
    Mat lv(op.dim(), p);
    for (int j = 0; j < p; ++j) lv.col(j) = red_.apply(V_.col(j));
    Lambda_ = op.grid().h() * W_.transpose() * lv;
    Eigen::EigenSolver<Mat> es(Lambda_, false);
    double mn = INFINITY;
    for (int j = 0; j < p; ++j) mn = std::min(mn, es.eigenvalues()[j].real());
    eta = 0.95 * mn;
  } else {
    Lambda_ = Mat(0, 0);
    eta = 1.0;
  }
  theta = 0.05 * eta;
}

Vec PdeSplitFlow::coordinates(const Vec& x) const { return op_->grid().h() * (W_.transpose() * x); }

Vec PdeSplitFlow::pi_u(const Vec& x) const { return V_ * coordinates(x); }

Vec PdeSplitFlow::pi_cs(const Vec& x) const {
  const Vec r = red_.restrict_to(x);
  return r - pi_u(r);
}

Vec PdeSplitFlow::step_cs(const Vec& y0, const Vec& g0, const Vec& g1, double dt) const {
  const Vec c0 = pi_cs(g0), c1 = pi_cs(g1);
  const int d = dim();
  const double beta = std::max({c0.norm(), c1.norm(), 1e-300});
  const Vec f0 = c0 / beta, f1 = (c1 - c0) / (beta * dt);
  if (c0.norm() == 0.0 && c1.norm() == 0.0) {
    if (y0.norm() == 0.0) return y0;
    return pi_cs(semigroup_apply(red_, y0, dt, tol_));
  }
  Vec z(d + 2);
  z.head(d) = y0;
  z[d] = 0.0;
  z[d + 1] = beta;
  auto mv = [&](const Vec& s) {
    Vec out(d + 2);
    out.head(d) = red_.apply(s.head(d)) + f1 * s[d] + f0 * s[d + 1];
    out[d] = s[d + 1];
    out[d + 1] = 0.0;
    return out;
  };
  const double anorm = 2.0 * op_->norm_inf() + f0.norm() + f1.norm() + 1.0;
  const Vec r = expv(mv, anorm, z, dt, tol_);
  return pi_cs(Vec(r.head(d)));
}

Vec PdeSplitFlow::step_u_back(const Vec& y1, const Vec& g0, const Vec& g1, double dt) const {
  const int p = static_cast<int>(Lambda_.rows());
  if (p == 0) return Vec::Zero(dim());
  Mat e, p1, p2;
  phi_functions(-Lambda_ * dt, e, p1, p2);
  const Vec a0 = coordinates(g0), a1 = coordinates(g1);
  const Vec c = e * coordinates(y1) - dt * p1 * a1 - dt * p2 * (a0 - a1);
  return V_ * c;
}

double weighted_distance(const SplitFlow& flow, const std::vector<double>& t, const std::vector<Vec>& a,
                         const std::vector<Vec>& b, double theta_tilde) {
  double d = 0.0;
  for (size_t k = 0; k < t.size(); ++k) d = std::max(d, std::exp(-theta_tilde * t[k]) * flow.norm(a[k] - b[k]));
  return d;
}

std::vector<Vec> lp_operator(const SplitFlow& flow, const TruncatedNonlinearity& n, const Vec& w_cs,
                             const std::vector<double>& t, const std::vector<Vec>& w) {
  const size_t K = t.size();
  std::vector<Vec> g(K);
  for (size_t k = 0; k < K; ++k) g[k] = n(t[k], w[k]);
  std::vector<Vec> out(K);
  Vec y = flow.pi_cs(w_cs);
  out[0] = y;
  for (size_t k = 0; k + 1 < K; ++k) {
    y = flow.step_cs(y, g[k], g[k + 1], t[k + 1] - t[k]);
    out[k + 1] = y;
  }
  Vec z = Vec::Zero(w_cs.size());
  out[K - 1] += z;
  for (size_t k = K - 1; k-- > 0;) {
    z = flow.step_u_back(z, g[k], g[k + 1], t[k + 1] - t[k]);
    out[k] += z;
  }
  return out;
}

LPTrajectory lyapunov_perron_solve(const SplitFlow& flow, const TruncatedNonlinearity& n,
                                   const Vec& w_cs, const LPOptions& opt) {
  if (w_cs.size() != flow.dim()) throw Error(ErrorCode::DimensionMismatch, "w_cs has the wrong dimension");
  const int K = static_cast<int>(std::lround(opt.horizon / opt.dt));
  if (K < 2) throw Error(ErrorCode::HorizonTooShort, "horizon shorter than two steps");
  LPTrajectory tr;
  tr.theta_tilde = opt.theta_tilde > 0 ? opt.theta_tilde : 0.5 * (flow.theta + flow.eta);
  tr.t.resize(K + 1);
  for (int k = 0; k <= K; ++k) tr.t[k] = k * opt.dt;
  tr.w.resize(K + 1);
  const Vec zero = Vec::Zero(w_cs.size());
  tr.w[0] = flow.pi_cs(w_cs);
  for (int k = 0; k < K; ++k) tr.w[k + 1] = flow.step_cs(tr.w[k], zero, zero, opt.dt);

  double prev = -1.0;
  int growth = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    std::vector<Vec> next = lp_operator(flow, n, w_cs, tr.t, tr.w);
    const double d = weighted_distance(flow, tr.t, next, tr.w, tr.theta_tilde);
    double scale = 0.0;
    for (size_t k = 0; k < next.size(); ++k)
      scale = std::max(scale, std::exp(-tr.theta_tilde * tr.t[k]) * flow.norm(next[k]));
    tr.w = std::move(next);
    tr.iterations = it;
    tr.final_difference = d;
    if (prev > 1e3 * opt.tol * std::max(scale, 1e-300)) {
      const double ratio = d / prev;
      tr.contraction_factor = std::max(tr.contraction_factor, ratio);
      growth = ratio >= 1.0 ? growth + 1 : 0;
      if (growth >= 3) throw Error(ErrorCode::NoContraction, "Lyapunov-Perron iterates do not contract");
    }
    prev = d;
    if (d <= opt.tol * std::max(scale, 1e-300) || scale == 0.0) break;
  }
  if (!(tr.final_difference <= opt.tol * 1e2 * std::max(1.0, flow.norm(w_cs))))
    throw Error(ErrorCode::NoContraction, "Lyapunov-Perron iteration did not converge");

  double gmax = 0.0;
  for (size_t k = 0; k < tr.t.size(); ++k) gmax = std::max(gmax, flow.norm(n(tr.t[k], tr.w[k])));
  tr.tail_bound = flow.c_u * gmax * std::exp(-flow.eta * opt.horizon) / flow.eta;
  if (tr.tail_bound > opt.tail_tol)
    throw Error(ErrorCode::HorizonTooShort, "tail beyond the horizon is not negligible");
  return tr;
}

double measure_contraction(const SplitFlow& flow, const TruncatedNonlinearity& n, const Vec& w_cs,
                           const LPTrajectory& fixed, int pairs, double amplitude, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  const int d = flow.dim();
  double size = 0.0;
  for (const auto& w : fixed.w) size = std::max(size, flow.norm(w));
  if (size == 0.0) size = n.eps;
  const double T = fixed.t.back();
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Vec a(d), b(d), c(d), e(d);
    for (int i = 0; i < d; ++i) {
      a[i] = nd(gen);
      b[i] = nd(gen);
      c[i] = nd(gen);
      e[i] = nd(gen);
    }
    const double s = amplitude * size;
    std::vector<Vec> w1(fixed.w), w2(fixed.w);
    for (size_t k = 0; k < fixed.t.size(); ++k) {
      const double r = fixed.t[k] / T;
      w1[k] += s * (a + r * b) / a.norm();
      w2[k] += s * (c + r * e) / c.norm();
    }
    const double den = weighted_distance(flow, fixed.t, w1, w2, fixed.theta_tilde);
    const double num = weighted_distance(flow, fixed.t, lp_operator(flow, n, w_cs, fixed.t, w1),
                                         lp_operator(flow, n, w_cs, fixed.t, w2), fixed.theta_tilde);
    worst = std::max(worst, num / den);
  }
  return worst;
}

ManifoldGraph build_graph(const SplitFlow& flow, const TruncatedNonlinearity& n,
                          const std::vector<Vec>& samples, const LPOptions& opt) {
  ManifoldGraph g;
  g.eps = n.eps;
  for (const Vec& s : samples) {
    const LPTrajectory tr = lyapunov_perron_solve(flow, n, s, opt);
    g.base.push_back(flow.pi_cs(s));
    g.values.push_back(flow.pi_u(tr.w[0]));
    g.contraction_factor = std::max(g.contraction_factor, tr.contraction_factor);
    if (flow.norm(s) > 0) g.contraction_factor = std::max(g.contraction_factor, measure_contraction(flow, n, s, tr, 2));
  }
  for (size_t i = 0; i < g.base.size(); ++i)
    for (size_t j = i + 1; j < g.base.size(); ++j) {
      const double dw = flow.norm(g.base[i] - g.base[j]);
      if (dw > 0) g.lipschitz = std::max(g.lipschitz, flow.norm(g.values[i] - g.values[j]) / dw);
    }
  g.tangency_slope = tangency_slope(g, n.eps / 100, n.eps / 10);
  return g;
}

double tangency_slope(const ManifoldGraph& g, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (size_t i = 0; i < g.base.size(); ++i) {
    const double w = g.base[i].norm(), f = g.values[i].norm();
    if (w < lo * (1 - 1e-12) || w > hi * (1 + 1e-12) || f <= 0) continue;
    const double x = std::log(w), y = std::log(f);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt < 2) return NAN;
  return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

InvarianceReport verify_invariance(const ManifoldGraph& g, const Dichotomy& d,
                                   const TruncatedNonlinearity& n, double t_step,
                                   const LPOptions& opt, double offset) {
  InvarianceReport rep;
  Vec dir = Vec::Zero(d.dim());
  if (d.unstable_dim() > 0) {
    Eigen::Index k;
    d.Pi_u().colwise().norm().maxCoeff(&k);
    dir = d.Pi_u().col(k).normalized();
  }
  auto rhs = [&](const Vec& w) -> Vec { return d.A() * w + n(0.0, w); };
  const int steps = std::max(1, static_cast<int>(std::ceil(t_step / 1e-3)));
  const double h = t_step / steps;
  for (size_t i = 0; i < g.base.size(); ++i) {
    Vec w = g.base[i] + g.values[i] + offset * dir;
    for (int s = 0; s < steps; ++s) {
      const Vec k1 = rhs(w), k2 = rhs(w + 0.5 * h * k1), k3 = rhs(w + 0.5 * h * k2), k4 = rhs(w + h * k3);
      w += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    const Vec c = d.pi_cs(w);
    const LPTrajectory tr = lyapunov_perron_solve(d, n, c, opt);
    const double r = (d.pi_u(w) - d.pi_u(tr.w[0])).norm();
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
  }
  return rep;
}

LPTrajectory pde_csm_solve(const PdeSplitFlow& flow, const TruncatedNonlinearity& g0, const Vec& u_cs,
                           const LPOptions& opt) {
  flow.op().check(u_cs);
  return lyapunov_perron_solve(flow, g0, flow.pi_cs(u_cs), opt);
}

void write_graph_csv(const ManifoldGraph& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << std::setprecision(17);
  const int d = g.base.empty() ? 0 : static_cast<int>(g.base[0].size());
  for (int i = 0; i < d; ++i) os << "cs_" << i << ",";
  for (int i = 0; i < d; ++i) os << "u_" << i << ",";
  os << "contraction_factor\n";
  for (size_t k = 0; k < g.base.size(); ++k) {
    for (int i = 0; i < d; ++i) os << g.base[k][i] << ",";
    for (int i = 0; i < d; ++i) os << g.values[k][i] << ",";
    os << g.contraction_factor << "\n";
  }
}

}  // namespace shockstab
