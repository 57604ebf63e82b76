#include "shockstab/profile.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <vector>

#include "json.hpp"
#include "shockstab/errors.hpp"

namespace shockstab {

namespace {

using Triplet = Eigen::Triplet<double>;

/// Four-point Lagrange weights for evaluating at x. Returns first node index.
int lagrange_weights(const Grid1D& g, double x, double w[4]) {
  const int m = g.m();
  const double s = (x - g.x_min()) / g.h();
  const int j = std::clamp(static_cast<int>(std::floor(s)), 0, m - 2);
  const int start = std::clamp(j - 1, 0, m - 4);
  for (int a = 0; a < 4; ++a) {
    w[a] = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a) w[a] *= (s - (start + b)) / static_cast<double>(a - b);
  }
  return start;
}

int phase_component(const Vec& um, const Vec& up) {
  Eigen::Index c;
  (up - um).cwiseAbs().maxCoeff(&c);
  if (std::abs(up[0] - um[0]) > 1e-12) return 0;
  return static_cast<int>(c);
}

double sixth_order_defect(const Grid1D& g, int n, const Vec& u, const Vec& field) {
  static const double w[7] = {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
  const int m = g.m();
  double d = 0.0;
  for (int i = 3; i < m - 3; ++i) {
    Vec acc = Vec::Zero(n);
    for (int k = 0; k < 7; ++k) acc += w[k] * u.segment((i - 3 + k) * n, n);
    d = std::max(d, (acc / g.h() - field.segment(i * n, n)).cwiseAbs().maxCoeff());
  }
  return d;
}

Mat orthonormal_columns(const Mat& a) {
  Eigen::HouseholderQR<Mat> qr(a);
  return qr.householderQ() * Mat::Identity(a.rows(), a.cols());
}

}  // namespace

Vec profile_value(const Profile& p, double x) {
  const Grid1D& g = p.grid;
  const int n = p.n;
  if (x <= g.x_min()) return p.at(0);
  if (x >= g.x_max()) return p.at(g.m() - 1);
  const double s = (x - g.x_min()) / g.h();
  const int j = std::clamp(static_cast<int>(std::floor(s)), 0, g.m() - 2);
  const double t = s - j;
  const double h = g.h();
  const double h00 = 2 * t * t * t - 3 * t * t + 1;
  const double h10 = t * t * t - 2 * t * t + t;
  const double h01 = -2 * t * t * t + 3 * t * t;
  const double h11 = t * t * t - t * t;
  return h00 * p.ubar.segment(j * n, n) + h10 * h * p.ubar_x.segment(j * n, n) +
         h01 * p.ubar.segment((j + 1) * n, n) + h11 * h * p.ubar_x.segment((j + 1) * n, n);
}

void fit_tail_rates(Profile& p) {
  const Grid1D& g = p.grid;
  const int n = p.n;
  auto fit = [&](bool left, double& theta, double& logc) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int i = 0; i < g.m(); ++i) {
      const double x = g.x(i);
      const bool in = left ? (x <= 0.75 * g.x_min()) : (x >= 0.75 * g.x_max());
      if (!in) continue;
      const double mag = p.ubar_x.segment(i * n, n).norm();
      if (!(mag > 1e-300)) continue;
      const double ax = std::abs(x);
      const double y = std::log(mag);
      sx += ax;
      sy += y;
      sxx += ax * ax;
      sxy += ax * y;
      ++cnt;
    }
    if (cnt < 3) throw Error(ErrorCode::GridTooShort, "too few tail samples for decay fit");
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    theta = -slope;
    logc = (sy - slope * sx) / cnt;
  };
  double cl, cr;
  fit(true, p.theta_left, cl);
  fit(false, p.theta_right, cr);
  p.theta_hat = std::min(p.theta_left, p.theta_right);
  double err = 0.0;
  for (int i = 0; i < g.m(); ++i) {
    const double x = g.x(i);
    const bool left = x <= 0.75 * g.x_min();
    const bool right = x >= 0.75 * g.x_max();
    if (!left && !right) continue;
    const double mag = p.ubar_x.segment(i * n, n).norm();
    if (!(mag > 1e-300)) continue;
    const double model = left ? std::exp(cl - p.theta_left * std::abs(x))
                              : std::exp(cr - p.theta_right * std::abs(x));
    err = std::max(err, std::abs(model - mag) / mag);
  }
  p.tail_fit_error = err;
}

Profile solve_profile_conservation(const FluxModel& model, const Grid1D& g,
                                   const ProfileOptions& opt) {
  const EndpointData e = endpoint_data(model);
  const LaxReport lax = check_lax(model, e);
  if (!lax.is_lax) throw Error(ErrorCode::NoConnection, "endstates do not form a Lax shock");
  if (!(g.x_min() < 0.0 && g.x_max() > 0.0))
    throw Error(ErrorCode::InvalidConfig, "profile grid must contain x = 0");
  if (g.m() < 5) throw Error(ErrorCode::GridTooShort, "profile grid needs at least 5 nodes");

  const int n = model.n;
  const int m = g.m();
  const double h = g.h();
  const Vec& um = model.u_minus;
  const Vec& up = model.u_plus;
  const Vec fm = model.f(um);

  // Asymptotic boundary rows: no growth toward the ends.
  std::vector<Vec> left_rows, right_rows;
  for (int k = 0; k < n; ++k) {
    if (e.a_minus[k] < 0) left_rows.push_back(e.l_minus.col(k));
    if (e.a_plus[k] > 0) right_rows.push_back(e.l_plus.col(k));
  }

  double width = opt.ansatz_width;
  if (width <= 0) {
    const int p = lax.p_hyperbolic - 1;
    width = 4.0 / std::max(1e-3, e.a_minus[p] - e.a_plus[p]);
  }
  Vec u(n * m);
  for (int i = 0; i < m; ++i)
    u.segment(i * n, n) = um + (up - um) * 0.5 * (1.0 + std::tanh(g.x(i) / width));

  const int pc = phase_component(um, up);
  const double pin = 0.5 * (um[pc] + up[pc]);
  double pw[4];
  const int pstart = lagrange_weights(g, 0.0, pw);

  const int nl = static_cast<int>(left_rows.size());
  const int nr = static_cast<int>(right_rows.size());
  const int rows = nl + (m - 1) * n + nr + 1;
  const int cols = n * m;
  if (rows != cols) throw Error(ErrorCode::DimensionMismatch, "boundary-value problem is not square");

  auto F = [&](const Vec& v) -> Vec { return model.f(v) - fm; };
  auto G = [&](const Vec& v) -> Vec { return model.df(v) * F(v); };
  auto dG = [&](const Vec& v) -> Mat {
    const Mat a = model.df(v);
    const Vec fv = F(v);
    Mat out(n, n);
    for (int j = 0; j < n; ++j) {
      Vec ej = Vec::Zero(n);
      ej[j] = 1.0;
      out.col(j) = model.d2f(v, ej, fv);
    }
    return out + a * a;
  };

  auto residual = [&](const Vec& v) {
    Vec r(rows);
    int row = 0;
    for (const auto& l : left_rows) r[row++] = l.dot(v.head(n) - um);
    for (int i = 0; i + 1 < m; ++i) {
      const Vec a = v.segment(i * n, n), b = v.segment((i + 1) * n, n);
      r.segment(row, n) = b - a - 0.5 * h * (F(a) + F(b)) - h * h / 12.0 * (G(a) - G(b));
      row += n;
    }
    for (const auto& l : right_rows) r[row++] = l.dot(v.tail(n) - up);
    double val = 0.0;
    for (int a = 0; a < 4; ++a) val += pw[a] * v[(pstart + a) * n + pc];
    r[row] = val - pin;
    return r;
  };

  auto jacobian = [&](const Vec& v) {
    std::vector<Triplet> t;
    int row = 0;
    for (const auto& l : left_rows) {
      for (int c = 0; c < n; ++c) t.emplace_back(row, c, l[c]);
      ++row;
    }
    const Mat id = Mat::Identity(n, n);
    for (int i = 0; i + 1 < m; ++i) {
      const Vec a = v.segment(i * n, n), b = v.segment((i + 1) * n, n);
      const Mat ja = -id - 0.5 * h * model.df(a) - h * h / 12.0 * dG(a);
      const Mat jb = id - 0.5 * h * model.df(b) + h * h / 12.0 * dG(b);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
          t.emplace_back(row + r, i * n + c, ja(r, c));
          t.emplace_back(row + r, (i + 1) * n + c, jb(r, c));
        }
      row += n;
    }
    for (const auto& l : right_rows) {
      for (int c = 0; c < n; ++c) t.emplace_back(row, (m - 1) * n + c, l[c]);
      ++row;
    }
    for (int a = 0; a < 4; ++a) t.emplace_back(row, (pstart + a) * n + pc, pw[a]);
    SpMat j(rows, cols);
    j.setFromTriplets(t.begin(), t.end());
    j.makeCompressed();
    return j;
  };

  double fscale = 0.0;
  for (int i = 0; i < m; ++i) fscale = std::max(fscale, model.f(u.segment(i * n, n)).cwiseAbs().maxCoeff());
  const double tol = opt.newton_tol * (1.0 + fscale);

  Vec r = residual(u);
  double rn = r.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < opt.max_newton && rn > tol; ++it) {
    Eigen::SparseLU<SpMat> lu;
    lu.compute(jacobian(u));
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::NoConnection, "singular Newton matrix");
    const Vec du = lu.solve(-r);
    double lam = 1.0;
    Vec trial;
    double tn = 0.0;
    for (;;) {
      trial = u + lam * du;
      tn = residual(trial).cwiseAbs().maxCoeff();
      if (tn < (1.0 - 1e-4 * lam) * rn || lam < 1e-4) break;
      lam *= 0.5;
    }
    u = trial;
    r = residual(u);
    rn = r.cwiseAbs().maxCoeff();
  }
  if (!(rn <= tol * 10) || !u.allFinite())
    throw Error(ErrorCode::NoConnection,
                "profile Newton iteration did not converge (residual " + std::to_string(rn) + ")");

  Profile p;
  p.grid = g;
  p.n = n;
  p.ubar = u;
  p.u_minus = um;
  p.u_plus = up;
  p.ubar_x.resize(n * m);
  for (int i = 0; i < m; ++i) p.ubar_x.segment(i * n, n) = F(u.segment(i * n, n));
  p.residual_sup = rn / h;
  p.defect_sup = sixth_order_defect(g, n, p.ubar, p.ubar_x);
  p.newton_iterations = it;

  const double dmax = p.ubar_x.cwiseAbs().maxCoeff();
  const double end_slope = std::max(p.ubar_x.head(n).cwiseAbs().maxCoeff(),
                                    p.ubar_x.tail(n).cwiseAbs().maxCoeff());
  const double end_err = std::max((p.at(0) - um).cwiseAbs().maxCoeff(),
                                  (p.at(m - 1) - up).cwiseAbs().maxCoeff());
  if (end_slope > opt.boundary_tol * dmax || end_err > opt.boundary_tol)
    throw Error(ErrorCode::GridTooShort, "profile tails are not resolved on this interval");
  fit_tail_rates(p);
  return p;
}

Profile discrete_steady_state(const ParabolicSystem& sys, const Profile& guess,
                              const ProfileOptions& opt) {
  const Grid1D& g = sys.grid();
  if (!g.same_as(guess.grid)) throw Error(ErrorCode::GridMismatch, "guess lives on another grid");
  const int n = sys.n();
  const int dim = sys.interior_size();
  Vec u = sys.interior(guess.ubar);
  Vec phi = sys.interior(guess.ubar_x);
  if (phi.norm() == 0.0) throw Error(ErrorCode::Degenerate, "guess has no translation mode");
  phi /= phi.norm();
  const Vec u0 = u;

  const int pc = phase_component(sys.left_state(), sys.right_state());
  const bool midpoint_pin = std::abs(sys.right_state()[pc] - sys.left_state()[pc]) > 1e-12;
  Vec pin_row = Vec::Zero(dim);
  double pin_value = 0.0;
  if (midpoint_pin) {
    double w[4];
    const int start = lagrange_weights(g, 0.0, w);
    for (int a = 0; a < 4; ++a) {
      const int node = start + a;
      if (node >= 1 && node <= g.m() - 2) pin_row[(node - 1) * n + pc] += w[a];
    }
    pin_value = 0.5 * (sys.left_state()[pc] + sys.right_state()[pc]);
    pin_value = pin_row.dot(u0) + (pin_value - pin_row.dot(u0));
  } else {
    pin_row = phi;
    pin_value = phi.dot(u0);
  }

  double sigma = 0.0;
  auto residual = [&](const Vec& v, double s) {
    Vec r(dim + 1);
    r.head(dim) = sys.interior(sys.rhs(sys.embed(v))) + s * phi;
    r[dim] = pin_row.dot(v) - pin_value;
    return r;
  };
  const double scale = 1.0 + guess.ubar.cwiseAbs().maxCoeff() / (g.h() * g.h());
  const double tol = opt.newton_tol * scale;
  Vec r = residual(u, sigma);
  double rn = r.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < opt.max_newton && rn > tol; ++it) {
    const SpMat j = sys.jacobian(sys.embed(u));
    std::vector<Triplet> t;
    t.reserve(j.nonZeros() + 2 * dim);
    for (int k = 0; k < j.outerSize(); ++k)
      for (SpMat::InnerIterator itj(j, k); itj; ++itj) t.emplace_back(itj.row(), itj.col(), itj.value());
    for (int i = 0; i < dim; ++i) {
      if (phi[i] != 0.0) t.emplace_back(i, dim, phi[i]);
      if (pin_row[i] != 0.0) t.emplace_back(dim, i, pin_row[i]);
    }
    SpMat b(dim + 1, dim + 1);
    b.setFromTriplets(t.begin(), t.end());
    b.makeCompressed();
    Eigen::SparseLU<SpMat> lu;
    lu.compute(b);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "singular bordered Newton matrix");
    const Vec d = lu.solve(-r);
    double lam = 1.0;
    for (;;) {
      const Vec trial = u + lam * d.head(dim);
      const double ts = sigma + lam * d[dim];
      const double tn = residual(trial, ts).cwiseAbs().maxCoeff();
      if (tn < (1.0 - 1e-4 * lam) * rn || lam < 1e-4) {
        u = trial;
        sigma = ts;
        break;
      }
      lam *= 0.5;
    }
    r = residual(u, sigma);
    rn = r.cwiseAbs().maxCoeff();
  }
  if (!(rn <= 10 * tol))
    throw Error(ErrorCode::NonConvergence, "discrete steady state did not converge");

  Profile p = guess;
  p.ubar = sys.embed(u);
  if (const auto* cs = dynamic_cast<const ConservationSystem*>(&sys)) {
    const Vec fm = cs->model().f(sys.left_state());
    for (int i = 0; i < g.m(); ++i) p.ubar_x.segment(i * n, n) = cs->model().f(p.at(i)) - fm;
  } else {
    p.ubar_x = derivative4(g, n, p.ubar);
  }
  p.residual_sup = sys.rhs(p.ubar).cwiseAbs().maxCoeff();
  p.defect_sup = std::abs(sigma);
  p.newton_iterations = it;
  fit_tail_rates(p);
  return p;
}

Profile solve_profile_semilinear(const SemilinearModel& model, const Grid1D& g,
                                 const ProfileOptions& opt) {
  const int n = model.n;
  Profile guess;
  guess.grid = g;
  guess.n = n;
  guess.u_minus = model.u_minus;
  guess.u_plus = model.u_plus;
  guess.ubar.resize(n * g.m());
  const double width = opt.ansatz_width > 0 ? opt.ansatz_width : 1.0;
  for (int i = 0; i < g.m(); ++i) {
    const double x = g.x(i);
    guess.ubar.segment(i * n, n) =
        model.exact_profile
            ? model.exact_profile(x)
            : Vec(model.u_minus + (model.u_plus - model.u_minus) * 0.5 * (1 + std::tanh(x / width)));
  }
  guess.ubar_x = derivative4(g, n, guess.ubar);
  SemilinearSystem sys(model, g);
  Profile p = discrete_steady_state(sys, guess, opt);
  const double dmax = p.ubar_x.cwiseAbs().maxCoeff();
  const double end_slope = std::max(p.ubar_x.head(n).cwiseAbs().maxCoeff(),
                                    p.ubar_x.tail(n).cwiseAbs().maxCoeff());
  if (end_slope > opt.boundary_tol * dmax)
    throw Error(ErrorCode::GridTooShort, "profile tails are not resolved on this interval");
  return p;
}

TransversalityReport check_transversality(const FluxModel& model, const Profile& p, int substeps) {
  const int n = p.n;
  const Grid1D& g = p.grid;
  const EndpointData e = endpoint_data(model);
  const int ic = g.nearest(0.0);
  const Vec d0 = p.derivative_at(ic);
  if (d0.norm() < 1e-12) throw Error(ErrorCode::Degenerate, "profile derivative vanishes at x = 0");

  std::vector<int> ucols, scols;
  for (int k = 0; k < n; ++k) {
    if (e.a_minus[k] > 0) ucols.push_back(k);
    if (e.a_plus[k] < 0) scols.push_back(k);
  }
  Mat U(n, ucols.size()), S(n, scols.size());
  for (size_t j = 0; j < ucols.size(); ++j) U.col(j) = e.r_minus.col(ucols[j]);
  for (size_t j = 0; j < scols.size(); ++j) S.col(j) = e.r_plus.col(scols[j]);

  auto A = [&](double x) { return model.df(profile_value(p, x)); };
  auto transport = [&](Mat W, double x0, double x1) {
    const int steps = std::abs(g.nearest(x1) - g.nearest(x0)) * std::max(1, substeps);
    if (steps == 0 || W.cols() == 0) return W;
    const double dx = (x1 - x0) / steps;
    double x = x0;
    W = orthonormal_columns(W);
    for (int s = 0; s < steps; ++s) {
      const Mat a0 = A(x), a1 = A(x + 0.5 * dx), a2 = A(x + dx);
      const Mat k1 = a0 * W;
      const Mat k2 = a1 * (W + 0.5 * dx * k1);
      const Mat k3 = a1 * (W + 0.5 * dx * k2);
      const Mat k4 = a2 * (W + dx * k3);
      W += dx / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      W = orthonormal_columns(W);
      x += dx;
    }
    return W;
  };
  const double xc = g.x(ic);
  U = transport(U, g.x_min(), xc);
  S = transport(S, g.x_max(), xc);

  TransversalityReport rep;
  rep.dim_unstable = static_cast<int>(U.cols());
  rep.dim_stable = static_cast<int>(S.cols());
  const Vec d = d0.normalized();
  rep.containment_unstable = U.cols() ? (d - U * (U.transpose() * d)).norm() : 1.0;
  rep.containment_stable = S.cols() ? (d - S * (S.transpose() * d)).norm() : 1.0;

  const Mat P = Mat::Identity(n, n) - d * d.transpose();
  auto reduce = [&](const Mat& W) -> Mat {
    if (W.cols() <= 1) return Mat(n, 0);
    Eigen::JacobiSVD<Mat> svd(P * W, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(W.cols() - 1);
  };
  const Mat Ur = reduce(U), Sr = reduce(S);
  if (Ur.cols() == 0 || Sr.cols() == 0) {
    rep.angle = M_PI / 2;
  } else {
    Eigen::JacobiSVD<Mat> svd(Ur.transpose() * Sr);
    rep.angle = std::acos(std::min(1.0, svd.singularValues()[0]));
  }
  if (rep.angle <= 1e-6)
    throw Error(ErrorCode::Degenerate, "connection is not transversal: intersection exceeds span{ubar_x}");
  rep.is_transversal = (rep.dim_unstable + rep.dim_stable == n + 1) &&
                       rep.containment_unstable < 1e-3 && rep.containment_stable < 1e-3;
  return rep;
}

void write_profile_csv(const Profile& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << "x";
  for (int c = 0; c < p.n; ++c) os << ",ubar_" << c + 1;
  for (int c = 0; c < p.n; ++c) os << ",ubar_x_" << c + 1;
  os << "\n" << std::setprecision(17);
  for (int i = 0; i < p.grid.m(); ++i) {
    os << p.grid.x(i);
    for (int c = 0; c < p.n; ++c) os << "," << p.ubar[i * p.n + c];
    for (int c = 0; c < p.n; ++c) os << "," << p.ubar_x[i * p.n + c];
    os << "\n";
  }
}

void write_profile_json(const Profile& p, const std::string& path) {
  nlohmann::json j;
  j["theta_hat"] = p.theta_hat;
  j["theta_left"] = p.theta_left;
  j["theta_right"] = p.theta_right;
  j["tail_fit_error"] = p.tail_fit_error;
  j["residual_sup"] = p.residual_sup;
  j["defect_sup"] = p.defect_sup;
  j["newton_iterations"] = p.newton_iterations;
  j["grid"] = {{"x_min", p.grid.x_min()}, {"x_max", p.grid.x_max()}, {"m", p.grid.m()}};
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << j.dump(2) << "\n";
}

}  // namespace shockstab
