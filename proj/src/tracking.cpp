#include "shockstab/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace shockstab {

namespace {

// Minus-side scalar kernel for speed a > 0 (unit coefficient).
double side_kernel(double y, double a, double t, KernelChannel w) {
  if (w == KernelChannel::E) {
    if (t == 0.0) return 0.0;
    const double s = std::sqrt(4 * t);
    return errfn((y + a * t) / s) - errfn((y - a * t) / s);
  }
  const double xp = y + a * t, xm = y - a * t;
  const double kp = heat_kernel(xp, t), km = heat_kernel(xm, t);
  switch (w) {
    case KernelChannel::Ey:
      return kp - km;
    case KernelChannel::Et:
      return kp * (a - xp / (2 * t)) - km * (-a - xm / (2 * t));
    case KernelChannel::Ety: {
      auto g = [t](double k, double x, double c) { return k * (-x / (2 * t) * (c - x / (2 * t)) - 1 / (2 * t)); };
      return g(kp, xp, a) - g(km, xm, -a);
    }
    default:
      return 0.0;
  }
}

bool odd_in_y(KernelChannel w) { return w == KernelChannel::Ey || w == KernelChannel::Ety; }

}  // namespace

double errfn(double z) { return 0.5 * (1.0 + std::erf(z)); }

double heat_kernel(double y, double t) { return std::exp(-y * y / (4 * t)) / std::sqrt(4 * M_PI * t); }

KernelE scalar_kernel(double a_minus, double a_plus, double l) {
  if (!(a_minus > 0) || !(a_plus < 0)) throw Error(ErrorCode::InvalidModel, "scalar kernel needs incoming speeds");
  KernelE k;
  k.n = 1;
  k.a_minus = {a_minus};
  k.a_plus = {a_plus};
  k.l_minus = {Vec::Constant(1, l)};
  k.l_plus = {Vec::Constant(1, l)};
  return k;
}

KernelE kernel_from_model(const FluxModel& m) {
  const EndpointData e = endpoint_data(m);
  const Mat lm = liu_majda_matrix(m, e);
  Eigen::FullPivLU<Mat> lu(lm);
  if (!lu.isInvertible()) throw Error(ErrorCode::Degenerate, "Liu-Majda matrix is singular");
  KernelE k;
  k.n = m.n;
  for (int j = 0; j < m.n; ++j) {
    if (e.a_minus[j] > 0) {
      const double delta = lu.solve(Vec(e.r_minus.col(j)))(m.n - 1);
      k.a_minus.push_back(e.a_minus[j]);
      k.l_minus.push_back(delta * e.l_minus.col(j));
    }
    if (e.a_plus[j] < 0) {
      const double delta = lu.solve(Vec(e.r_plus.col(j)))(m.n - 1);
      k.a_plus.push_back(e.a_plus[j]);
      k.l_plus.push_back(delta * e.l_plus.col(j));
    }
  }
  return k;
}

Vec eval_kernel(const KernelE& k, double y, double t, KernelChannel which) {
  if (t < 0 || (t == 0 && which != KernelChannel::E))
    throw Error(ErrorCode::DomainError, "kernel needs t > 0, got " + std::to_string(t));
  Vec out = Vec::Zero(k.n);
  if (y <= 0) {
    for (size_t j = 0; j < k.a_minus.size(); ++j) out += side_kernel(y, k.a_minus[j], t, which) * k.l_minus[j];
  } else {
    const double sign = odd_in_y(which) ? -1.0 : 1.0;
    for (size_t j = 0; j < k.a_plus.size(); ++j)
      out += sign * side_kernel(-y, -k.a_plus[j], t, which) * k.l_plus[j];
  }
  return out;
}

double kernel_lp_norm(const KernelE& k, KernelChannel which, double t, double p) {
  double amax = 0.0;
  for (double a : k.a_minus) amax = std::max(amax, std::abs(a));
  for (double a : k.a_plus) amax = std::max(amax, std::abs(a));
  const double half = amax * t + 14 * std::sqrt(t);
  const int m = 8001;
  const double h = 2 * half / (m - 1);
  double acc = 0.0, sup = 0.0;
  for (int i = 0; i < m; ++i) {
    const double y = -half + i * h;
    const double v = std::abs(eval_kernel(k, y, t, which)[0]);
    sup = std::max(sup, v);
    const double w = (i == 0 || i == m - 1) ? 0.5 * h : h;
    if (p > 0) acc += w * std::pow(v, p);
  }
  return p > 0 ? std::pow(acc, 1.0 / p) : sup;
}

std::vector<double> tracking_snapshot_times(double T) {
  std::vector<double> s;
  for (int i = 0; i <= 100 && i * 0.1 <= T + 1e-12; ++i) s.push_back(i * 0.1);
  for (int i = 11; i <= T + 1e-12; ++i) s.push_back(i);
  return s;
}

TrackingResult compute_alpha(const KernelE& k, const Grid1D& g, const Vec& v0, const std::vector<double>& st,
                             const std::vector<Vec>& snaps, const std::function<Vec(const Vec&)>& nonlinearity,
                             const TrackingOptions& opt) {
  const int J = static_cast<int>(st.size());
  if (J == 0 || snaps.size() != st.size()) throw Error(ErrorCode::DimensionMismatch, "snapshot lists differ");
  if (std::abs(st[0]) > 1e-12) throw Error(ErrorCode::SnapshotGapTooLarge, "first snapshot must be at t = 0");
  for (int j = 1; j < J; ++j)
    if (st[j] - st[j - 1] > opt.max_gap + 1e-12 || st[j] <= st[j - 1])
      throw Error(ErrorCode::SnapshotGapTooLarge, "snapshot gap at t = " + std::to_string(st[j]));
  const int n = k.n, m = g.m();
  if (v0.size() != n * m) throw Error(ErrorCode::GridMismatch, "initial data length does not match grid");
  for (const Vec& v : snaps)
    if (v.size() != n * m) throw Error(ErrorCode::GridMismatch, "snapshot length does not match grid");

  std::vector<Vec> nl(J);
  for (int j = 0; j < J; ++j) nl[j] = nonlinearity(snaps[j]);

  // Trapezoid weights in y, node-major rows.
  auto kernel_row = [&](double tau, KernelChannel w) {
    Vec row(n * m);
    for (int q = 0; q < m; ++q) {
      const double wq = (q == 0 || q == m - 1) ? 0.5 * g.h() : g.h();
      row.segment(q * n, n) = wq * eval_kernel(k, g.x(q), tau, w);
    }
    return row;
  };

  // A(j,i) = <e_y(t_j - s_i), N_i>, B with v_i; P, Q pair row i with i+1;
  // R, T pair row i+1 with i.
  Mat A = Mat::Zero(J, J), B = A, P = A, Q = A, R = A, T = A;
  Vec lin_e = Vec::Zero(J), lin_et = Vec::Zero(J);
  for (int j = 1; j < J; ++j) {
    lin_e[j] = -kernel_row(st[j], KernelChannel::E).dot(v0);
    lin_et[j] = -kernel_row(st[j], KernelChannel::Et).dot(v0);
    for (int i = 0; i < j; ++i) {
      const Vec row = kernel_row(st[j] - st[i], KernelChannel::Ey);
      A(j, i) = row.dot(nl[i]);
      B(j, i) = row.dot(snaps[i]);
      if (i + 1 < J) {
        P(j, i) = row.dot(nl[i + 1]);
        Q(j, i) = row.dot(snaps[i + 1]);
      }
      if (i >= 1) {
        R(j, i) = row.dot(nl[i - 1]);
        T(j, i) = row.dot(snaps[i - 1]);
      }
    }
  }

  auto alpha_of = [&](const Vec& ad) {
    Vec a = lin_e;
    for (int j = 1; j < J; ++j)
      for (int i = 0; i < j; ++i) {
        const double ds = st[i + 1] - st[i];
        // trapezoid on [s_i, s_{i+1}]; the integrand at s = t_j vanishes
        a[j] += 0.5 * ds * (A(j, i) + ad[i] * B(j, i));
        if (i + 1 < j) a[j] += 0.5 * ds * (A(j, i + 1) + ad[i + 1] * B(j, i + 1));
      }
    return a;
  };
  auto alpha_dot_of = [&](const Vec& ad) {
    Vec out = lin_et;
    for (int j = 1; j < J; ++j)
      for (int i = 0; i < j; ++i) {
        // (E(t_j - s_i) - E(t_j - s_{i+1})) . (S_i + S_{i+1}) / 2
        double term = A(j, i) + ad[i] * B(j, i) + P(j, i) + ad[i + 1] * Q(j, i);
        if (i + 1 < j) term -= R(j, i + 1) + ad[i] * T(j, i + 1) + A(j, i + 1) + ad[i + 1] * B(j, i + 1);
        out[j] += 0.5 * term;
      }
    return out;
  };

  TrackingResult res;
  Vec ad = Vec::Zero(J);
  Vec a = alpha_of(ad);
  for (int it = 0; it < 50; ++it) {
    Vec next = alpha_dot_of(ad);
    if (J > 1) next[0] = (a[1] - a[0]) / (st[1] - st[0]);
    res.fixed_point_residual = (next - ad).cwiseAbs().maxCoeff();
    ad = next;
    a = alpha_of(ad);
    res.iterations = it + 1;
    if (res.iterations >= opt.picard_iterations && res.fixed_point_residual <= opt.fixed_point_tol) break;
  }
  res.t = st;
  res.alpha.assign(a.data(), a.data() + J);
  res.alpha_dot.assign(ad.data(), ad.data() + J);

  double scale = 0.0, worst = 0.0;
  for (int j = 1; j + 1 < J; ++j)
    if (st[j] >= 1.0) scale = std::max(scale, std::abs(ad[j]));
  for (int j = 1; j + 1 < J; ++j) {
    if (st[j] < 1.0) continue;
    const double fd = (a[j + 1] - a[j - 1]) / (st[j + 1] - st[j - 1]);
    worst = std::max(worst, std::abs(fd - ad[j]));
  }
  res.self_consistency = scale > 0 ? worst / scale : worst;
  return res;
}

TrackingResult attach_tracking(TrajectoryRecord& tr, const KernelE& k, const NonlinearResidual& nr,
                               const Vec& v0, const TrackingOptions& opt) {
  const TrackingResult r =
      compute_alpha(k, tr.grid, v0, tr.snapshot_t, tr.snapshots, [&](const Vec& v) { return nr(v); }, opt);
  auto interp = [&](const std::vector<double>& y, double t) {
    auto it = std::upper_bound(r.t.begin(), r.t.end(), t);
    if (it == r.t.begin()) return y.front();
    if (it == r.t.end()) return y.back();
    const size_t i = it - r.t.begin();
    const double w = (t - r.t[i - 1]) / (r.t[i] - r.t[i - 1]);
    return (1 - w) * y[i - 1] + w * y[i];
  };
  for (size_t q = 0; q < tr.t.size(); ++q) {
    tr.alpha[q] = interp(r.alpha, tr.t[q]);
    tr.alpha_dot[q] = interp(r.alpha_dot, tr.t[q]);
  }
  return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int c = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++c;
  }
  if (c < 2) return NAN;
  return (c * sxy - sx * sy) / (c * sxx - sx * sx);
}

KernelAudit audit_kernel(const KernelE& k, double t_lo, double t_hi, int samples, double tol) {
  KernelAudit a;
  if (t_lo <= 0) {
    double amin = INFINITY;
    for (double s : k.a_minus) amin = std::min(amin, std::abs(s));
    for (double s : k.a_plus) amin = std::min(amin, std::abs(s));
    t_lo = 10.0 / (amin * amin);
  }
  if (t_hi <= t_lo) t_hi = 100.0 * t_lo;
  a.t_lo = t_lo;
  a.t_hi = t_hi;
  a.p_values = {1.0, 2.0, INFINITY};
  std::vector<double> ts;
  for (int i = 0; i < samples; ++i) ts.push_back(t_lo * std::pow(t_hi / t_lo, double(i) / (samples - 1)));
  a.exponents_ok = true;
  for (double p : a.p_values) {
    const double pe = std::isinf(p) ? 0.0 : p;
    const double target = -0.5 * (1 - (std::isinf(p) ? 0.0 : 1 / p));
    std::vector<double> ny, nt, nty;
    for (double t : ts) {
      ny.push_back(kernel_lp_norm(k, KernelChannel::Ey, t, pe));
      nt.push_back(kernel_lp_norm(k, KernelChannel::Et, t, pe));
      nty.push_back(kernel_lp_norm(k, KernelChannel::Ety, t, pe));
    }
    a.targets.push_back(target);
    a.ety_targets.push_back(target - 0.5);
    a.ey_exponents.push_back(loglog_slope(ts, ny));
    a.et_exponents.push_back(loglog_slope(ts, nt));
    a.ety_exponents.push_back(loglog_slope(ts, nty));
    a.exponents_ok = a.exponents_ok && std::abs(a.ey_exponents.back() - target) <= tol &&
                     std::abs(a.et_exponents.back() - target) <= tol &&
                     std::abs(a.ety_exponents.back() - target + 0.5) <= tol;
    if (std::isinf(p)) {
      a.c_fit_min = INFINITY;
      for (size_t i = 0; i < ts.size(); ++i) {
        const double c = nt[i] * std::sqrt(ts[i]);
        a.c_fit_min = std::min(a.c_fit_min, c);
        a.c_fit_max = std::max(a.c_fit_max, c);
      }
    }
  }

  std::vector<double> speeds;
  for (double s : k.a_minus) speeds.push_back(std::abs(s));
  for (double s : k.a_plus) speeds.push_back(std::abs(s));
  double best_c = INFINITY, best_m = 0.0;
  for (double mm : {4.0, 4.5, 5.0, 6.0, 8.0, 12.0, 16.0, 20.0}) {
    double c = 0.0;
    for (double t : ts)
      for (int i = 0; i <= 400; ++i) {
        const double y = -(0.0 + 1.5 * speeds[0] * t + 8 * std::sqrt(t)) * (1 - i / 200.0);
        double tmpl = 0.0;
        for (double s : y <= 0 ? k.a_minus : k.a_plus)
          tmpl += std::exp(-std::pow(y + s * t, 2) / (mm * t)) + std::exp(-std::pow(y - s * t, 2) / (mm * t));
        const double v = std::abs(eval_kernel(k, y, t, KernelChannel::Ey)[0]) * std::sqrt(t);
        if (tmpl > 1e-300) c = std::max(c, v / tmpl);
        else if (v > 1e-300) c = INFINITY;
      }
    if (std::isfinite(c)) {
      best_c = c;
      best_m = mm;
      break;
    }
  }
  a.template_c = best_c;
  a.template_m = best_m;

  const double d = 1e-4;
  for (double t : {0.5, 1.0, 3.0, 10.0})
    for (double y : {-7.0, -2.0, -1.0, -0.3, 0.4, 2.5, 6.0}) {
      const double fy = (eval_kernel(k, y + d, t, KernelChannel::E)[0] - eval_kernel(k, y - d, t, KernelChannel::E)[0]) / (2 * d);
      a.max_fd_error = std::max(a.max_fd_error, std::abs(fy - eval_kernel(k, y, t, KernelChannel::Ey)[0]));
    }
  return a;
}

void write_kernel_audit_json(const KernelAudit& a, const std::string& path) {
  nlohmann::json j;
  j["p_values"] = {1, 2, "inf"};
  j["p_exponent_fits"] = {{"e_y", a.ey_exponents}, {"e_t", a.et_exponents}, {"e_ty", a.ety_exponents}};
  j["targets"] = {{"e_y", a.targets}, {"e_t", a.targets}, {"e_ty", a.ety_targets}};
  j["C_fit"] = {a.c_fit_min, a.c_fit_max};
  j["template_C"] = a.template_c;
  j["M_fit"] = a.template_m;
  j["t_window"] = {a.t_lo, a.t_hi};
  j["max_fd_error"] = a.max_fd_error;
  j["exponents_ok"] = a.exponents_ok;
  j["coefficients"] = "calibrated from the Liu-Majda mass split";
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << j.dump(2) << "\n";
}

}  // namespace shockstab
