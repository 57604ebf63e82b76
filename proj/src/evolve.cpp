#include "shockstab/evolve.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "shockstab/spectral.hpp"

namespace shockstab {

namespace {

double l2_norm(const Grid1D& g, int n, const Vec& v) {
  double s = 0.0;
  for (int c = 0; c < n; ++c) s += trapezoid(g, component(v, n, c).array().square().matrix());
  return std::sqrt(s);
}

// Steps at which snapshots are stored.
std::vector<char> snapshot_mask(int steps, double dt, int every, const std::vector<double>& times) {
  std::vector<char> mask(steps + 1, 0);
  if (!times.empty()) {
    for (double t : times) {
      const long k = std::lround(t / dt);
      if (k >= 0 && k <= steps) mask[k] = 1;
    }
  } else if (every > 0) {
    for (int k = 0; k <= steps; k += every) mask[k] = 1;
  }
  return mask;
}

}  // namespace

NormChannels sobolev_norms(const Grid1D& g, int n, const Vec& v) {
  NormChannels c;
  for (int k = 0; k < n; ++k) c.l1 += trapezoid(g, component(v, n, k).cwiseAbs());
  c.linf = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  double acc = 0.0;
  Vec d = v;
  for (int j = 0; j <= 4; ++j) {
    const double nj = l2_norm(g, n, d);
    if (j == 0) c.l2 = nj;
    acc += nj * nj;
    if (j == 2) c.h2 = std::sqrt(acc);
    if (j == 4) c.h4 = std::sqrt(acc);
    if (j < 4) d = centered_derivative(g, n, d);
  }
  return c;
}

void TrajectoryRecord::push(double time, const NormChannels& c, double a, double adot) {
  t.push_back(time);
  l1.push_back(c.l1);
  l2.push_back(c.l2);
  linf.push_back(c.linf);
  h2.push_back(c.h2);
  h4.push_back(c.h4);
  alpha.push_back(a);
  alpha_dot.push_back(adot);
}

void write_trajectory_csv(const TrajectoryRecord& tr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << std::setprecision(12) << "t,l1,l2,linf,h2,h4,alpha,alpha_dot\n";
  for (size_t k = 0; k < tr.t.size(); ++k)
    os << tr.t[k] << "," << tr.l1[k] << "," << tr.l2[k] << "," << tr.linf[k] << "," << tr.h2[k] << ","
       << tr.h4[k] << "," << tr.alpha[k] << "," << tr.alpha_dot[k] << "\n";
}

double ImexStepper::gamma() { return 1.0 - 1.0 / std::sqrt(2.0); }
double ImexStepper::delta() { return 1.0 - 1.0 / (2.0 * gamma()); }

ImexStepper::ImexStepper(const ParabolicSystem& sys, double dt) : sys_(&sys), dt_(dt) {
  init();
  b_ = sys.interior(sys.diffusion(sys.embed(Vec::Zero(sys.interior_size()))));
}

ImexStepper::ImexStepper(const ParabolicSystem& sys, const Vec& ubar_full, double dt)
    : sys_(&sys), dt_(dt), perturbation_(true) {
  init();
  b_ = Vec::Zero(sys.interior_size());
  ubar_ = sys.interior(ubar_full);
  r_ubar_ = sys.interior(sys.reaction(sys.embed(ubar_)));
}

void ImexStepper::init() {
  if (!(dt_ > 0)) throw Error(ErrorCode::InvalidConfig, "time step must be positive");
  d_ = sys_->diffusion_matrix();
  SpMat id(d_.rows(), d_.cols());
  id.setIdentity();
  const SpMat m = id - gamma() * dt_ * d_;
  solver_.compute(m);
  if (solver_.info() != Eigen::Success) throw Error(ErrorCode::NonConvergence, "implicit factorization failed");
}

Vec ImexStepper::explicit_part(const Vec& u) const {
  if (perturbation_) return sys_->interior(sys_->reaction(sys_->embed(ubar_ + u))) - r_ubar_;
  return sys_->interior(sys_->reaction(sys_->embed(u)));
}

Vec ImexStepper::implicit_solve(const Vec& r) const { return solver_.solve(r); }

Vec ImexStepper::step(const Vec& u) const {
  const double g = gamma(), dl = delta(), dt = dt_;
  const Vec e1 = explicit_part(u);
  const Vec u2 = implicit_solve(u + g * dt * e1 + g * dt * b_);
  const Vec e2 = explicit_part(u2);
  const Vec i2 = implicit_part(u2);
  return implicit_solve(u + dt * (dl * e1 + (1 - dl) * e2) + dt * (1 - g) * i2 + g * dt * b_);
}

void guard_state(const Vec& u, double limit) {
  if (!u.allFinite() || u.cwiseAbs().maxCoeff() > limit)
    throw Error(ErrorCode::BlowUp, "state left the overflow guard");
}

Vec step_pde(const ImexStepper& s, const Vec& u_full) {
  const Vec next = s.system().embed(s.step(s.system().interior(u_full)));
  guard_state(next);
  return next;
}

Vec step_perturbation(const ImexStepper& s, const Vec& v_full) {
  const Vec next = s.system().embed_zero(s.step(s.system().interior(v_full)));
  guard_state(next);
  return next;
}

TrajectoryRecord evolve_pde(const ParabolicSystem& sys, const Profile& p, const Vec& u0_full, double T,
                            double dt, int record_every, int snapshot_every,
                            const std::vector<double>& snapshot_times) {
  const ImexStepper st(sys, dt);
  TrajectoryRecord tr;
  tr.grid = sys.grid();
  tr.n = sys.n();
  tr.dt = dt;
  const int steps = static_cast<int>(std::lround(T / dt));
  const std::vector<char> snap = snapshot_mask(steps, dt, snapshot_every, snapshot_times);
  Vec u = sys.interior(u0_full);
  auto record = [&](int k) {
    const Vec full = sys.embed(u);
    if (record_every > 0 && k % record_every == 0) tr.push(k * dt, sobolev_norms(sys.grid(), sys.n(), full - p.ubar));
    if (snap[k]) {
      tr.snapshot_t.push_back(k * dt);
      tr.snapshots.push_back(full);
    }
  };
  record(0);
  for (int k = 1; k <= steps; ++k) {
    u = st.step(u);
    guard_state(u);
    record(k);
  }
  return tr;
}

double normalized_pi2(const LinearizedOperator& op, const Vec& v) {
  if (!op.has_phi()) throw Error(ErrorCode::Degenerate, "operator has no zero mode");
  const double s = op.phi_profile().size() ? pi2(op, op.phi_profile()) : 1.0;
  if (s == 0.0) throw Error(ErrorCode::Degenerate, "profile derivative is orthogonal to the zero mode");
  return pi2(op, v) / s;
}

ReducedState reduced_initial_data(const LinearizedOperator& op, const Vec& raw) {
  return ReducedState{project_pi(op, raw, 1), -normalized_pi2(op, raw), 0.0};
}

double reduced_alpha_dot(const ParabolicSystem& sys, const LinearizedOperator& op, const Profile& p,
                         const Vec& v, double* denom) {
  const ImexStepper st(sys, p.ubar, 1.0);
  const Vec f = st.implicit_part(v) + st.explicit_part(v);
  const double den = 1.0 + normalized_pi2(op, interior_derivative(sys.grid(), sys.n(), v));
  if (denom) *denom = den;
  return -normalized_pi2(op, f) / den;
}

TrajectoryRecord evolve_reduced_shifted(const ParabolicSystem& sys, const LinearizedOperator& op,
                                        const Profile& p, const Vec& v0_interior, double alpha0,
                                        double T, const ReducedOptions& opt, ReducedState* final_state) {
  const ImexStepper st(sys, p.ubar, opt.dt);
  const Grid1D& g = sys.grid();
  const int n = sys.n();
  TrajectoryRecord tr;
  tr.grid = g;
  tr.n = n;
  tr.dt = opt.dt;
  tr.scheme = "ARS(2,2,2) IMEX, reduced shifted";

  ReducedState s{project_pi(op, v0_interior, 1), alpha0, 0.0};
  auto adot = [&](const Vec& f, const Vec& vx) {
    const double den = 1.0 + normalized_pi2(op, vx);
    if (den <= 0.5) throw DenominatorSmall(tr, s, den);
    return -normalized_pi2(op, f) / den;
  };
  auto stage = [&](const Vec& v, double& a) {
    const Vec f = st.implicit_part(v) + st.explicit_part(v);
    const Vec vx = interior_derivative(g, n, v);
    a = adot(f, vx);
    return Vec(project_pi(op, f + a * vx, 1) - st.implicit_part(v));
  };
  const double gm = ImexStepper::gamma(), dl = ImexStepper::delta(), dt = opt.dt;
  const int steps = static_cast<int>(std::lround(T / dt));
  const std::vector<char> snap = snapshot_mask(steps, dt, opt.snapshot_every, opt.snapshot_times);
  auto record = [&](int k, double a) {
    if (opt.record_every > 0 && k % opt.record_every == 0)
      tr.push(s.time, sobolev_norms(g, n, sys.embed_zero(s.v)), s.alpha, a);
    if (snap[k]) {
      tr.snapshot_t.push_back(s.time);
      tr.snapshots.push_back(sys.embed_zero(s.v));
    }
  };
  double a1 = 0.0;
  stage(s.v, a1);
  record(0, a1);
  for (int k = 1; k <= steps; ++k) {
    double a2 = 0.0;
    const Vec e1 = stage(s.v, a1);
    const Vec v2 = st.implicit_solve(s.v + gm * dt * e1);
    const Vec e2 = stage(v2, a2);
    const Vec v3 = st.implicit_solve(s.v + dt * (dl * e1 + (1 - dl) * e2) + dt * (1 - gm) * st.implicit_part(v2));
    guard_state(v3);
    s.v = project_pi(op, v3, 1);
    s.alpha += dt * (dl * a1 + (1 - dl) * a2);
    s.time = k * dt;
    if (opt.record_every > 0 && k % opt.record_every == 0) {
      double a = 0.0;
      stage(s.v, a);
      record(k, a);
    } else if (snap[k]) {
      record(k, 0.0);
    }
  }
  if (final_state) *final_state = s;
  return tr;
}

Vec reconstruct(const ParabolicSystem& sys, const Profile& p, const ReducedState& s) {
  const Vec full = p.ubar + sys.embed_zero(s.v);
  return shifted(sys.grid(), sys.n(), full, s.alpha, sys.left_state(), sys.right_state());
}

Vec NonlinearResidual::operator()(const Vec& v) const {
  const int n = profile->n;
  Vec out(v.size());
  for (int i = 0; i < profile->grid.m(); ++i) {
    const Vec ub = profile->at(i);
    const Vec vi = v.segment(i * n, n);
    out.segment(i * n, n) = -(model->f(ub + vi) - model->f(ub) - model->df(ub) * vi);
  }
  return out;
}

double NonlinearResidual::quadratic_constant(const std::vector<Vec>& samples) const {
  double c = 0.0;
  for (const Vec& v : samples) {
    const NormChannels nv = sobolev_norms(profile->grid, profile->n, v);
    const NormChannels nn = sobolev_norms(profile->grid, profile->n, (*this)(v));
    if (nv.linf * nv.l2 > 0) c = std::max(c, nn.l2 / (nv.linf * nv.l2));
  }
  return c;
}

DampingReport damping_monitor(const TrajectoryRecord& tr, double theta, double c_max) {
  DampingReport r;
  r.theta = theta;
  r.c_max = c_max;
  if (tr.t.empty()) return r;
  const double e0 = tr.h4[0] * tr.h4[0];
  double integral = 0.0;
  double worst = 0.0;
  for (size_t k = 0; k < tr.t.size(); ++k) {
    if (k > 0) {
      const double dt = tr.t[k] - tr.t[k - 1];
      const double q0 = tr.l2[k - 1] * tr.l2[k - 1] + tr.alpha_dot[k - 1] * tr.alpha_dot[k - 1];
      const double q1 = tr.l2[k] * tr.l2[k] + tr.alpha_dot[k] * tr.alpha_dot[k];
      const double decay = std::exp(-theta * dt);
      integral = decay * integral + 0.5 * dt * (decay * q0 + q1);
    }
    const double lhs = tr.h4[k] * tr.h4[k];
    const double rhs = std::exp(-theta * tr.t[k]) * e0 + integral;
    if (lhs == 0.0) continue;
    const double ratio = rhs > 0 ? lhs / rhs : INFINITY;
    if (ratio > worst) {
      worst = ratio;
      r.worst_index = static_cast<int>(k);
    }
  }
  r.c_min = worst;
  r.margin = worst > 0 ? c_max / worst : INFINITY;
  r.feasible = worst <= c_max;
  if (!r.feasible)
    throw Error(ErrorCode::Infeasible, "damping inequality needs C = " + std::to_string(worst) + " > " +
                                           std::to_string(c_max));
  return r;
}

}  // namespace shockstab
