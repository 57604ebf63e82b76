#include "shockstab/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace shockstab {

using nlohmann::json;

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

Vec read_state(const json& j, const char* key, const Vec& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number()) return Vec::Constant(1, v.get<double>());
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i].get<double>();
  return out;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double l2_full(const Grid1D& g, int n, const Vec& v) {
  double s = 0.0;
  for (int c = 0; c < n; ++c) s += trapezoid(g, component(v, n, c).array().square().matrix());
  return std::sqrt(s);
}

json to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void write_json(const json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
  os << j.dump(2) << "\n";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    const json model = j.value("model", json::object());
    if (model.is_string()) {
      c.model = model.get<std::string>();
    } else {
      c.model = model.value("type", c.model);
      c.u_minus = read_state(model, "u_minus", c.u_minus);
      c.u_plus = read_state(model, "u_plus", c.u_plus);
    }
    const json grid = j.value("grid", json::object());
    c.x_min = grid.value("x_min", c.x_min);
    c.x_max = grid.value("x_max", c.x_max);
    c.h = grid.value("h", c.h);
    const json sch = j.value("scheme", json::object());
    c.dt = sch.value("dt", c.dt);
    c.T = sch.value("T", c.T);
    c.record_every = sch.value("record_every", c.record_every);
    const json pert = j.value("perturbation", json::object());
    c.shape = pert.value("shape", c.shape);
    c.amplitude = pert.value("amplitude", c.amplitude);
    c.center = pert.value("center", c.center);
    c.width = pert.value("width", c.width);
    c.shift = pert.value("shift", c.shift);
    c.seed = pert.value("seed", c.seed);
    const json man = j.value("manifold", json::object());
    c.manifold_mode = man.value("mode", c.manifold_mode);
    c.trunc_eps = man.value("eps", c.trunc_eps);
    c.horizon = man.value("horizon", c.horizon);
    c.lp_dt = man.value("lp_dt", c.lp_dt);
    c.amplitudes = man.value("amplitudes", c.amplitudes);
    c.t_shoot = man.value("t_shoot", c.t_shoot);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("rate_window")) {
      c.t_lo = j.at("rate_window").at(0).get<double>();
      c.t_hi = j.at("rate_window").at(1).get<double>();
    }
    const json ex = j.value("exit", json::object());
    c.radius = ex.value("radius", c.radius);
    c.eps_list = ex.value("eps_list", c.eps_list);
    c.t_max = ex.value("t_max", c.t_max);
    c.hold_time = ex.value("hold_time", c.hold_time);
    const json gr = j.value("green", json::object());
    c.y0 = gr.value("y0", c.y0);
    c.t_list = gr.value("t_list", c.t_list);
    const json sp = j.value("spectrum", json::object());
    c.expect_eigenvalues = sp.value("expect", c.expect_eigenvalues);
    c.eig_tol = sp.value("tol", c.eig_tol);
    c.check_refinement = sp.value("check_refinement", c.check_refinement);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config field: ") + e.what());
  }
  if (!(c.h > 0) || !(c.x_max > c.x_min)) throw Error(ErrorCode::InvalidConfig, "bad grid");
  if (!(c.dt > 0) || !(c.T >= 0)) throw Error(ErrorCode::InvalidConfig, "bad scheme parameters");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string output_path(const ExperimentConfig& cfg, const std::string& file) {
  std::filesystem::path dir(cfg.output_dir);
  if (dir.is_relative())
    if (const char* root = std::getenv("SHOCKSTAB_OUTPUT_ROOT")) dir = std::filesystem::path(root) / dir;
  std::filesystem::create_directories(dir);
  return (dir / file).string();
}

std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg) { return build_problem(cfg, cfg.h); }

std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg, double h) {
  auto pb = std::make_unique<Problem>();
  pb->cfg = cfg;
  pb->grid = Grid1D::with_spacing(cfg.x_min, cfg.x_max, h);
  const Grid1D& g = pb->grid;
  if (cfg.model == "burgers" || cfg.model == "coupled2") {
    if (cfg.model == "burgers") {
      pb->flux = std::make_unique<FluxModel>(burgers(cfg.u_minus.size() ? cfg.u_minus[0] : 1.0,
                                                     cfg.u_plus.size() ? cfg.u_plus[0] : -1.0));
    } else {
      pb->flux = std::make_unique<FluxModel>(coupled2(cfg.u_minus.size() == 2 ? cfg.u_minus : v2(1.5, 1.5),
                                                      cfg.u_plus.size() == 2 ? cfg.u_plus : v2(2.5, -0.5)));
    }
    pb->sys = std::make_unique<ConservationSystem>(*pb->flux, g);
    pb->profile = discrete_steady_state(*pb->sys, solve_profile_conservation(*pb->flux, g));
  } else if (cfg.model == "cubic_pulse") {
    pb->semi = std::make_unique<SemilinearModel>(cubic_pulse());
    pb->sys = std::make_unique<SemilinearSystem>(*pb->semi, g);
    pb->profile = discrete_steady_state(*pb->sys, solve_profile_semilinear(*pb->semi, g));
  } else if (cfg.model == "poschl_teller") {
    pb->op = std::make_unique<LinearizedOperator>(
        coefficient_operator(g, nullptr, [](double x) { return 6 * sech(x) * sech(x); }));
    return pb;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown model " + cfg.model);
  }
  pb->op = std::make_unique<LinearizedOperator>(*pb->sys, pb->profile);
  return pb;
}

Vec make_perturbation(const Problem& pb, const ExperimentConfig& cfg) {
  if (!pb.sys) throw Error(ErrorCode::InvalidConfig, "model has no evolution equation");
  const Grid1D& g = pb.grid;
  const int n = pb.n(), m = g.m();
  Vec v = Vec::Zero(n * m);
  if (cfg.shape == "zero") {
    return v;
  } else if (cfg.shape == "gaussian") {
    for (int i = 0; i < m; ++i)
      v.segment(i * n, n).setConstant(cfg.amplitude * std::exp(-std::pow((g.x(i) - cfg.center) / cfg.width, 2)));
  } else if (cfg.shape == "translate") {
    v = shifted(g, n, pb.profile.ubar, cfg.shift, pb.sys->left_state(), pb.sys->right_state()) - pb.profile.ubar;
  } else if (cfg.shape == "random") {
    std::mt19937 gen(cfg.seed);
    std::uniform_real_distribution<double> pos(-5.0, 5.0), wid(0.5, 2.0);
    std::normal_distribution<double> coef;
    for (int k = 0; k < 8; ++k) {
      const double c = pos(gen), w = wid(gen);
      Vec a(n);
      for (int q = 0; q < n; ++q) a[q] = coef(gen);
      for (int i = 0; i < m; ++i) v.segment(i * n, n) += a * std::exp(-std::pow((g.x(i) - c) / w, 2));
    }
    const double s = v.cwiseAbs().maxCoeff();
    if (s > 0) v *= cfg.amplitude / s;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown perturbation shape " + cfg.shape);
  }
  v.head(n).setZero();
  v.tail(n).setZero();
  return v;
}

double translate_distance(const Problem& pb, const Vec& u, double guess, double* argmin) {
  const Grid1D& g = pb.grid;
  const int n = pb.n();
  auto f = [&](double a) {
    return l2_full(g, n, u - shifted(g, n, pb.profile.ubar, a, pb.sys->left_state(), pb.sys->right_state()));
  };
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = guess - 1.0, b = guess + 1.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  const double best = 0.5 * (a + b);
  if (argmin) *argmin = best;
  return std::min({f(best), f(guess)});
}

ChannelFit fit_channel(const std::string& name, const std::vector<double>& t, const std::vector<double>& y,
                       double t_lo, double t_hi, double target, double tol) {
  ChannelFit f;
  f.name = name;
  f.target = target;
  f.tol = tol;
  std::vector<double> lx, ly;
  for (size_t i = 0; i < t.size(); ++i)
    if (t[i] >= t_lo && t[i] <= t_hi && std::isfinite(y[i]) && std::abs(y[i]) > 0) {
      lx.push_back(std::log(t[i]));
      ly.push_back(std::log(std::abs(y[i])));
    }
  f.samples = static_cast<int>(lx.size());
  if (f.samples < 20) return f;
  const int c = f.samples;
  double mx = 0, my = 0;
  for (int i = 0; i < c; ++i) {
    mx += lx[i] / c;
    my += ly[i] / c;
  }
  double sxx = 0, sxy = 0;
  for (int i = 0; i < c; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  f.exponent = sxy / sxx;
  double ss = 0;
  for (int i = 0; i < c; ++i) ss += std::pow(ly[i] - my - f.exponent * (lx[i] - mx), 2);
  f.residual = std::sqrt(ss / c);
  f.ci = 1.96 * std::sqrt(ss / (c - 2) / sxx);
  f.pass = std::abs(f.exponent - target) <= tol;
  return f;
}

RateReport run_rates(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto pb = build_problem(cfg);
  if (!pb->flux) throw Error(ErrorCode::InvalidConfig, "rates need a conservation law");
  RateReport r;
  const Vec v0 = make_perturbation(*pb, cfg);
  const NormChannels e0 = sobolev_norms(pb->grid, pb->n(), v0);
  r.e0_h2 = e0.l1 + e0.h2;
  r.e0_h4 = e0.l1 + e0.h4;
  r.trivial = v0.cwiseAbs().maxCoeff() == 0.0;

  const ReducedState init = reduced_initial_data(*pb->op, pb->sys->interior(v0));
  ReducedOptions opt;
  opt.dt = cfg.dt;
  opt.record_every = cfg.record_every;
  opt.snapshot_times = tracking_snapshot_times(cfg.T);
  r.trajectory = evolve_reduced_shifted(*pb->sys, *pb->op, pb->profile, init.v, init.alpha, cfg.T, opt);
  r.trajectory.model = cfg.model;
  const NonlinearResidual nr{pb->flux.get(), &pb->profile};
  r.tracking = attach_tracking(r.trajectory, kernel_from_model(*pb->flux), nr, v0);
  const TrajectoryRecord& tr = r.trajectory;

  double z = 0.0;
  for (size_t k = 0; k < tr.size(); ++k) {
    const double s = 1.0 + tr.t[k];
    z = std::max({z, tr.l2[k] * std::pow(s, 0.25), tr.linf[k] * std::sqrt(s), tr.h2[k] * std::pow(s, 0.25),
                  std::abs(tr.alpha_dot[k]) * std::sqrt(s)});
    r.zeta.push_back(z);
  }
  r.zeta_final = z;
  for (size_t k = 1; k < r.zeta.size(); ++k) r.zeta_monotone = r.zeta_monotone && r.zeta[k] >= r.zeta[k - 1];

  r.alpha_final = tr.alpha.empty() ? 0.0 : tr.alpha.back();
  double a_ref = r.alpha_final;
  for (size_t k = 0; k < tr.size(); ++k)
    if (tr.t[k] <= 0.75 * cfg.T) a_ref = tr.alpha[k];
  r.alpha_drift = std::abs(r.alpha_final - a_ref);
  r.alpha_converged = r.alpha_drift <= 0.01 * std::abs(r.alpha_final) + 1e-10;

  try {
    r.damping = damping_monitor(tr, 0.1, 100.0);
    r.damping_ok = r.damping.feasible;
  } catch (const Error& e) {
    r.damping_ok = false;
    r.damping_error = e.what();
  }

  if (r.trivial) {
    r.asymptotic = true;
    r.pass = true;
  } else {
    std::vector<double> ad(tr.alpha_dot.size());
    for (size_t k = 0; k < ad.size(); ++k) ad[k] = std::abs(tr.alpha_dot[k]);
    r.fits.push_back(fit_channel("l2", tr.t, tr.l2, cfg.t_lo, cfg.t_hi, -0.25, 0.08));
    r.fits.push_back(fit_channel("linf", tr.t, tr.linf, cfg.t_lo, cfg.t_hi, -0.5, 0.10));
    r.fits.push_back(fit_channel("h2", tr.t, tr.h2, cfg.t_lo, cfg.t_hi, -0.25, 0.08));
    r.fits.push_back(fit_channel("alpha_dot", tr.t, ad, cfg.t_lo, cfg.t_hi, -0.5, 0.10));
    r.asymptotic = true;
    r.pass = r.alpha_converged;
    for (const ChannelFit& f : r.fits) {
      r.asymptotic = r.asymptotic && f.samples >= 20 && f.residual <= 0.25;
      r.pass = r.pass && f.pass;
    }
    r.pass = r.pass && r.asymptotic;
  }
  r.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void write_rate_report_json(const RateReport& r, const std::string& path) {
  json j;
  json fits = json::array();
  for (const ChannelFit& f : r.fits)
    fits.push_back({{"channel", f.name},
                    {"exponent", number(f.exponent)},
                    {"ci95", number(f.ci)},
                    {"target", f.target},
                    {"tol", f.tol},
                    {"log_residual", number(f.residual)},
                    {"samples", f.samples},
                    {"pass", f.pass}});
  j["fits"] = fits;
  j["trivial"] = r.trivial;
  j["asymptotic"] = r.asymptotic;
  if (!r.asymptotic) j["error"] = "NotInAsymptoticRegime";
  j["alpha_final"] = r.alpha_final;
  j["alpha_drift"] = r.alpha_drift;
  j["alpha_converged"] = r.alpha_converged;
  j["tracking"] = {{"picard_iterations", r.tracking.iterations},
                   {"fixed_point_residual", r.tracking.fixed_point_residual},
                   {"self_consistency", r.tracking.self_consistency},
                   {"coefficients", "calibrated (Liu-Majda mass split)"}};
  j["E0_L1_H2"] = r.e0_h2;
  j["E0_L1_H4"] = r.e0_h4;
  j["zeta_final"] = r.zeta_final;
  j["zeta_monotone"] = r.zeta_monotone;
  j["zeta_over_E0_H2"] = r.e0_h2 > 0 ? number(r.zeta_final / r.e0_h2) : json(nullptr);
  j["zeta_over_E0_H4"] = r.e0_h4 > 0 ? number(r.zeta_final / r.e0_h4) : json(nullptr);
  j["damping"] = {{"ok", r.damping_ok},
                  {"C_min", number(r.damping.c_min)},
                  {"theta", r.damping.theta},
                  {"C_max", r.damping.c_max},
                  {"error", r.damping_error}};
  j["runtime_s"] = r.runtime;
  j["pass"] = r.pass;
  write_json(j, path);
}

TruncatedNonlinearity reduced_nonlinearity(const Problem& pb, double eps) {
  auto st = std::make_shared<ImexStepper>(*pb.sys, pb.profile.ubar, 1.0);
  auto red = std::make_shared<ReducedOperator>(*pb.op);
  const Problem* p = &pb;
  TruncatedNonlinearity n;
  n.eps = eps;
  n.N = [st, red, p](double, const Vec& w) {
    const Vec f = st->implicit_part(w) + st->explicit_part(w);
    const Vec wx = interior_derivative(p->grid, p->n(), w);
    const double den = 1.0 + normalized_pi2(*p->op, wx);
    const double ad = -normalized_pi2(*p->op, f) / den;
    return Vec(project_pi(*p->op, f + ad * wx, 1) - red->apply(w));
  };
  n.norm = [p](const Vec& w) { return p->op->norm(w); };
  return n;
}

Vec cs_direction(const Problem& pb, const PdeSplitFlow& flow) {
  const Grid1D& g = pb.grid;
  const int n = pb.n();
  Vec b(pb.op->dim());
  for (int i = 1; i + 1 < g.m(); ++i) b.segment((i - 1) * n, n).setConstant(std::exp(-g.x(i) * g.x(i) / 4.0));
  Vec w = flow.pi_cs(b);
  const double s = pb.op->norm(w);
  if (s == 0.0) throw Error(ErrorCode::Degenerate, "center-stable direction vanishes");
  return w / s;
}

Vec unstable_direction(const PdeSplitFlow& flow) {
  if (flow.V().cols() == 0) throw Error(ErrorCode::InvalidConfig, "no unstable modes");
  const Vec v = flow.V().col(0);
  return v / flow.op().norm(v);
}

namespace {

double lambda_max_of(const PdeSplitFlow& flow) {
  Eigen::EigenSolver<Mat> es(flow.Lambda(), false);
  double mx = -INFINITY;
  for (int j = 0; j < es.eigenvalues().size(); ++j) mx = std::max(mx, es.eigenvalues()[j].real());
  return mx;
}

// Unstable coordinates after the reduced flow from w0 + V c.
Vec shoot_map(const Problem& pb, const PdeSplitFlow& flow, const Vec& w0, const Vec& c, double T, double dt) {
  ReducedOptions opt;
  opt.dt = dt;
  opt.record_every = 0;
  ReducedState fin;
  try {
    evolve_reduced_shifted(*pb.sys, *pb.op, pb.profile, w0 + flow.V() * c, 0.0, T, opt, &fin);
  } catch (const Error& e) {
    throw Error(ErrorCode::ShootingDiverged, std::string("shooting trajectory failed: ") + e.what());
  }
  return flow.coordinates(fin.v);
}

Vec newton_shoot(const Problem& pb, const PdeSplitFlow& flow, const Vec& w0, Vec c, double T, double dt,
                 double radius, int* iterations, double* residual) {
  const int p = static_cast<int>(c.size());
  for (int it = 1; it <= 30; ++it) {
    const Vec f = shoot_map(pb, flow, w0, c, T, dt);
    Mat J(p, p);
    for (int k = 0; k < p; ++k) {
      Vec cp = c;
      const double d = 1e-7 * std::max(1.0, std::abs(c[k]));
      cp[k] += d;
      J.col(k) = (shoot_map(pb, flow, w0, cp, T, dt) - f) / d;
    }
    const Vec step = J.fullPivLu().solve(-f);
    c += step;
    if (!c.allFinite() || c.norm() > radius)
      throw Error(ErrorCode::ShootingDiverged, "Newton left the truncation ball");
    if (iterations) *iterations = it;
    if (step.norm() <= 1e-14 + 1e-10 * c.norm()) {
      if (residual) *residual = shoot_map(pb, flow, w0, c, T, dt).norm();
      return c;
    }
  }
  throw Error(ErrorCode::ShootingDiverged, "Newton did not converge");
}

}  // namespace

ManifoldPrep prepare_on_manifold(const Problem& pb, const PdeSplitFlow& flow, const Vec& w0,
                                 const ExperimentConfig& cfg, bool with_lp) {
  ManifoldPrep r;
  const int p = static_cast<int>(flow.V().cols());
  if (p == 0) throw Error(ErrorCode::InvalidConfig, "preparation needs unstable modes");
  r.w0 = flow.pi_cs(w0);
  const double lmax = lambda_max_of(flow);
  r.t_shoot = cfg.t_shoot > 0 ? cfg.t_shoot : 5.0 / lmax;
  const double radius = cfg.trunc_eps;
  if (pb.op->norm(r.w0) > radius) throw Error(ErrorCode::InvalidConfig, "cs amplitude exceeds the truncation radius");

  Vec c = Vec::Zero(p);
  if (pb.op->norm(r.w0) > 0) {
    // long horizons are reached by doubling from 5 / lambda_max with warm starts
    double t = std::min(r.t_shoot, 5.0 / lmax);
    c = newton_shoot(pb, flow, r.w0, c, t, cfg.dt, radius, &r.newton_iterations, &r.shoot_residual);
    // other starts inside the ball must land on the same root
    for (double s : {-0.5, 0.5}) {
      Vec c2;
      try {
        c2 = newton_shoot(pb, flow, r.w0, Vec::Constant(p, s * radius), t, cfg.dt, radius, nullptr, nullptr);
      } catch (const Error&) {
        continue;
      }
      if ((c2 - c).norm() > 1e-6 * std::max(c.norm(), 1e-6))
        throw Error(ErrorCode::AmbiguousRoot, "shooting has two roots inside the truncation ball");
    }
    while (t < r.t_shoot) {
      t = std::min(2 * t, r.t_shoot);
      int it = 0;
      c = newton_shoot(pb, flow, r.w0, c, t, cfg.dt, radius, &it, &r.shoot_residual);
      r.newton_iterations += it;
    }
  }
  r.z_coords = c;
  r.z0 = flow.V() * c;
  r.v0 = r.w0 + r.z0;
  if (with_lp) {
    LPOptions lo;
    lo.horizon = cfg.horizon;
    lo.dt = cfg.lp_dt;
    r.lp = pde_csm_solve(flow, reduced_nonlinearity(pb, cfg.trunc_eps), r.w0, lo);
    r.z_lp = flow.coordinates(r.lp.w.front());
    r.lp_agreement = (r.z_lp - c).norm();
  }
  return r;
}

TangencyAudit tangency_audit(const Problem& pb, const PdeSplitFlow& flow, const ExperimentConfig& cfg) {
  TangencyAudit a;
  const Vec dir = cs_direction(pb, flow);
  for (double amp : cfg.amplitudes) {
    const ManifoldPrep m = prepare_on_manifold(pb, flow, amp * dir, cfg, false);
    a.w_norms.push_back(pb.op->norm(m.w0));
    a.z_norms.push_back(pb.op->norm(m.z0));
    a.c_fit = std::max(a.c_fit, a.z_norms.back() / std::pow(a.w_norms.back(), 2));
  }
  a.slope = loglog_slope(a.w_norms, a.z_norms);
  a.pass = a.slope >= 1.9;
  return a;
}

double exit_time(const Problem& pb, const Vec& seed, double radius, double dt, double t_max) {
  const ImexStepper st(*pb.sys, dt);
  Vec u = pb.sys->interior(pb.profile.ubar) + seed;
  const int steps = static_cast<int>(std::lround(t_max / dt));
  const int every = std::max(1, static_cast<int>(std::lround(0.05 / dt)));
  double guess = 0.0, prev_t = 0.0;
  double prev_d = translate_distance(pb, pb.sys->embed(u), guess, &guess);
  if (prev_d > radius) return 0.0;
  for (int k = 1; k <= steps; ++k) {
    u = st.step(u);
    const double t = k * dt;
    if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1e6) return t;
    if (k % every != 0 && k != steps) continue;
    const double d = translate_distance(pb, pb.sys->embed(u), guess, &guess);
    if (d > radius) return prev_t + (t - prev_t) * (radius - prev_d) / (d - prev_d);
    prev_t = t;
    prev_d = d;
  }
  throw Error(ErrorCode::NoExit, "no exit before t = " + std::to_string(t_max));
}

ConditionalRun run_conditional(const Problem& pb, const SpectralDecomposition& sd, const ExperimentConfig& cfg) {
  ConditionalRun r;
  const PdeSplitFlow flow(*pb.op, sd);
  r.radius = cfg.radius > 0 ? cfg.radius : 0.1;
  const double lmax = lambda_max_of(flow);
  ExperimentConfig c = cfg;
  c.horizon = std::max(cfg.horizon, cfg.hold_time + 10.0);
  const ManifoldPrep prep = prepare_on_manifold(pb, flow, cfg.amplitude * cs_direction(pb, flow), c, true);
  r.shoot_lp_agreement = prep.lp_agreement;

  // prepared run: the Lyapunov-Perron trajectory
  for (size_t k = 0; k < prep.lp.t.size(); ++k) {
    if (prep.lp.t[k] > cfg.hold_time + 1e-12) break;
    if (k % 4 != 0) continue;
    const double d = translate_distance(pb, pb.profile.ubar + pb.sys->embed_zero(prep.lp.w[k]));
    r.max_distance = std::max(r.max_distance, d);
  }
  r.stays = r.max_distance < r.radius;

  // the LP trajectory solves the reduced equation: compare with direct integration
  ReducedOptions ro;
  ro.dt = cfg.dt;
  ro.record_every = 0;
  ReducedState fin;
  evolve_reduced_shifted(*pb.sys, *pb.op, pb.profile, prep.lp.w.front(), 0.0, prep.t_shoot, ro, &fin);
  size_t ks = 0;
  while (ks + 1 < prep.lp.t.size() && prep.lp.t[ks] < prep.t_shoot - 1e-12) ++ks;
  r.solution_defect = pb.op->norm(fin.v - prep.lp.w[ks]) / std::max(pb.op->norm(prep.lp.w[ks]), 1e-300);

  const double kick = 1e-3;
  r.predicted_exit = std::log(r.radius / kick) / lmax + 1.0;
  try {
    r.contrast_exit = exit_time(pb, prep.lp.w.front() + kick * unstable_direction(flow), r.radius, cfg.dt,
                                r.predicted_exit + 10.0);
    r.contrast_exits = r.contrast_exit <= r.predicted_exit;
  } catch (const Error&) {
    r.contrast_exits = false;
  }
  r.pass = r.stays && r.contrast_exits;
  return r;
}

ExitReport run_exit_time(const Problem& pb, const SpectralDecomposition& sd, const ExperimentConfig& cfg) {
  ExitReport r;
  const PdeSplitFlow flow(*pb.op, sd);
  r.lambda_max = lambda_max_of(flow);
  r.radius = cfg.radius > 0 ? cfg.radius : 0.1;
  const Vec psi = unstable_direction(flow);
  std::vector<double> logs;
  for (double e : cfg.eps_list) {
    r.eps.push_back(e);
    r.exit_times.push_back(exit_time(pb, e * psi, r.radius, cfg.dt, cfg.t_max));
    logs.push_back(std::log(1.0 / e));
  }
  if (logs.size() >= 2) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < logs.size(); ++i) {
      mx += logs[i] / logs.size();
      my += r.exit_times[i] / logs.size();
    }
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < logs.size(); ++i) {
      sxx += (logs[i] - mx) * (logs[i] - mx);
      sxy += (logs[i] - mx) * (r.exit_times[i] - my);
    }
    r.slope = sxy / sxx;
    r.slope_ok = std::abs(r.slope * r.lambda_max - 1.0) <= 0.15;
  }

  // contrast: same amplitudes on the center-stable side, prepared by
  // shooting over the observation window
  const double window = 2.0 * *std::max_element(r.exit_times.begin(), r.exit_times.end());
  const Vec dir = cs_direction(pb, flow);
  ExperimentConfig c = cfg;
  c.t_shoot = window;
  bool all = true;
  for (double e : cfg.eps_list) {
    bool stays = false;
    try {
      const ManifoldPrep m = prepare_on_manifold(pb, flow, e * dir, c, false);
      exit_time(pb, m.v0, r.radius, cfg.dt, window);
    } catch (const Error& err) {
      stays = err.code() == ErrorCode::NoExit;
    }
    r.cs_no_exit.push_back(stays);
    all = all && stays;
  }
  r.pass = r.slope_ok && all;
  return r;
}

void write_exit_json(const ExitReport& r, const std::string& path) {
  json j;
  j["eps"] = to_json(r.eps);
  j["exit_times"] = to_json(r.exit_times);
  j["slope"] = number(r.slope);
  j["lambda_max"] = number(r.lambda_max);
  j["predicted_slope"] = number(1.0 / r.lambda_max);
  j["radius"] = r.radius;
  j["slope_ok"] = r.slope_ok;
  j["cs_no_exit"] = r.cs_no_exit;
  j["pass"] = r.pass;
  write_json(j, path);
}

GreenReport green_probe(const Problem& pb, const SpectralDecomposition& sd, double y0,
                        const std::vector<double>& t_list, double c_max) {
  const LinearizedOperator& op = *pb.op;
  const Grid1D& g = pb.grid;
  const int n = op.n(), d = op.dim();
  const int node = g.nearest(y0);
  if (node < 1 || node > g.m() - 2) throw Error(ErrorCode::InvalidConfig, "y0 must be an interior node");
  const double yy = g.x(node);
  std::unique_ptr<Projections> proj;
  if (sd.p > 0) proj = std::make_unique<Projections>(sd, false);
  std::unique_ptr<KernelE> kern;
  if (pb.flux) kern = std::make_unique<KernelE>(kernel_from_model(*pb.flux));

  // template speeds: all characteristic speeds on the y0 side, and
  // incoming-to-outgoing transmissions through the shock
  std::vector<double> direct;
  std::vector<std::pair<double, double>> transmitted;  // (arrival time, outgoing speed)
  if (pb.flux) {
    const EndpointData e = endpoint_data(*pb.flux);
    const Vec& near = yy <= 0 ? e.a_minus : e.a_plus;
    for (int k = 0; k < near.size(); ++k) direct.push_back(near[k]);
    for (int k = 0; k < near.size(); ++k) {
      const bool incoming = yy <= 0 ? near[k] > 0 : near[k] < 0;
      if (!incoming) continue;
      for (int j = 0; j < e.a_minus.size(); ++j)
        if (e.a_minus[j] < 0) transmitted.push_back({std::abs(yy / near[k]), e.a_minus[j]});
      for (int j = 0; j < e.a_plus.size(); ++j)
        if (e.a_plus[j] > 0) transmitted.push_back({std::abs(yy / near[k]), e.a_plus[j]});
    }
  } else {
    direct.push_back(0.0);
  }

  GreenReport r;
  r.t_list = t_list;
  std::vector<std::vector<double>> rem(t_list.size());
  std::vector<double> floors(t_list.size());
  for (size_t q = 0; q < t_list.size(); ++q) {
    const double t = t_list[q];
    std::vector<double> col_max(d, 0.0);
    Vec worst = Vec::Zero(d);
    double gmax = 0.0, mass = 0.0;
    for (int j = 0; j < n; ++j) {
      Vec delta = Vec::Zero(d);
      delta[(node - 1) * n + j] = 1.0 / g.h();
      const Vec G = semigroup_apply(op, delta, t);
      Vec R = G;
      if (proj) R -= proj->unstable_flow(proj->coordinates(delta), t);
      if (kern) {
        const double ej = eval_kernel(*kern, yy, t, KernelChannel::E)[j];
        R -= ej * pb.sys->interior(pb.profile.ubar_x);
      }
      gmax = std::max(gmax, G.cwiseAbs().maxCoeff());
      worst = worst.cwiseMax(R.cwiseAbs());
      mass += g.h() * R.cwiseAbs().sum();
    }
    floors[q] = 1e-12 * gmax;
    rem[q].assign(worst.data(), worst.data() + d);
    r.residual_mass.push_back(mass);
  }
  r.floor = *std::max_element(floors.begin(), floors.end());

  auto tmpl = [&](double x, double t, double M, double eta) {
    double s = 0.0;
    for (double a : direct) s += std::exp(-std::pow(x - yy - a * t, 2) / (M * t));
    for (const auto& [arrive, a] : transmitted)
      if (t > arrive) s += std::exp(-std::pow(x - a * (t - arrive), 2) / (M * t));
    return s / std::sqrt(t) + std::exp(-eta * (std::abs(x - yy) + t));
  };
  double best = INFINITY, best_m = NAN, best_eta = NAN;
  for (double M : {1.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0})
    for (double eta : {1.0, 0.5, 0.25, 0.1, 0.05, 0.02, 0.01}) {
      double c = 0.0;
      for (size_t q = 0; q < t_list.size() && c <= best; ++q)
        for (int i = 0; i < d; ++i) {
          if (rem[q][i] <= floors[q]) continue;
          const double tv = tmpl(g.x(i / n + 1), t_list[q], M, eta);
          c = tv > 0 ? std::max(c, rem[q][i] / tv) : INFINITY;
        }
      if (c < best) {
        best = c;
        best_m = M;
        best_eta = eta;
      }
    }
  for (size_t q = 0; q < t_list.size(); ++q) {
    double c = 0.0;
    for (int i = 0; i < d; ++i)
      if (rem[q][i] > floors[q]) c = std::max(c, rem[q][i] / tmpl(g.x(i / n + 1), t_list[q], best_m, best_eta));
    r.c_fit.push_back(c);
    r.m_fit.push_back(best_m);
    r.eta_fit.push_back(best_eta);
    r.margins.push_back(c > 0 ? c_max / c : INFINITY);
  }
  r.feasible = best <= c_max;
  if (!r.feasible) throw Error(ErrorCode::TemplateInfeasible, "no template constants with C <= " + std::to_string(c_max));
  return r;
}

void write_green_json(const GreenReport& r, const std::string& path) {
  json j;
  j["t"] = to_json(r.t_list);
  j["C"] = to_json(r.c_fit);
  j["M"] = to_json(r.m_fit);
  j["eta"] = to_json(r.eta_fit);
  j["margin"] = to_json(r.margins);
  j["remainder_l1"] = to_json(r.residual_mass);
  j["floor"] = r.floor;
  j["feasible"] = r.feasible;
  write_json(j, path);
}

}  // namespace shockstab
