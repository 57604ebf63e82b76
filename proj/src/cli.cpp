#include <cmath>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "shockstab/lab.hpp"

namespace shockstab {

namespace {

using nlohmann::json;

constexpr int kPass = 0;
constexpr int kError = 1;
constexpr int kFailed = 2;

int verdict(bool ok, const std::string& what) {
  std::cout << (ok ? "PASS " : "FAIL ") << what << "\n";
  return ok ? kPass : kFailed;
}

int cmd_profile(const ExperimentConfig& cfg) {
  const Grid1D g = Grid1D::with_spacing(cfg.x_min, cfg.x_max, cfg.h);
  const auto pb = build_problem(cfg);
  if (!pb->sys) throw Error(ErrorCode::InvalidConfig, "profile needs an evolution model");
  Profile p = pb->profile;
  if (pb->flux) p = solve_profile_conservation(*pb->flux, g);
  write_profile_csv(p, output_path(cfg, "profile.csv"));
  write_profile_json(p, output_path(cfg, "profile.json"));
  bool ok = p.residual_sup <= 1e-8;
  std::cout << "residual_sup " << p.residual_sup << " theta_hat " << p.theta_hat << "\n";
  if (pb->flux) {
    const TransversalityReport t = check_transversality(*pb->flux, p);
    std::cout << "transversality_angle " << t.angle << "\n";
  }
  return verdict(ok, "profile residual");
}

int cmd_spectrum(const ExperimentConfig& cfg) {
  const auto pb = build_problem(cfg);
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  write_eigenpairs_csv(sd, output_path(cfg, "eigenpairs.csv"));
  {
    std::ofstream os(output_path(cfg, "eigenvalues.csv"));
    os.precision(15);
    os << "re,im\n";
    for (const auto& l : sd.all_eigenvalues) os << l.real() << "," << l.imag() << "\n";
  }
  write_d1_json(scan_imaginary_axis(sd, 10.0, 401, 1e-8), output_path(cfg, "d1.json"));
  bool ok = true;
  std::cout << "p " << sd.p << "\n";
  for (const auto& l : sd.unstable_eigenvalues()) std::cout << "lambda " << l.real() << " " << l.imag() << "\n";
  for (double want : cfg.expect_eigenvalues) {
    double best = INFINITY;
    for (const auto& l : sd.unstable_eigenvalues()) best = std::min(best, std::abs(l - std::complex<double>(want)));
    ok = ok && best <= cfg.eig_tol;
  }
  if (cfg.check_refinement) {
    const auto fine = build_problem(cfg, cfg.h / 2);
    try {
      check_count_stable(sd, compute_spectrum(*fine->op));
    } catch (const Error& e) {
      std::cout << e.what() << "\n";
      ok = false;
    }
  }
  return verdict(ok, "spectrum");
}

int cmd_manifold(const ExperimentConfig& cfg) {
  const auto pb = build_problem(cfg);
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  const PdeSplitFlow flow(*pb->op, sd);
  const TangencyAudit a = tangency_audit(*pb, flow, cfg);
  const ManifoldPrep m = prepare_on_manifold(*pb, flow, cfg.amplitude * cs_direction(*pb, flow), cfg, true);
  json j;
  j["w_norms"] = a.w_norms;
  j["z_norms"] = a.z_norms;
  j["tangency_slope"] = a.slope;
  j["C_fit"] = a.c_fit;
  j["t_shoot"] = m.t_shoot;
  j["newton_iterations"] = m.newton_iterations;
  j["shoot_residual"] = m.shoot_residual;
  j["lp_agreement"] = m.lp_agreement;
  j["lp_iterations"] = m.lp.iterations;
  j["lp_contraction_factor"] = m.lp.contraction_factor;
  std::ofstream(output_path(cfg, "manifold.json")) << j.dump(2) << "\n";
  std::cout << "tangency_slope " << a.slope << " lp_agreement " << m.lp_agreement << "\n";
  return verdict(a.pass && m.lp_agreement <= 1e-3, "manifold preparation");
}

int cmd_evolve(const ExperimentConfig& cfg) {
  const auto pb = build_problem(cfg);
  Vec v0 = make_perturbation(*pb, cfg);
  if (cfg.manifold_mode != "none") {
    const SpectralDecomposition sd = compute_spectrum(*pb->op);
    const PdeSplitFlow flow(*pb->op, sd);
    const Vec w = flow.pi_cs(pb->sys->interior(v0));
    if (cfg.manifold_mode == "project_cs")
      v0 = pb->sys->embed_zero(w);
    else if (cfg.manifold_mode == "shoot")
      v0 = pb->sys->embed_zero(prepare_on_manifold(*pb, flow, w, cfg, false).v0);
    else
      throw Error(ErrorCode::InvalidConfig, "unknown manifold mode " + cfg.manifold_mode);
  }
  TrajectoryRecord tr = evolve_pde(*pb->sys, pb->profile, pb->profile.ubar + v0, cfg.T, cfg.dt, cfg.record_every);
  tr.model = cfg.model;
  write_trajectory_csv(tr, output_path(cfg, "trajectory.csv"));
  std::cout << "final_l2 " << tr.l2.back() << "\n";
  return verdict(true, "evolve");
}

int cmd_track(const ExperimentConfig& cfg) {
  const auto pb = build_problem(cfg);
  if (!pb->flux) throw Error(ErrorCode::InvalidConfig, "tracking needs a conservation law");
  const Vec v0 = make_perturbation(*pb, cfg);
  const ReducedState init = reduced_initial_data(*pb->op, pb->sys->interior(v0));
  ReducedOptions opt;
  opt.dt = cfg.dt;
  opt.record_every = cfg.record_every;
  opt.snapshot_times = tracking_snapshot_times(cfg.T);
  TrajectoryRecord tr = evolve_reduced_shifted(*pb->sys, *pb->op, pb->profile, init.v, init.alpha, cfg.T, opt);
  const KernelE k = kernel_from_model(*pb->flux);
  const NonlinearResidual nr{pb->flux.get(), &pb->profile};
  const TrackingResult r = attach_tracking(tr, k, nr, v0);
  write_trajectory_csv(tr, output_path(cfg, "trajectory.csv"));
  const KernelAudit a = audit_kernel(k);
  write_kernel_audit_json(a, output_path(cfg, "kernel_audit.json"));
  bool ok = a.exponents_ok && a.max_fd_error <= 1e-8 && r.fixed_point_residual <= 1e-6;
  std::cout << "alpha_final " << r.alpha.back() << " picard_residual " << r.fixed_point_residual << "\n";
  if (cfg.shape == "translate") ok = ok && std::abs(r.alpha.back() - cfg.shift) <= 0.1 * std::abs(cfg.shift);
  return verdict(ok, "tracking");
}

int cmd_rates(const ExperimentConfig& cfg) {
  const RateReport r = run_rates(cfg);
  write_rate_report_json(r, output_path(cfg, "rates.json"));
  write_trajectory_csv(r.trajectory, output_path(cfg, "trajectory.csv"));
  for (const ChannelFit& f : r.fits)
    std::cout << f.name << " exponent " << f.exponent << " target " << f.target << (f.pass ? " ok" : " off") << "\n";
  if (!r.asymptotic) std::cout << "NotInAsymptoticRegime\n";
  return verdict(r.pass, r.trivial ? "rates (trivial run)" : "rates");
}

int cmd_exit_time(const ExperimentConfig& cfg) {
  const auto pb = build_problem(cfg);
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  const ExitReport e = run_exit_time(*pb, sd, cfg);
  write_exit_json(e, output_path(cfg, "exit_time.json"));
  std::cout << "slope " << e.slope << " predicted " << 1.0 / e.lambda_max << "\n";
  return verdict(e.pass, "exit time");
}

int cmd_green(const ExperimentConfig& cfg) {
  const auto pb = build_problem(cfg);
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  try {
    const GreenReport g = green_probe(*pb, sd, cfg.y0, cfg.t_list);
    write_green_json(g, output_path(cfg, "green.json"));
    return verdict(g.feasible, "green probe");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TemplateInfeasible) throw;
    std::cout << e.what() << "\n";
    return verdict(false, "green probe");
  }
}

}  // namespace

int cli(int argc, char** argv) {
  CLI::App app{"Viscous shock stability laboratory"};
  app.require_subcommand(1);
  std::string config;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&);
  };
  const Entry entries[] = {
      {"profile", "solve the standing wave", cmd_profile},
      {"spectrum", "unstable eigenvalues and projections", cmd_spectrum},
      {"manifold", "center-stable manifold preparation", cmd_manifold},
      {"evolve", "time integration of the full equation", cmd_evolve},
      {"track", "shock location from the Green kernel", cmd_track},
      {"rates", "decay exponents", cmd_rates},
      {"exit-time", "exit from the translate neighborhood", cmd_exit_time},
      {"green-probe", "Green function decomposition", cmd_green},
  };
  std::vector<CLI::App*> subs;
  for (const Entry& e : entries) {
    CLI::App* s = app.add_subcommand(e.name, e.help);
    s->add_option("-c,--config", config, "experiment JSON")->required();
    subs.push_back(s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kError;
  }
  try {
    const ExperimentConfig cfg = load_config(config);
    for (size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) return entries[i].run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}

}  // namespace shockstab
