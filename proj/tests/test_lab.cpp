#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "shockstab/errors.hpp"
#include "shockstab/lab.hpp"

using namespace shockstab;

namespace {

ExperimentConfig pulse_config() {
  return parse_config(R"({"model": "cubic_pulse", "grid": {"x_min": -20, "x_max": 20, "h": 0.2},
                          "scheme": {"dt": 0.01, "T": 1}, "manifold": {"eps": 0.05, "horizon": 30, "lp_dt": 0.05},
                          "output_dir": "out/test_lab"})");
}

ExperimentConfig burgers_config() {
  return parse_config(R"({"model": {"type": "burgers", "u_minus": 1, "u_plus": -1},
                          "grid": {"x_min": -25, "x_max": 25, "h": 0.1}, "scheme": {"dt": 0.02, "T": 2}})");
}

int run_cli(std::vector<std::string> args) {
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  return cli(static_cast<int>(argv.size()), argv.data());
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"({"model": {"type": "coupled2", "u_minus": [1.5, 1.5], "u_plus": [2.5, -0.5]},
                                              "grid": {"x_min": -10, "x_max": 12, "h": 0.25},
                                              "rate_window": [5, 50], "green": {"t_list": [2, 3]}})");
  CHECK(c.model == "coupled2");
  CHECK(c.u_minus.size() == 2);
  CHECK(c.u_plus[1] == -0.5);
  CHECK(c.x_max == 12.0);
  CHECK(c.t_lo == 5.0);
  CHECK(c.t_hi == 50.0);
  CHECK(c.t_list.size() == 2);
  CHECK(c.dt == 0.01);

  CHECK_THROWS_AS(parse_config("{not json"), Error);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"h": -1}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"x_min": 3, "x_max": 1}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"h": "fine"}})"), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
  ExperimentConfig bad = burgers_config();
  bad.model = "kdv";
  CHECK_THROWS_AS(build_problem(bad), Error);
}

TEST_CASE("perturbation shapes and translate distance") {
  ExperimentConfig c = burgers_config();
  const auto pb = build_problem(c);
  c.shape = "zero";
  CHECK(make_perturbation(*pb, c).norm() == 0.0);
  c.shape = "random";
  c.amplitude = 0.02;
  const Vec r = make_perturbation(*pb, c);
  CHECK(r.cwiseAbs().maxCoeff() == doctest::Approx(0.02));
  CHECK(r[0] == 0.0);
  c.shape = "translate";
  c.shift = 0.3;
  const Vec t = make_perturbation(*pb, c);
  double arg = 0.0;
  const double d = translate_distance(*pb, pb->profile.ubar + t, 0.0, &arg);
  CHECK(d <= 1e-6);
  CHECK(arg == doctest::Approx(0.3).epsilon(1e-4));
  c.shape = "sawtooth";
  CHECK_THROWS_AS(make_perturbation(*pb, c), Error);
}

TEST_CASE("split flow projections") {
  const auto pb = build_problem(pulse_config());
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  const PdeSplitFlow flow(*pb->op, sd);
  REQUIRE(flow.V().cols() == 1);
  const Vec psi = unstable_direction(flow);
  CHECK(flow.norm(flow.pi_cs(psi)) <= 1e-8);
  CHECK(flow.norm(flow.pi_u(psi) - psi) <= 1e-8);
  const Vec w = cs_direction(*pb, flow);
  CHECK(flow.norm(w) == doctest::Approx(1.0));
  CHECK(flow.norm(flow.pi_u(w)) <= 1e-8);
  Vec x = Vec::Zero(flow.dim());
  for (int i = 0; i < x.size(); ++i) x[i] = std::sin(0.37 * i) * std::exp(-0.01 * i);
  const Vec r = project_pi(flow.op(), x, 1);
  CHECK(flow.norm(flow.pi_u(r) + flow.pi_cs(r) - r) <= 1e-10);
  CHECK(flow.norm(flow.pi_u(flow.pi_u(x)) - flow.pi_u(x)) <= 1e-10);
  const Vec Lpsi = flow.op().apply(psi);
  CHECK(flow.norm(Lpsi - flow.Lambda()(0, 0) * psi) <= 1e-6 * std::abs(flow.Lambda()(0, 0)));
}

TEST_CASE("preparation of zero data and a small tangency audit") {
  ExperimentConfig c = pulse_config();
  const auto pb = build_problem(c);
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  const PdeSplitFlow flow(*pb->op, sd);
  const ManifoldPrep z = prepare_on_manifold(*pb, flow, Vec::Zero(flow.dim()), c, false);
  CHECK(z.z0.norm() == 0.0);
  CHECK(z.v0.norm() == 0.0);

  c.amplitudes = {1e-3, 4e-3, 1.6e-2};
  const TangencyAudit a = tangency_audit(*pb, flow, c);
  CHECK(a.slope >= 1.9);
  CHECK(a.pass);
  CHECK(a.z_norms.front() < a.w_norms.front() * a.w_norms.front());

  c.amplitude = 0.1;
  CHECK_THROWS_AS(prepare_on_manifold(*pb, flow, c.amplitude * cs_direction(*pb, flow), c, false), Error);
}

TEST_CASE("exit time of the unstable direction") {
  const ExperimentConfig c = pulse_config();
  const auto pb = build_problem(c);
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  const PdeSplitFlow flow(*pb->op, sd);
  const Vec psi = unstable_direction(flow);
  const double t3 = exit_time(*pb, 1e-3 * psi, 0.1, c.dt, 10.0);
  const double t4 = exit_time(*pb, 1e-4 * psi, 0.1, c.dt, 10.0);
  CHECK((t4 - t3) * 3.0 == doctest::Approx(std::log(10.0)).epsilon(0.1));
  CHECK_THROWS_AS(exit_time(*pb, 1e-4 * psi, 0.1, c.dt, 0.5), Error);
}

TEST_CASE("green probe at small times") {
  ExperimentConfig c = burgers_config();
  const auto pb = build_problem(c);
  const SpectralDecomposition sd = compute_spectrum(*pb->op);
  const GreenReport g = green_probe(*pb, sd, -5.0, {1.0, 2.0});
  CHECK(g.feasible);
  REQUIRE(g.c_fit.size() == 2);
  for (double cf : g.c_fit) CHECK(cf <= 100.0);
  CHECK(g.floor > 0.0);
  CHECK_THROWS_AS(green_probe(*pb, sd, -5.0, {1.0}, 1e-6), Error);
}

TEST_CASE("rate fit needs enough samples") {
  std::vector<double> t, y;
  for (int i = 1; i <= 10; ++i) {
    t.push_back(10.0 * i);
    y.push_back(std::pow(10.0 * i, -0.5));
  }
  const ChannelFit few = fit_channel("x", t, y, 1, 1000, -0.5, 0.1);
  CHECK_FALSE(few.pass);
  for (int i = 11; i <= 40; ++i) {
    t.push_back(10.0 * i);
    y.push_back(std::pow(10.0 * i, -0.5));
  }
  const ChannelFit ok = fit_channel("x", t, y, 1, 1000, -0.5, 0.1);
  CHECK(ok.pass);
  CHECK(ok.exponent == doctest::Approx(-0.5));
  CHECK(ok.samples == 40);
}

TEST_CASE("trivial rates run") {
  ExperimentConfig c = burgers_config();
  c.shape = "zero";
  c.T = 2.0;
  c.t_lo = 0.5;
  c.t_hi = 2.0;
  const RateReport r = run_rates(c);
  CHECK(r.trivial);
  CHECK(r.alpha_final == 0.0);
}

TEST_CASE("command line exit codes") {
  const std::string root = (std::filesystem::temp_directory_path() / "shockstab_test_out").string();
  setenv("SHOCKSTAB_OUTPUT_ROOT", root.c_str(), 1);
  CHECK(run_cli({"shockstab", "spectrum", "-c", "/nonexistent.json"}) == 1);
  CHECK(run_cli({"shockstab", "bogus"}) == 1);
  const std::string good = write_temp(
      "shockstab_pt_good.json",
      R"({"model": "poschl_teller", "grid": {"x_min": -12, "x_max": 12, "h": 0.1},
          "spectrum": {"expect": [4, 1], "tol": 1e-2, "check_refinement": false}, "output_dir": "pt_good"})");
  CHECK(run_cli({"shockstab", "spectrum", "-c", good}) == 0);
  CHECK(std::filesystem::exists(std::filesystem::path(root) / "pt_good" / "eigenpairs.csv"));
  const std::string wrong = write_temp(
      "shockstab_pt_wrong.json",
      R"({"model": "poschl_teller", "grid": {"x_min": -12, "x_max": 12, "h": 0.1},
          "spectrum": {"expect": [2.5], "tol": 1e-2, "check_refinement": false}, "output_dir": "pt_wrong"})");
  CHECK(run_cli({"shockstab", "spectrum", "-c", wrong}) == 2);
  const std::string prof = write_temp(
      "shockstab_profile.json",
      R"({"model": {"type": "burgers", "u_minus": 1, "u_plus": -1}, "grid": {"x_min": -20, "x_max": 20, "h": 0.1},
          "output_dir": "prof"})");
  CHECK(run_cli({"shockstab", "profile", "-c", prof}) == 0);
  unsetenv("SHOCKSTAB_OUTPUT_ROOT");
}
