#include "doctest.h"

#include <cmath>

#include "shockstab/errors.hpp"
#include "shockstab/tracking.hpp"

using namespace shockstab;

namespace {

// Maclaurin series, independent of std::erf.
double series_erf(double x) {
  double term = x, sum = x;
  for (int n = 1; n < 60; ++n) {
    term *= -x * x / n;
    sum += term / (2 * n + 1);
  }
  return 2 / std::sqrt(M_PI) * sum;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double ch(const KernelE& k, double y, double t, KernelChannel w) { return eval_kernel(k, y, t, w)[0]; }

}  // namespace

TEST_CASE("kernel value at the shock") {
  const KernelE k = scalar_kernel(1.0, -1.0, 1.0);
  CHECK(series_erf(0.5) == doctest::Approx(0.5204998778).epsilon(1e-9));
  CHECK(ch(k, 0.0, 1.0, KernelChannel::E) == doctest::Approx(series_erf(0.5)).epsilon(1e-12));
  CHECK(ch(k, 0.0, 4.0, KernelChannel::E) == doctest::Approx(series_erf(1.0)).epsilon(1e-12));
  CHECK(std::abs(ch(k, -60.0, 1.0, KernelChannel::E)) < 1e-300 + 1e-15);
  CHECK(std::abs(ch(k, -1.0, 1e-6, KernelChannel::E)) < 1e-12);
  CHECK(std::abs(ch(k, 1.0, 1e-6, KernelChannel::E)) < 1e-12);
  CHECK(ch(k, -3.0, 400.0, KernelChannel::E) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("kernel derivatives match finite differences") {
  const KernelE k = scalar_kernel(1.3, -0.7, -0.4);
  const double d = 1e-4;
  for (double t : {0.3, 1.0, 5.0})
    for (double y : {-4.0, -1.0, -0.2, 0.5, 3.0}) {
      const double fy = (ch(k, y + d, t, KernelChannel::E) - ch(k, y - d, t, KernelChannel::E)) / (2 * d);
      CHECK(std::abs(fy - ch(k, y, t, KernelChannel::Ey)) <= 1e-8);
      const double ft = (ch(k, y, t + d, KernelChannel::E) - ch(k, y, t - d, KernelChannel::E)) / (2 * d);
      CHECK(std::abs(ft - ch(k, y, t, KernelChannel::Et)) <= 1e-6);
      const double fty = (ch(k, y + d, t, KernelChannel::Et) - ch(k, y - d, t, KernelChannel::Et)) / (2 * d);
      CHECK(std::abs(fty - ch(k, y, t, KernelChannel::Ety)) <= 1e-6);
    }
  const KernelE b = scalar_kernel(1.0, -1.0, 1.0);
  const double ft = (ch(b, -1, 1 + d, KernelChannel::E) - ch(b, -1, 1 - d, KernelChannel::E)) / (2 * d);
  CHECK(std::abs(ft - ch(b, -1, 1, KernelChannel::Et)) <= 1e-6);
}

TEST_CASE("kernel domain") {
  const KernelE k = scalar_kernel(1.0, -1.0, 1.0);
  CHECK_THROWS_AS(eval_kernel(k, -1.0, 0.0, KernelChannel::Ey), Error);
  CHECK_THROWS_AS(eval_kernel(k, -1.0, -1.0, KernelChannel::E), Error);
  CHECK(ch(k, -1.0, 0.0, KernelChannel::E) == 0.0);
  CHECK_THROWS_AS(scalar_kernel(-1.0, -1.0, 1.0), Error);
}

TEST_CASE("burgers coefficient") {
  const KernelE k = kernel_from_model(burgers(1.0, -1.0));
  REQUIRE(k.a_minus.size() == 1);
  REQUIRE(k.a_plus.size() == 1);
  CHECK(k.a_minus[0] == doctest::Approx(1.0));
  CHECK(k.a_plus[0] == doctest::Approx(-1.0));
  CHECK(k.l_minus[0][0] == doctest::Approx(-0.5));
  CHECK(k.l_plus[0][0] == doctest::Approx(-0.5));
}

TEST_CASE("system coefficients recover a unit jump") {
  const FluxModel m = coupled2(v2(1.5, 1.5), v2(2.5, -0.5));
  const KernelE k = kernel_from_model(m);
  CHECK(k.a_minus.size() + k.a_plus.size() == 3);
  const Vec jump = m.u_plus - m.u_minus;
  double sm = 0.0, sp = 0.0;
  for (const Vec& l : k.l_minus) sm += l.dot(jump);
  for (const Vec& l : k.l_plus) sp += l.dot(jump);
  CHECK(sm == doctest::Approx(1.0));
  CHECK(sp == doctest::Approx(1.0));
}

TEST_CASE("kernel audit") {
  const KernelAudit a = audit_kernel(scalar_kernel(1.0, -1.0, -0.5));
  CHECK(a.exponents_ok);
  for (size_t i = 0; i < a.targets.size(); ++i) {
    CHECK(std::abs(a.ey_exponents[i] - a.targets[i]) <= 0.05);
    CHECK(std::abs(a.et_exponents[i] - a.targets[i]) <= 0.05);
    CHECK(std::abs(a.ety_exponents[i] - a.ety_targets[i]) <= 0.05);
  }
  CHECK(a.max_fd_error <= 1e-8);
  CHECK(a.c_fit_max / a.c_fit_min <= 2.0);
  CHECK(a.template_m == 4.0);
  CHECK(a.template_c == doctest::Approx(0.5 / std::sqrt(4 * M_PI)).epsilon(1e-3));
  CHECK(std::isfinite(a.template_c));
}

TEST_CASE("loglog slope") {
  std::vector<double> x, y;
  for (int i = 1; i <= 10; ++i) {
    x.push_back(i);
    y.push_back(3 * std::pow(i, -0.75));
  }
  CHECK(loglog_slope(x, y) == doctest::Approx(-0.75));
}

TEST_CASE("snapshot schedule") {
  const std::vector<double> s = tracking_snapshot_times(20);
  CHECK(s.front() == 0.0);
  CHECK(s.size() == 111);
  CHECK(s.back() == doctest::Approx(20.0));
  CHECK(s[100] == doctest::Approx(10.0));
}

namespace {

struct BurgersRun {
  FluxModel model = burgers(1.0, -1.0);
  Grid1D grid = Grid1D::with_spacing(-30, 30, 0.1);
  std::unique_ptr<ConservationSystem> sys;
  Profile profile;
  std::unique_ptr<LinearizedOperator> op;
  BurgersRun() {
    sys = std::make_unique<ConservationSystem>(model, grid);
    profile = discrete_steady_state(*sys, solve_profile_conservation(model, grid));
    op = std::make_unique<LinearizedOperator>(*sys, profile);
  }
  TrajectoryRecord run(const Vec& raw, double T) const {
    const ReducedState init = reduced_initial_data(*op, sys->interior(raw));
    ReducedOptions opt;
    opt.dt = 0.02;
    opt.record_every = 50;
    opt.snapshot_times = tracking_snapshot_times(T);
    return evolve_reduced_shifted(*sys, *op, profile, init.v, init.alpha, T, opt);
  }
};

}  // namespace

TEST_CASE("zero data give zero shift") {
  const BurgersRun b;
  TrajectoryRecord tr = b.run(Vec::Zero(b.grid.m()), 5.0);
  const NonlinearResidual nr{&b.model, &b.profile};
  const TrackingResult r = attach_tracking(tr, kernel_from_model(b.model), nr, Vec::Zero(b.grid.m()));
  for (double a : r.alpha) CHECK(a == 0.0);
  for (double a : r.alpha_dot) CHECK(a == 0.0);
}

TEST_CASE("translate data are tracked to the imposed shift") {
  const BurgersRun b;
  const double shift = 0.05;
  const Vec raw =
      shifted(b.grid, 1, b.profile.ubar, shift, b.profile.u_minus, b.profile.u_plus) - b.profile.ubar;
  TrajectoryRecord tr = b.run(raw, 100.0);
  const NonlinearResidual nr{&b.model, &b.profile};
  const TrackingResult r = attach_tracking(tr, kernel_from_model(b.model), nr, raw);
  CHECK(r.alpha.back() == doctest::Approx(shift).epsilon(0.1));
  CHECK(r.fixed_point_residual <= 1e-6);
  CHECK(r.iterations >= 2);
  CHECK(tr.alpha.back() == doctest::Approx(r.alpha.back()));
}

TEST_CASE("gap check") {
  const Grid1D g = Grid1D::with_spacing(-5, 5, 0.5);
  const KernelE k = scalar_kernel(1.0, -1.0, -0.5);
  const Vec z = Vec::Zero(g.m());
  auto zero = [](const Vec& v) { return Vec(Vec::Zero(v.size())); };
  CHECK_THROWS_AS(compute_alpha(k, g, z, {0.0, 2.0}, {z, z}, zero), Error);
  CHECK_THROWS_AS(compute_alpha(k, g, z, {0.5, 1.0}, {z, z}, zero), Error);
  CHECK_NOTHROW(compute_alpha(k, g, z, {0.0, 1.0}, {z, z}, zero));
}
