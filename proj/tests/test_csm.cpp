#include "doctest.h"

#include <cmath>

#include "shockstab/csm.hpp"
#include "shockstab/errors.hpp"

using namespace shockstab;

namespace {

Mat diag(std::initializer_list<double> d) {
  Vec v(d.size());
  int i = 0;
  for (double x : d) v[i++] = x;
  return v.asDiagonal();
}

Vec vec(std::initializer_list<double> d) {
  Vec v(d.size());
  int i = 0;
  for (double x : d) v[i++] = x;
  return v;
}

TruncatedNonlinearity quadratic2(double eps) {
  TruncatedNonlinearity n;
  n.eps = eps;
  n.N = [](double, const Vec& w) { return vec({0.0, w[0] * w[0]}); };
  return n;
}

// Bisection on v0 for the bounded forward orbit of u' = -u, v' = v + u^2.
double shooting_oracle(double u0) {
  auto blows_up = [&](double v0) {
    double u = u0, v = v0;
    const double h = 1e-3;
    for (int k = 0; k < 20000; ++k) {
      auto f = [](double a, double b) { return std::pair<double, double>(-a, b + a * a); };
      auto [a1, b1] = f(u, v);
      auto [a2, b2] = f(u + h / 2 * a1, v + h / 2 * b1);
      auto [a3, b3] = f(u + h / 2 * a2, v + h / 2 * b2);
      auto [a4, b4] = f(u + h * a3, v + h * b3);
      u += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
      v += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
      if (std::abs(v) > 1.0) return v > 0;
    }
    return v > 0;
  };
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (blows_up(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("cutoff profile") {
  CHECK(cutoff(0.0) == 1.0);
  CHECK(cutoff(1.0) == 1.0);
  CHECK(cutoff(2.0) == 0.0);
  CHECK(cutoff(5.0) == 0.0);
  CHECK(cutoff(1.5) == doctest::Approx(0.5));
  const double h = 1e-6;
  for (double x : {1.1, 1.4, 1.8})
    CHECK(cutoff_derivative(x) == doctest::Approx((cutoff(x + h) - cutoff(x - h)) / (2 * h)).epsilon(1e-6));
  CHECK(cutoff_derivative_bound() > 1.0);
}

TEST_CASE("truncation matches N inside and vanishes outside") {
  const TruncatedNonlinearity n = quadratic2(0.1);
  const Vec in = vec({0.05, 0.02}), out = vec({0.3, 0.0});
  CHECK((n(0, in) - n.N(0, in)).norm() == 0.0);
  CHECK(n(0, out).norm() == 0.0);
}

TEST_CASE("lipschitz constant scales linearly in eps") {
  std::vector<double> ratio;
  for (double eps : {0.01, 0.02, 0.04, 0.08}) {
    const LipschitzAudit a = audit_lipschitz(quadratic2(eps), 2);
    CHECK(a.measured <= a.bound);
    ratio.push_back(a.measured / eps);
  }
  for (double r : ratio) CHECK(std::abs(r / ratio[0] - 1.0) <= 0.2);
}

TEST_CASE("linear case is one exponential") {
  const Dichotomy d(diag({-1.0, 1.0}));
  TruncatedNonlinearity zero;
  zero.eps = 0.1;
  zero.N = [](double, const Vec& w) { return Vec::Zero(w.size()); };
  const LPTrajectory tr = lyapunov_perron_solve(d, zero, vec({0.1, 0.0}), {.horizon = 5.0, .dt = 0.01});
  for (size_t k = 0; k < tr.t.size(); ++k) CHECK((tr.w[k] - vec({0.1 * std::exp(-tr.t[k]), 0.0})).norm() <= 1e-12);
  CHECK(tr.iterations == 1);
  const LPTrajectory z = lyapunov_perron_solve(d, quadratic2(0.2), vec({0.0, 0.0}));
  for (const auto& w : z.w) CHECK(w.norm() == 0.0);
}

TEST_CASE("quadratic planar system") {
  const Dichotomy d(diag({-1.0, 1.0}));
  CHECK(d.unstable_dim() == 1);
  CHECK(d.eta < 1.0);
  CHECK(d.theta > 0.0);
  CHECK(d.theta < d.eta);
  const TruncatedNonlinearity n = quadratic2(0.2);
  std::vector<Vec> samples;
  for (double u : {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, -0.1}) samples.push_back(vec({u, 0.0}));
  const LPOptions opt{.horizon = 20.0, .dt = 0.01};
  const ManifoldGraph g = build_graph(d, n, samples, opt);
  for (size_t k = 0; k < samples.size(); ++k) {
    const double u = samples[k][0];
    CHECK(std::abs(g.values[k][1] + u * u / 3) <= 1e-6);
  }
  CHECK(g.contraction_factor < 0.5);
  CHECK(tangency_slope(g, 1e-3, 1e-2) >= 1.9);
  CHECK(std::abs(shooting_oracle(0.1) + 0.01 / 3) <= 1e-6);

  const InvarianceReport inv = verify_invariance(g, d, n, 1.0, opt);
  CHECK(inv.max_residual <= 1e-6);
  const InvarianceReport off = verify_invariance(g, d, n, 1.0, opt, 0.01);
  for (double r : off.residuals) CHECK(r == doctest::Approx(0.01 * std::exp(1.0)).epsilon(0.05));

  // weight window
  const ManifoldGraph g2 = build_graph(d, n, samples, {.horizon = 20.0, .dt = 0.01, .theta_tilde = 0.9 * d.eta});
  for (size_t k = 0; k < samples.size(); ++k) CHECK((g.values[k] - g2.values[k]).norm() <= 1e-5);
}

TEST_CASE("three-dimensional center direction") {
  const Dichotomy d(diag({0.0, -1.0, 1.0}));
  TruncatedNonlinearity n;
  n.eps = 0.2;
  n.N = [](double, const Vec& w) { return vec({0.0, 0.0, w[0] * w[0]}); };
  std::vector<Vec> samples{vec({0.01, 0.02, 0.0}), vec({0.05, -0.01, 0.0}), vec({-0.08, 0.0, 0.0})};
  const LPOptions opt{.horizon = 25.0, .dt = 0.01};
  const ManifoldGraph g = build_graph(d, n, samples, opt);
  for (size_t k = 0; k < samples.size(); ++k) {
    const double w1 = samples[k][0];
    CHECK(std::abs(g.values[k][2] + w1 * w1) <= 1e-6);
  }
  CHECK(g.contraction_factor < 0.5);
  // bounded long-time orbit of the untruncated flow from the graph point
  Vec w = samples[1] + g.values[1];
  const double h = 1e-2;
  for (int s = 0; s < 1000; ++s) {
    auto f = [&](const Vec& x) -> Vec { return d.A() * x + n.N(0, x); };
    const Vec k1 = f(w), k2 = f(w + h / 2 * k1), k3 = f(w + h / 2 * k2), k4 = f(w + h * k3);
    w += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  CHECK(std::abs(w[2] + 0.05 * 0.05) <= 1e-6);
}

TEST_CASE("zero samples give a zero graph") {
  const Dichotomy d(diag({-1.0, 1.0}));
  const ManifoldGraph g = build_graph(d, quadratic2(0.1), {vec({0.0, 0.0}), vec({0.0, 0.0})});
  for (const auto& v : g.values) CHECK(v.norm() == 0.0);
}

TEST_CASE("short horizon is reported") {
  const Dichotomy d(diag({-1.0, 1.0}));
  CHECK_THROWS_AS(lyapunov_perron_solve(d, quadratic2(0.2), vec({0.1, 0.0}), {.horizon = 1.0, .dt = 0.01}), Error);
}
