#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "shockstab/errors.hpp"
#include "shockstab/linop.hpp"

using namespace shockstab;

namespace {

struct BurgersSetup {
  FluxModel model = burgers(1.0, -1.0);
  Grid1D grid;
  Profile profile;
  std::unique_ptr<ConservationSystem> sys;
  std::unique_ptr<LinearizedOperator> op;
  BurgersSetup(double h, double half_width, bool polish) : grid(Grid1D::with_spacing(-half_width, half_width, h)) {
    profile = solve_profile_conservation(model, grid);
    sys = std::make_unique<ConservationSystem>(model, grid);
    if (polish) profile = discrete_steady_state(*sys, profile);
    op = std::make_unique<LinearizedOperator>(*sys, profile);
  }
};

Profile constant_profile(const Grid1D& g, double c) {
  Profile p;
  p.grid = g;
  p.n = 1;
  p.ubar = Vec::Constant(g.m(), c);
  p.ubar_x = Vec::Zero(g.m());
  return p;
}

Vec random_vec(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = d(gen);
  return v;
}

}  // namespace

TEST_CASE("constant coefficients reproduce the discrete symbol") {
  const double a = 0.7, h = 0.05, k = 1.3;
  const Grid1D g = Grid1D::with_spacing(-5, 5, h);
  ConservationSystem sys(burgers(a, -a), g);
  const LinearizedOperator op(sys, constant_profile(g, a));
  CHECK_FALSE(op.has_phi());
  const int d = op.dim();
  Vec re(d), im(d);
  for (int i = 0; i < d; ++i) {
    re[i] = std::cos(k * g.x(i + 1));
    im[i] = std::sin(k * g.x(i + 1));
  }
  const Vec lre = op.apply(re), lim = op.apply(im);
  const std::complex<double> sym(-4 / (h * h) * std::pow(std::sin(k * h / 2), 2), -a * std::sin(k * h) / h);
  double err = 0.0;
  for (int i = 1; i + 1 < d; ++i) {
    const std::complex<double> got(lre[i], lim[i]);
    const std::complex<double> want = sym * std::complex<double>(re[i], im[i]);
    err = std::max(err, std::abs(got - want));
  }
  CHECK(err <= 1e-12 * std::abs(sym) + 1e-12);
  CHECK(op.apply(Vec::Zero(d)).norm() == 0.0);
}

TEST_CASE("burgers zero mode residual is second order") {
  BurgersSetup a(0.05, 20, false), b(0.025, 20, false);
  const double ra = a.op->zero_mode_residual(), rb = b.op->zero_mode_residual();
  CHECK(ra <= 1e-3);
  CHECK(ra / rb >= 3.5);
}

TEST_CASE("rank-one projections") {
  BurgersSetup s(0.1, 20, true);
  const LinearizedOperator& op = *s.op;
  const Vec phi = op.phi();
  CHECK((project_pi(op, phi, 2) - phi).norm() <= 1e-12 * phi.norm());
  CHECK(project_pi(op, phi, 1).norm() <= 1e-12 * phi.norm());
  Vec v = random_vec(op.dim(), 3);
  const Vec perp = v - phi * (op.inner(phi, v) / op.inner(phi, phi));
  CHECK(project_pi(op, perp, 2).norm() <= 1e-12 * v.norm());
  const Vec p2 = project_pi(op, v, 2);
  CHECK((project_pi(op, p2, 2) - p2).norm() <= 1e-12 * v.norm());
  CHECK(std::abs(op.inner(phi, project_pi(op, v, 1))) <= 1e-12 * op.norm(v) * op.norm(phi));
  CHECK_THROWS_AS(project_pi(op, Vec::Zero(5), 1), Error);
}

TEST_CASE("semigroup basics") {
  SUBCASE("t = 0 is the identity") {
    BurgersSetup s(0.1, 20, true);
    const Vec v = random_vec(s.op->dim(), 1);
    CHECK((semigroup_apply(*s.op, v, 0.0) - v).norm() == 0.0);
  }
  SUBCASE("sine mode decays at the discrete rate") {
    const Grid1D g = Grid1D::with_spacing(-5, 5, 0.05);
    ConservationSystem sys(burgers(0.0, 0.0), g);
    const LinearizedOperator op(sys, constant_profile(g, 0.0));
    const int d = op.dim();
    const int j = 3;
    const double len = g.x_max() - g.x_min();
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = std::sin(j * M_PI * (g.x(i + 1) - g.x_min()) / len);
    const double kh = j * M_PI * g.h() / len;
    const double lam = -4 / (g.h() * g.h()) * std::pow(std::sin(kh / 2), 2);
    for (double t : {0.1, 1.0}) {
      const Vec w = semigroup_apply(op, v, t);
      CHECK((w - std::exp(lam * t) * v).norm() <= 1e-6 * std::exp(lam * t) * v.norm());
    }
  }
  SUBCASE("semigroup property and certification") {
    BurgersSetup s(0.1, 20, true);
    const Vec v = random_vec(s.op->dim(), 2);
    for (double t : {0.1, 1.0})
      for (double r : {0.1, 1.0}) {
        const Vec a = semigroup_apply(*s.op, v, t + r);
        const Vec b = semigroup_apply(*s.op, semigroup_apply(*s.op, v, r), t);
        CHECK((a - b).norm() <= 1e-6 * v.norm());
      }
    CHECK(semigroup_apply_certified(*s.op, v, 1.0).relative_error <= 1e-6);
  }
}

TEST_CASE("reduced semigroup identity") {
  BurgersSetup s(0.05, 20, true);
  const LinearizedOperator& op = *s.op;
  const ReducedOperator l0(op);
  for (double t : {0.1, 1.0, 10.0}) {
    double worst = 0.0;
    for (unsigned k = 0; k < 5; ++k) {
      const Vec v = random_vec(op.dim(), 10 + k);
      const Vec p1v = project_pi(op, v, 1);
      const Vec a = project_pi(op, semigroup_apply(op, p1v, t), 1);
      const Vec b = semigroup_apply(l0, p1v, t);
      worst = std::max(worst, (a - b).norm() / v.norm());
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("flux form conserves mass for compact data") {
  BurgersSetup s(0.05, 20, true);
  const LinearizedOperator& op = *s.op;
  Vec v(op.dim());
  for (int i = 0; i < op.dim(); ++i) {
    const double x = s.grid.x(i + 1);
    v[i] = std::exp(-x * x);
  }
  CHECK(std::abs(op.inner(Vec::Ones(op.dim()), op.apply(v))) <= 1e-10);
}

TEST_CASE("reduced spectrum drops one eigenvalue") {
  BurgersSetup s(0.2, 20, true);
  const LinearizedOperator& op = *s.op;
  const ReducedOperator l0(op);
  Eigen::EigenSolver<Mat> full(Mat(op.matrix()), false), red(l0.coordinates_matrix(), false);
  std::vector<std::complex<double>> a(full.eigenvalues().data(), full.eigenvalues().data() + op.dim());
  std::vector<std::complex<double>> b(red.eigenvalues().data(), red.eigenvalues().data() + op.dim() - 1);
  // remove the zero mode from the full list
  auto it = std::min_element(a.begin(), a.end(), [](auto x, auto y) { return std::abs(x) < std::abs(y); });
  a.erase(it);
  double worst = 0.0;
  for (auto z : b) {
    double best = 1e300;
    for (auto w : a) best = std::min(best, std::abs(z - w));
    if (z.real() > -5) worst = std::max(worst, best);
  }
  CHECK(worst <= 1e-6);
}
