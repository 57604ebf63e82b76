#include "doctest.h"

#include <chrono>
#include <cmath>
#include <random>

#include "shockstab/errors.hpp"
#include "shockstab/spectral.hpp"

using namespace shockstab;

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

LinearizedOperator poschl_teller(double h, double shift = 0.0) {
  const Grid1D g = Grid1D::with_spacing(-20, 20, h);
  return coefficient_operator(g, nullptr, [shift](double x) { return 6 * sech(x) * sech(x) + shift; });
}

LinearizedOperator burgers_operator(double h, std::unique_ptr<ConservationSystem>& sys) {
  const FluxModel m = burgers(1.0, -1.0);
  const Grid1D g = Grid1D::with_spacing(-20, 20, h);
  sys = std::make_unique<ConservationSystem>(m, g);
  const Profile p = discrete_steady_state(*sys, solve_profile_conservation(m, g));
  return LinearizedOperator(*sys, p);
}

// Same decomposition restricted to a subset of its real basis columns.
SpectralDecomposition keep_column(const SpectralDecomposition& sd, int j) {
  SpectralDecomposition out = sd;
  out.V = sd.V.col(j);
  out.W = sd.W.col(j);
  out.Lambda = sd.Lambda.block(j, j, 1, 1);
  out.p = 1;
  return out;
}

double sup_normalized_error(const Grid1D& g, const Vec& v, double (*exact)(double)) {
  Vec e(v.size());
  for (int i = 0; i < v.size(); ++i) e[i] = exact(g.x(i + 1));
  const double s = v.dot(e) / v.dot(v);
  return (s * v - e).cwiseAbs().maxCoeff() / e.cwiseAbs().maxCoeff();
}

double sech2(double x) { return sech(x) * sech(x); }
double sech_tanh(double x) { return sech(x) * std::tanh(x); }

}  // namespace

TEST_CASE("poschl-teller eigenvalues and eigenfunctions") {
  const auto t0 = std::chrono::steady_clock::now();
  const LinearizedOperator op = poschl_teller(0.05);
  const SpectralDecomposition sd = compute_spectrum(op);
  REQUIRE(sd.p == 2);
  const auto ev = sd.unstable_eigenvalues();
  CHECK(std::abs(ev[0] - 4.0) <= 1e-3);
  CHECK(std::abs(ev[1] - 1.0) <= 1e-3);
  for (const auto& pr : sd.unstable_pairs) CHECK(pr.residual <= 1e-8 * pr.right.norm());
  CHECK(sup_normalized_error(op.grid(), sd.V.col(0), sech2) <= 1e-3);
  CHECK(sup_normalized_error(op.grid(), sd.V.col(1), sech_tanh) <= 1e-3);
  const Mat id = op.grid().h() * sd.W.transpose() * sd.V;
  CHECK((id - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-10);

  const SpectralDecomposition fine = compute_spectrum(poschl_teller(0.025));
  CHECK_NOTHROW(check_count_stable(sd, fine));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 30.0);
}

TEST_CASE("shifted operator has no unstable spectrum") {
  const SpectralDecomposition sd = compute_spectrum(poschl_teller(0.1, -10.0));
  CHECK(sd.p == 0);
  const Projections pr(sd);
  Vec f = Vec::LinSpaced(sd.V.rows(), 0, 1);
  CHECK(pr.pi_u(f).norm() == 0.0);
  CHECK((pr.pi_cs(f) - f).norm() == 0.0);
}

TEST_CASE("burgers shock is spectrally stable") {
  std::unique_ptr<ConservationSystem> sys;
  const LinearizedOperator op = burgers_operator(0.1, sys);
  const SpectralDecomposition sd = compute_spectrum(op);
  CHECK(sd.p == 0);
  CHECK(sd.zero_mode_angle < 1e-3);
  // brute-force oracle with an independent eigensolver
  Eigen::EigenSolver<Mat> es(Mat(op.matrix()), false);
  int count = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i].real() > 1e-6 && std::abs(es.eigenvalues()[i] - sd.zero_mode) > 1e-9) ++count;
  CHECK(count == 0);
  const D1Report d1 = scan_imaginary_axis(sd, 10.0, 200);
  CHECK(d1.d1_ok);
}

TEST_CASE("imaginary-axis scan") {
  std::vector<std::complex<double>> ev{{-1.0, 0.0}, {-0.5, 2.0}, {0.0, 0.0}};
  CHECK(scan_imaginary_axis(ev, 5.0, 100).d1_ok);
  CHECK(scan_imaginary_axis(ev, 5.0, 100).distance == doctest::Approx(0.5));
  ev.push_back({0.0, 1.0});
  CHECK_FALSE(scan_imaginary_axis(ev, 5.0, 100).d1_ok);
  ev.pop_back();
  CHECK(scan_imaginary_axis(ev, 0.0, 10).distance == doctest::Approx(1.0));
}

TEST_CASE("projection algebra") {
  const LinearizedOperator op = poschl_teller(0.1);
  const SpectralDecomposition sd = compute_spectrum(op);
  CHECK_THROWS_AS(Projections{sd}, Error);
  const Projections pr(sd, false);
  std::mt19937 gen(5);
  std::normal_distribution<double> nd;
  Vec f(op.dim());
  for (int i = 0; i < f.size(); ++i) f[i] = nd(gen);
  const Vec pu = pr.pi_u(f);
  CHECK((pr.pi_u(pu) - pu).norm() <= 1e-10 * f.norm());
  CHECK(pr.pi_u(pr.pi_cs(f)).norm() <= 1e-10 * f.norm());
  CHECK((pr.pi_u(f) + pr.pi_cs(f) - f).norm() <= 1e-10 * f.norm());
  const Vec phi1 = sd.V.col(0);
  CHECK((pr.pi_u(phi1) - phi1).norm() <= 1e-10 * phi1.norm());
  // unstable flow is the semigroup on Sigma_u
  const Vec c = pr.coordinates(phi1);
  CHECK((pr.unstable_flow(c, 0.5) - std::exp(0.5 * 4.0) * phi1).norm() <= 1e-2 * std::exp(2.0) * phi1.norm());
}

TEST_CASE("tilde projection commutes with d/dx to second order") {
  double prev = 0.0;
  for (double h : {0.1, 0.05}) {
    const LinearizedOperator op = poschl_teller(h);
    const SpectralDecomposition sd = keep_column(compute_spectrum(op), 1);
    const Projections pr(sd);
    CHECK(pr.has_tilde());
    const Grid1D& g = op.grid();
    Vec f(op.dim());
    for (int i = 0; i < f.size(); ++i) f[i] = std::exp(-std::pow(g.x(i + 1) - 0.5, 2));
    const Vec lhs = pr.pi_u(interior_derivative(g, 1, f));
    const Vec rhs = interior_derivative(g, 1, pr.pi_u_tilde(f));
    const double res = op.norm(lhs - rhs) / op.norm(f);
    if (prev > 0) CHECK(prev / res >= 3.5);
    prev = res;
  }
}

TEST_CASE("projection norms are grid independent") {
  std::vector<double> norms;
  for (double h : {0.1, 0.05, 0.025}) {
    const SpectralDecomposition sd = compute_spectrum(poschl_teller(h));
    const Mat gv = sd.h() * sd.V.transpose() * sd.V;
    const Mat gw = sd.h() * sd.W.transpose() * sd.W;
    Eigen::EigenSolver<Mat> es(gv * gw, false);
    double m = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) m = std::max(m, es.eigenvalues()[i].real());
    norms.push_back(std::sqrt(m));
  }
  CHECK(std::abs(norms[0] - norms[2]) <= 0.05 * norms[2]);
}
