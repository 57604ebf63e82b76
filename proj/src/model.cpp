#include "shockstab/model.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <numeric>
#include <random>

#include "shockstab/errors.hpp"

namespace shockstab {

namespace {

constexpr double kGapTol = 1e-8;
constexpr double kImagTol = 1e-10;
constexpr double kSpeedTol = 1e-8;

struct SortedEig {
  Vec values;
  Mat right;
  Mat left;
};

SortedEig sorted_real_eig(const Mat& a, const char* where) {
  Eigen::EigenSolver<Mat> es(a);
  const auto& ev = es.eigenvalues();
  const int n = static_cast<int>(a.rows());
  double radius = 0.0;
  for (int i = 0; i < n; ++i) radius = std::max(radius, std::abs(ev[i]));
  for (int i = 0; i < n; ++i) {
    if (std::abs(ev[i].imag()) >= kImagTol)
      throw Error(ErrorCode::InvalidModel, std::string("complex characteristic speed at ") + where);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return ev[i].real() < ev[j].real(); });
  SortedEig out;
  out.values.resize(n);
  out.right.resize(n, n);
  for (int k = 0; k < n; ++k) {
    out.values[k] = ev[order[k]].real();
    Vec r = es.eigenvectors().col(order[k]).real();
    r.normalize();
    // largest entry positive
    Eigen::Index imax;
    r.cwiseAbs().maxCoeff(&imax);
    if (r[imax] < 0) r = -r;
    out.right.col(k) = r;
  }
  for (int k = 0; k + 1 < n; ++k) {
    if (out.values[k + 1] - out.values[k] <= kGapTol * std::max(radius, 1.0))
      throw Error(ErrorCode::InvalidModel, std::string("repeated characteristic speed at ") + where);
  }
  // Rows of R^{-1} are the biorthonormal left eigenvectors.
  out.left = out.right.inverse().transpose();
  return out;
}

}  // namespace

double FluxModel::rankine_hugoniot_residual() const { return (f(u_plus) - f(u_minus)).norm(); }

FluxModel burgers(double u_minus, double u_plus) {
  FluxModel m;
  m.name = "burgers";
  m.n = 1;
  m.f = [](const Vec& u) { return Vec::Constant(1, 0.5 * u[0] * u[0]); };
  m.df = [](const Vec& u) { return Mat::Constant(1, 1, u[0]); };
  m.d2f = [](const Vec&, const Vec& v, const Vec& w) { return Vec::Constant(1, v[0] * w[0]); };
  m.u_minus = Vec::Constant(1, u_minus);
  m.u_plus = Vec::Constant(1, u_plus);
  return m;
}

FluxModel coupled2(const Vec& u_minus, const Vec& u_plus) {
  if (u_minus.size() != 2 || u_plus.size() != 2)
    throw Error(ErrorCode::DimensionMismatch, "coupled2 needs 2-component endstates");
  FluxModel m;
  m.name = "coupled2";
  m.n = 2;
  m.f = [](const Vec& u) {
    Vec r(2);
    r << 0.5 * u[0] * u[0] + u[1], 0.5 * u[1] * u[1] + u[0];
    return r;
  };
  m.df = [](const Vec& u) {
    Mat a(2, 2);
    a << u[0], 1.0, 1.0, u[1];
    return a;
  };
  m.d2f = [](const Vec&, const Vec& v, const Vec& w) {
    Vec r(2);
    r << v[0] * w[0], v[1] * w[1];
    return r;
  };
  m.u_minus = u_minus;
  m.u_plus = u_plus;
  return m;
}

FluxModel polynomial_flux(std::string name, std::vector<std::vector<FluxTerm>> comps,
                          const Vec& u_minus, const Vec& u_plus) {
  const int n = static_cast<int>(comps.size());
  if (n == 0 || u_minus.size() != n || u_plus.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "polynomial flux dimension mismatch");
  for (const auto& c : comps)
    for (const auto& t : c)
      if (static_cast<int>(t.powers.size()) != n)
        throw Error(ErrorCode::DimensionMismatch, "monomial power list must have n entries");

  // d^k/du_j of prod u^p, evaluated term by term.
  auto mono = [n](const FluxTerm& t, const Vec& u, int dj, int dk) {
    double c = t.coeff;
    std::vector<int> p = t.powers;
    for (int d : {dj, dk}) {
      if (d < 0) continue;
      if (p[d] == 0) return 0.0;
      c *= p[d];
      p[d] -= 1;
    }
    for (int j = 0; j < n; ++j) c *= std::pow(u[j], p[j]);
    return c;
  };
  auto table = std::make_shared<std::vector<std::vector<FluxTerm>>>(std::move(comps));
  FluxModel m;
  m.name = std::move(name);
  m.n = n;
  m.f = [table, mono, n](const Vec& u) {
    Vec r = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
      for (const auto& t : (*table)[i]) r[i] += mono(t, u, -1, -1);
    return r;
  };
  m.df = [table, mono, n](const Vec& u) {
    Mat a = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (const auto& t : (*table)[i]) a(i, j) += mono(t, u, j, -1);
    return a;
  };
  m.d2f = [table, mono, n](const Vec& u, const Vec& v, const Vec& w) {
    Vec r = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (const auto& t : (*table)[i]) r[i] += mono(t, u, j, k) * v[j] * w[k];
    return r;
  };
  m.u_minus = u_minus;
  m.u_plus = u_plus;
  return m;
}

EndpointData endpoint_data(const FluxModel& m) {
  const Mat am = m.df(m.u_minus);
  const Mat ap = m.df(m.u_plus);
  const auto em = sorted_real_eig(am, "u_minus");
  const auto ep = sorted_real_eig(ap, "u_plus");
  EndpointData e;
  e.a_minus = em.values;
  e.a_plus = ep.values;
  e.r_minus = em.right;
  e.r_plus = ep.right;
  e.l_minus = em.left;
  e.l_plus = ep.left;
  const int n = m.n;
  for (int k = 0; k < n; ++k) {
    e.max_eig_residual = std::max(
        {e.max_eig_residual, (am * e.r_minus.col(k) - e.a_minus[k] * e.r_minus.col(k)).norm(),
         (ap * e.r_plus.col(k) - e.a_plus[k] * e.r_plus.col(k)).norm()});
  }
  const Mat id = Mat::Identity(n, n);
  e.max_biorth_error = std::max((e.l_minus.transpose() * e.r_minus - id).cwiseAbs().maxCoeff(),
                                (e.l_plus.transpose() * e.r_plus - id).cwiseAbs().maxCoeff());
  return e;
}

LaxReport check_lax(const FluxModel& m, const EndpointData& e) {
  for (int k = 0; k < m.n; ++k) {
    if (std::abs(e.a_minus[k]) < kSpeedTol || std::abs(e.a_plus[k]) < kSpeedTol)
      throw Error(ErrorCode::NearZeroSpeed, "characteristic speed vanishes at an endstate");
  }
  LaxReport r;
  int neg_minus = 0;
  for (int k = 0; k < m.n; ++k) {
    if (e.a_minus[k] > 0) ++r.dim_unstable_minus;
    if (e.a_minus[k] < 0) ++neg_minus;
    if (e.a_plus[k] < 0) ++r.dim_stable_plus;
  }
  r.is_lax = (r.dim_unstable_minus + r.dim_stable_plus == m.n + 1);
  r.p_hyperbolic = neg_minus + 1;
  return r;
}

Mat liu_majda_matrix(const FluxModel& m, const EndpointData& e) {
  const int n = m.n;
  std::vector<Vec> cols;
  for (int k = 0; k < n; ++k)
    if (e.a_minus[k] < 0) cols.push_back(e.r_minus.col(k));
  for (int k = 0; k < n; ++k)
    if (e.a_plus[k] > 0) cols.push_back(e.r_plus.col(k));
  cols.push_back(m.u_plus - m.u_minus);
  if (static_cast<int>(cols.size()) != n)
    throw Error(ErrorCode::DimensionMismatch,
                "Liu-Majda matrix has " + std::to_string(cols.size()) + " columns, expected " +
                    std::to_string(n));
  Mat out(n, n);
  for (int j = 0; j < n; ++j) out.col(j) = cols[j];
  return out;
}

double liu_majda_determinant(const FluxModel& m, const EndpointData& e) {
  return liu_majda_matrix(m, e).determinant();
}

std::vector<SpectrumBranch> essential_spectrum_curves(const EndpointData& e,
                                                      const std::vector<double>& k_grid) {
  using namespace std::complex_literals;
  std::vector<SpectrumBranch> out;
  auto add = [&](bool minus, const Vec& speeds) {
    for (int j = 0; j < speeds.size(); ++j) {
      SpectrumBranch b;
      b.minus_side = minus;
      b.index = j;
      b.speed = speeds[j];
      b.lambda.reserve(k_grid.size());
      for (double k : k_grid) b.lambda.push_back(-1i * k * speeds[j] - k * k);
      out.push_back(std::move(b));
    }
  };
  add(true, e.a_minus);
  add(false, e.a_plus);
  return out;
}

SemilinearModel cubic_pulse() {
  SemilinearModel m;
  m.name = "pulse";
  m.n = 1;
  m.h = [](const Vec& u, const Vec&) {
    return Vec::Constant(1, -u[0] + 2.0 * u[0] * u[0] * u[0]);
  };
  m.dh_u = [](const Vec& u, const Vec&) { return Mat::Constant(1, 1, -1.0 + 6.0 * u[0] * u[0]); };
  m.dh_p = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  m.u_minus = Vec::Zero(1);
  m.u_plus = Vec::Zero(1);
  m.exact_profile = [](double x) { return Vec::Constant(1, 1.0 / std::cosh(x)); };
  return m;
}

double semilinear_derivative_order(const SemilinearModel& m, double radius, int samples,
                                   unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-radius, radius);
  const int n = m.n;
  auto fd_error = [&](const Vec& u, const Vec& p, double d) {
    double err = 0.0;
    for (int j = 0; j < n; ++j) {
      Vec e = Vec::Zero(n);
      e[j] = d;
      const Vec du = (m.h(u + e, p) - m.h(u - e, p)) / (2 * d);
      const Vec dp = (m.h(u, p + e) - m.h(u, p - e)) / (2 * d);
      err = std::max(err, (du - m.dh_u(u, p).col(j)).cwiseAbs().maxCoeff());
      err = std::max(err, (dp - m.dh_p(u, p).col(j)).cwiseAbs().maxCoeff());
    }
    return err;
  };
  double e1 = 0.0, e2 = 0.0;
  const double d = 1e-2;
  for (int s = 0; s < samples; ++s) {
    Vec u(n), p(n);
    for (int j = 0; j < n; ++j) {
      u[j] = dist(gen);
      p[j] = dist(gen);
    }
    e1 = std::max(e1, fd_error(u, p, d));
    e2 = std::max(e2, fd_error(u, p, d / 2));
  }
  // Quadratic h has exact centered differences; report the nominal order.
  if (e1 < 1e-11) return 2.0;
  return std::log2(e1 / e2);
}

}  // namespace shockstab
