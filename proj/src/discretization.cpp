#include "shockstab/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "shockstab/errors.hpp"

namespace shockstab {

namespace {

using Triplet = Eigen::Triplet<double>;

Vec node(const Vec& u, int n, int i) { return u.segment(i * n, n); }

}  // namespace

Vec ParabolicSystem::diffusion(const Vec& u) const {
  const int m = grid_.m();
  const double ih2 = 1.0 / (grid_.h() * grid_.h());
  Vec out = Vec::Zero(u.size());
  for (int i = 1; i < m - 1; ++i)
    out.segment(i * n_, n_) =
        (u.segment((i - 1) * n_, n_) - 2.0 * u.segment(i * n_, n_) + u.segment((i + 1) * n_, n_)) *
        ih2;
  return out;
}

SpMat ParabolicSystem::diffusion_matrix() const {
  const int mi = grid_.m() - 2;
  const int dim = n_ * mi;
  const double ih2 = 1.0 / (grid_.h() * grid_.h());
  std::vector<Triplet> t;
  t.reserve(3 * dim);
  for (int i = 0; i < mi; ++i)
    for (int c = 0; c < n_; ++c) {
      const int r = i * n_ + c;
      t.emplace_back(r, r, -2.0 * ih2);
      if (i > 0) t.emplace_back(r, r - n_, ih2);
      if (i + 1 < mi) t.emplace_back(r, r + n_, ih2);
    }
  SpMat d(dim, dim);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SpMat ParabolicSystem::jacobian(const Vec& u) const {
  SpMat j = diffusion_matrix() + reaction_jacobian(u);
  j.makeCompressed();
  return j;
}

Vec ParabolicSystem::interior(const Vec& full) const {
  if (full.size() != n_ * grid_.m())
    throw Error(ErrorCode::GridMismatch, "field length does not match grid");
  return full.segment(n_, interior_size());
}

Vec ParabolicSystem::embed(const Vec& in) const {
  if (in.size() != interior_size())
    throw Error(ErrorCode::GridMismatch, "interior vector length does not match grid");
  Vec full(n_ * grid_.m());
  full.head(n_) = left_;
  full.segment(n_, interior_size()) = in;
  full.tail(n_) = right_;
  return full;
}

Vec ParabolicSystem::embed_zero(const Vec& in) const {
  if (in.size() != interior_size())
    throw Error(ErrorCode::GridMismatch, "interior vector length does not match grid");
  Vec full = Vec::Zero(n_ * grid_.m());
  full.segment(n_, interior_size()) = in;
  return full;
}

ConservationSystem::ConservationSystem(FluxModel model, Grid1D grid)
    : ParabolicSystem(std::move(grid), model.n, model.u_minus, model.u_plus),
      model_(std::move(model)) {}

ConservationSystem::ConservationSystem(FluxModel model, Grid1D grid, Vec left, Vec right)
    : ParabolicSystem(std::move(grid), model.n, std::move(left), std::move(right)),
      model_(std::move(model)) {}

Vec ConservationSystem::reaction(const Vec& u) const {
  const int m = grid_.m();
  std::vector<Vec> f(m);
  for (int i = 0; i < m; ++i) f[i] = model_.f(node(u, n_, i));
  const double i2h = 0.5 / grid_.h();
  Vec out = Vec::Zero(u.size());
  for (int i = 1; i < m - 1; ++i) out.segment(i * n_, n_) = -(f[i + 1] - f[i - 1]) * i2h;
  return out;
}

SpMat ConservationSystem::reaction_jacobian(const Vec& u) const {
  const int mi = grid_.m() - 2;
  const double i2h = 0.5 / grid_.h();
  std::vector<Triplet> t;
  t.reserve(2 * n_ * n_ * mi);
  // Row block i (node i+1) depends on nodes i and i+2, i.e. interior blocks i-1 and i+1.
  for (int i = 0; i < mi; ++i) {
    if (i > 0) {
      const Mat a = model_.df(node(u, n_, i));
      for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) t.emplace_back(i * n_ + r, (i - 1) * n_ + c, a(r, c) * i2h);
    }
    if (i + 1 < mi) {
      const Mat a = model_.df(node(u, n_, i + 2));
      for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) t.emplace_back(i * n_ + r, (i + 1) * n_ + c, -a(r, c) * i2h);
    }
  }
  SpMat j(interior_size(), interior_size());
  j.setFromTriplets(t.begin(), t.end());
  return j;
}

std::unique_ptr<ParabolicSystem> ConservationSystem::with_boundary(const Vec& left,
                                                                   const Vec& right) const {
  return std::make_unique<ConservationSystem>(model_, grid_, left, right);
}

SemilinearSystem::SemilinearSystem(SemilinearModel model, Grid1D grid)
    : ParabolicSystem(std::move(grid), model.n, model.u_minus, model.u_plus),
      model_(std::move(model)) {}

SemilinearSystem::SemilinearSystem(SemilinearModel model, Grid1D grid, Vec left, Vec right)
    : ParabolicSystem(std::move(grid), model.n, std::move(left), std::move(right)),
      model_(std::move(model)) {}

Vec SemilinearSystem::reaction(const Vec& u) const {
  const int m = grid_.m();
  const double i2h = 0.5 / grid_.h();
  Vec out = Vec::Zero(u.size());
  for (int i = 1; i < m - 1; ++i) {
    const Vec p = (node(u, n_, i + 1) - node(u, n_, i - 1)) * i2h;
    out.segment(i * n_, n_) = model_.h(node(u, n_, i), p);
  }
  return out;
}

SpMat SemilinearSystem::reaction_jacobian(const Vec& u) const {
  const int mi = grid_.m() - 2;
  const double i2h = 0.5 / grid_.h();
  std::vector<Triplet> t;
  t.reserve(3 * n_ * n_ * mi);
  for (int i = 0; i < mi; ++i) {
    const int g = i + 1;
    const Vec ui = node(u, n_, g);
    const Vec p = (node(u, n_, g + 1) - node(u, n_, g - 1)) * i2h;
    const Mat hu = model_.dh_u(ui, p);
    const Mat hp = model_.dh_p(ui, p);
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) {
        if (hu(r, c) != 0.0) t.emplace_back(i * n_ + r, i * n_ + c, hu(r, c));
        if (hp(r, c) != 0.0) {
          if (i > 0) t.emplace_back(i * n_ + r, (i - 1) * n_ + c, -hp(r, c) * i2h);
          if (i + 1 < mi) t.emplace_back(i * n_ + r, (i + 1) * n_ + c, hp(r, c) * i2h);
        }
      }
  }
  SpMat j(interior_size(), interior_size());
  j.setFromTriplets(t.begin(), t.end());
  return j;
}

std::unique_ptr<ParabolicSystem> SemilinearSystem::with_boundary(const Vec& left,
                                                                 const Vec& right) const {
  return std::make_unique<SemilinearSystem>(model_, grid_, left, right);
}

Vec centered_derivative(const Grid1D& g, int n, const Vec& u) {
  const int m = g.m();
  const double h = g.h();
  Vec d(u.size());
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      d.segment(0, n) = (u.segment(n, n) - u.segment(0, n)) / h;
    else if (i == m - 1)
      d.segment(i * n, n) = (u.segment(i * n, n) - u.segment((i - 1) * n, n)) / h;
    else
      d.segment(i * n, n) = (u.segment((i + 1) * n, n) - u.segment((i - 1) * n, n)) / (2 * h);
  }
  return d;
}

Vec derivative4(const Grid1D& g, int n, const Vec& u) {
  const int m = g.m();
  if (m < 5) return centered_derivative(g, n, u);
  const double h = g.h();
  // Five-point stencils for the first derivative at offsets 0..4 from the left node.
  static const double left0[5] = {-25.0 / 12, 4.0, -3.0, 4.0 / 3, -0.25};
  static const double left1[5] = {-0.25, -5.0 / 6, 1.5, -0.5, 1.0 / 12};
  static const double center[5] = {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
  Vec d(u.size());
  auto apply = [&](int i, int start, const double* w, double sign) {
    Vec acc = Vec::Zero(n);
    for (int k = 0; k < 5; ++k) acc += w[k] * u.segment((start + sign * k) * n, n);
    d.segment(i * n, n) = sign * acc / h;
  };
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      apply(i, 0, left0, 1.0);
    else if (i == 1)
      apply(i, 0, left1, 1.0);
    else if (i == m - 1)
      apply(i, m - 1, left0, -1.0);
    else if (i == m - 2)
      apply(i, m - 1, left1, -1.0);
    else
      apply(i, i - 2, center, 1.0);
  }
  return d;
}

Vec interpolate(const Grid1D& g, int n, const Vec& u, double x) {
  const int m = g.m();
  if (x <= g.x_min()) return u.head(n);
  if (x >= g.x_max()) return u.tail(n);
  const double s = (x - g.x_min()) / g.h();
  int j = static_cast<int>(std::floor(s));
  j = std::clamp(j, 0, m - 2);
  int start = std::clamp(j - 1, 0, std::max(0, m - 4));
  const int npts = std::min(4, m);
  Vec out = Vec::Zero(n);
  for (int a = 0; a < npts; ++a) {
    double w = 1.0;
    for (int b = 0; b < npts; ++b)
      if (b != a) w *= (s - (start + b)) / static_cast<double>(a - b);
    out += w * u.segment((start + a) * n, n);
  }
  return out;
}

Vec shifted(const Grid1D& g, int n, const Vec& u, double shift, const Vec& left,
            const Vec& right) {
  const int m = g.m();
  Vec out(u.size());
  for (int i = 0; i < m; ++i) {
    const double x = g.x(i) - shift;
    if (x < g.x_min())
      out.segment(i * n, n) = left;
    else if (x > g.x_max())
      out.segment(i * n, n) = right;
    else
      out.segment(i * n, n) = interpolate(g, n, u, x);
  }
  return out;
}

}  // namespace shockstab
