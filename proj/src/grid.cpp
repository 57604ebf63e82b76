#include "shockstab/grid.hpp"

#include <algorithm>
#include <cmath>

#include "shockstab/errors.hpp"

namespace shockstab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NearZeroSpeed: return "NearZeroSpeed";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::NoConnection: return "NoConnection";
    case ErrorCode::GridTooShort: return "GridTooShort";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::UnresolvedSpectrum: return "UnresolvedSpectrum";
    case ErrorCode::DefectiveCluster: return "DefectiveCluster";
    case ErrorCode::NonZeroMean: return "NonZeroMean";
    case ErrorCode::NoContraction: return "NoContraction";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::DenominatorSmall: return "DenominatorSmall";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SnapshotGapTooLarge: return "SnapshotGapTooLarge";
    case ErrorCode::NotInAsymptoticRegime: return "NotInAsymptoticRegime";
    case ErrorCode::ShootingDiverged: return "ShootingDiverged";
    case ErrorCode::AmbiguousRoot: return "AmbiguousRoot";
    case ErrorCode::NoExit: return "NoExit";
    case ErrorCode::TemplateInfeasible: return "TemplateInfeasible";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Grid1D::Grid1D(double x_min, double x_max, int m, BoundaryCondition bc)
    : x_min_(x_min), x_max_(x_max), m_(m), bc_(bc) {
  if (m < 3) throw Error(ErrorCode::InvalidConfig, "grid needs at least 3 nodes");
  if (!(x_max > x_min)) throw Error(ErrorCode::InvalidConfig, "grid interval is empty");
  h_ = (x_max - x_min) / (m - 1);
}

Grid1D Grid1D::with_spacing(double x_min, double x_max, double h, BoundaryCondition bc) {
  if (!(h > 0)) throw Error(ErrorCode::InvalidConfig, "grid spacing must be positive");
  const int m = static_cast<int>(std::lround((x_max - x_min) / h)) + 1;
  return Grid1D(x_min, x_max, m, bc);
}

Vec Grid1D::nodes() const {
  Vec x(m_);
  for (int i = 0; i < m_; ++i) x[i] = this->x(i);
  return x;
}

int Grid1D::nearest(double x) const {
  const long i = std::lround((x - x_min_) / h_);
  return static_cast<int>(std::clamp<long>(i, 0, m_ - 1));
}

Grid1D Grid1D::refined() const { return Grid1D(x_min_, x_max_, 2 * m_ - 1, bc_); }

bool Grid1D::same_as(const Grid1D& o) const {
  return m_ == o.m_ && std::abs(x_min_ - o.x_min_) < 1e-12 && std::abs(x_max_ - o.x_max_) < 1e-12;
}

double trapezoid(const Grid1D& g, const Vec& f) {
  const int m = static_cast<int>(f.size());
  if (m < 2) return 0.0;
  return g.h() * (f.sum() - 0.5 * (f[0] + f[m - 1]));
}

Vec component(const Vec& field, int n, int c) {
  const int m = static_cast<int>(field.size()) / n;
  Vec out(m);
  for (int i = 0; i < m; ++i) out[i] = field[i * n + c];
  return out;
}

}  // namespace shockstab
