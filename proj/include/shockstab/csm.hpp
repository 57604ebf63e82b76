#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "shockstab/linop.hpp"
#include "shockstab/spectral.hpp"

namespace shockstab {

/// Smooth cutoff: 1 on [0, 1], 0 on [2, inf).
double cutoff(double x);
double cutoff_derivative(double x);
/// sup |rho'|.
double cutoff_derivative_bound();

/// N^eps(t, w) = rho(|w| / eps) N(t, w).
struct TruncatedNonlinearity {
  std::function<Vec(double, const Vec&)> N;
  double eps = 0.05;
  /// Norm used in the cutoff argument (Euclidean when empty).
  std::function<double(const Vec&)> norm;

  double measure(const Vec& w) const { return norm ? norm(w) : w.norm(); }
  Vec operator()(double t, const Vec& w) const;
};

struct LipschitzAudit {
  double measured = 0.0;
  /// Bound 2 C2 eps (1 + sup|rho'|) with C2 the sampled second-derivative size.
  double bound = 0.0;
  double second_derivative = 0.0;
};

/// Sampled Lipschitz constant of N^eps over the ball of radius 2.5 eps in
/// dimension dim.
LipschitzAudit audit_lipschitz(const TruncatedNonlinearity& n, int dim, int samples = 400,
                               unsigned seed = 1);

/// Linear generator with its split into center-stable and unstable parts.
/// step_* integrate y' = A y + P g(s) exactly over [0, dt] for g linear in
/// s, with P the corresponding projection.
class SplitFlow {
 public:
  virtual ~SplitFlow() = default;
  virtual int dim() const = 0;
  virtual Vec pi_u(const Vec& x) const = 0;
  virtual Vec pi_cs(const Vec& x) const = 0;
  /// y(dt) from y(0) = y0 with forcing Pi_cs g, g(0) = g0, g(dt) = g1.
  virtual Vec step_cs(const Vec& y0, const Vec& g0, const Vec& g1, double dt) const = 0;
  /// y(0) from y(dt) = y1 with forcing Pi_u g (backward in time).
  virtual Vec step_u_back(const Vec& y1, const Vec& g0, const Vec& g1, double dt) const = 0;
  virtual double norm(const Vec& x) const { return x.norm(); }
  /// Exponential rates: unstable decay eta, center-stable growth theta.
  double eta = 0.0;
  double theta = 0.0;
  /// Dichotomy constants (fitted).
  double c_cs = 1.0;
  double c_u = 1.0;
};

/// Dense generator: projections from the eigen-decomposition of A.
class Dichotomy final : public SplitFlow {
 public:
  /// eta = 0.95 min Re(unstable), theta = max(0, max Re(cs)) + 0.05 eta.
  explicit Dichotomy(Mat a, double t_fit = 10.0);
  int dim() const override { return static_cast<int>(a_.rows()); }
  Vec pi_u(const Vec& x) const override { return Pu_ * x; }
  Vec pi_cs(const Vec& x) const override { return x - Pu_ * x; }
  Vec step_cs(const Vec& y0, const Vec& g0, const Vec& g1, double dt) const override;
  Vec step_u_back(const Vec& y1, const Vec& g0, const Vec& g1, double dt) const override;
  const Mat& A() const { return a_; }
  const Mat& Pi_u() const { return Pu_; }
  Mat Pi_cs() const { return Mat::Identity(dim(), dim()) - Pu_; }
  int unstable_dim() const { return ku_; }
  /// max over sampled t of |e^{At} Pi_cs| e^{-theta t} and |e^{-At} Pi_u| e^{-eta t}.
  double fitted_cs_constant(double theta, double t_fit) const;
  double fitted_u_constant(double eta, double t_fit) const;

 private:
  Mat a_, Pu_;
  int ku_ = 0;
  struct Phi {
    double dt = -1;
    Mat e, p1, p2;
  };
  mutable Phi fwd_, bwd_;
  void ensure(double dt) const;
};

/// Reduced parabolic generator L0 on phi-perp. The unstable part uses the
/// finite-rank decomposition V, W (h W^T V = I, L0 V = V Lambda); the
/// center-stable part is integrated with Krylov exponentials.
class PdeSplitFlow final : public SplitFlow {
 public:
  PdeSplitFlow(const LinearizedOperator& op, const SpectralDecomposition& sd, double tol = 1e-10);
  int dim() const override { return op_->dim(); }
  Vec pi_u(const Vec& x) const override;
  Vec pi_cs(const Vec& x) const override;
  Vec step_cs(const Vec& y0, const Vec& g0, const Vec& g1, double dt) const override;
  Vec step_u_back(const Vec& y1, const Vec& g0, const Vec& g1, double dt) const override;
  double norm(const Vec& x) const override { return op_->norm(x); }
  const Mat& V() const { return V_; }
  const Mat& W() const { return W_; }
  const Mat& Lambda() const { return Lambda_; }
  const LinearizedOperator& op() const { return *op_; }
  /// Unstable coordinates c with Pi_u x = V c.
  Vec coordinates(const Vec& x) const;

 private:
  const LinearizedOperator* op_;
  ReducedOperator red_;
  Mat V_, W_, Lambda_;
  double tol_;
};

struct LPOptions {
  double horizon = 20.0;
  double dt = 0.01;
  /// Weight exponent of the norm sup_t e^{-theta_tilde t} |w(t)|; <= 0
  /// picks (theta + eta) / 2.
  double theta_tilde = -1.0;
  double tol = 1e-10;
  int max_iter = 200;
  /// Bound allowed for the neglected integral beyond the horizon.
  double tail_tol = 1e-8;
};

struct LPTrajectory {
  std::vector<double> t;
  std::vector<Vec> w;
  int iterations = 0;
  /// max over iterations of successive weighted differences ratio.
  double contraction_factor = 0.0;
  double final_difference = 0.0;
  double tail_bound = 0.0;
  double theta_tilde = 0.0;
};

/// Fixed point of the truncated Lyapunov-Perron operator: forward
/// center-stable solve from w_cs, backward unstable solve from 0 at the
/// horizon, iterated from w^0(t) = e^{At} w_cs.
LPTrajectory lyapunov_perron_solve(const SplitFlow& flow, const TruncatedNonlinearity& n,
                                   const Vec& w_cs, const LPOptions& opt = {});

/// One application of the operator T to a trajectory on the grid of traj.
std::vector<Vec> lp_operator(const SplitFlow& flow, const TruncatedNonlinearity& n, const Vec& w_cs,
                             const std::vector<double>& t, const std::vector<Vec>& w);

/// sup_k e^{-theta_tilde t_k} |a_k - b_k|.
double weighted_distance(const SplitFlow& flow, const std::vector<double>& t, const std::vector<Vec>& a,
                         const std::vector<Vec>& b, double theta_tilde);

/// Max ratio |T w1 - T w2| / |w1 - w2| (weighted) over random pairs near
/// the fixed point.
double measure_contraction(const SplitFlow& flow, const TruncatedNonlinearity& n, const Vec& w_cs,
                           const LPTrajectory& fixed, int pairs = 4, double amplitude = 0.1,
                           unsigned seed = 3);

struct ManifoldGraph {
  std::vector<Vec> base;    // w_cs samples
  std::vector<Vec> values;  // Phi(w_cs) in Sigma_u
  double contraction_factor = 0.0;
  double tangency_slope = NAN;
  double lipschitz = 0.0;
  double eps = 0.0;
};

/// Phi(w_cs) = Pi_u w(0) for each sample.
ManifoldGraph build_graph(const SplitFlow& flow, const TruncatedNonlinearity& n,
                          const std::vector<Vec>& samples, const LPOptions& opt = {});

/// Least-squares slope of log|Phi| against log|w_cs| over samples with
/// |w_cs| in [lo, hi] and Phi != 0.
double tangency_slope(const ManifoldGraph& g, double lo, double hi);

struct InvarianceReport {
  double max_residual = 0.0;
  std::vector<double> residuals;
};

/// Flows w' = A w + N^eps(w) from (w_cs + Phi(w_cs) + offset) for t_step
/// and compares the unstable part of the endpoint with Phi of its
/// center-stable part. Dense generators only.
InvarianceReport verify_invariance(const ManifoldGraph& g, const Dichotomy& d,
                                   const TruncatedNonlinearity& n, double t_step,
                                   const LPOptions& opt = {}, double offset = 0.0);

/// Reduced PDE manifold trajectory v(t) for center-stable data u_cs.
LPTrajectory pde_csm_solve(const PdeSplitFlow& flow, const TruncatedNonlinearity& g0,
                           const Vec& u_cs, const LPOptions& opt = {});

void write_graph_csv(const ManifoldGraph& g, const std::string& path);

}  // namespace shockstab
