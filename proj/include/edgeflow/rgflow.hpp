#pragma once

#include <array>
#include <limits>
#include <map>
#include <vector>

#include "edgeflow/greens.hpp"
#include "edgeflow/quasiperiodic.hpp"

namespace edgeflow {

// chi^(<=h)(x) = chi(gamma^{-h-1} x), f^(h) = chi^(<=h) - chi^(<=h-1), with
// delta gamma^{h_beta - 1} <= pi / beta <= delta gamma^{h_beta}.
struct ScaleCascade {
  double beta = 0.0, gamma = 2.0, delta = 0.4;
  int h_beta = 0;
  CutoffFunction chi;

  double chi_le(int h, double x) const;
  double f(int h, double x) const;
};

// Throws ConfigError if beta <= 0, gamma <= 1 or pi / beta > delta (no scale below 0).
ScaleCascade build_cascade(double beta, double delta, double gamma);

// |sum_{h = h_beta}^{0} f^(h)(x) + chi^(<=h_beta - 1)(x) - chi^(<=0)(x)|
double partition_residual(const ScaleCascade& c, double x);

// Velocities entering scale h: v_{h+1} and the absorbed beta^v_{h+1}, so that
// v_h(q) = v_{h+1} + beta^v chi^(<=h)(q) and v_h = v_{h+1} + beta^v.
struct ScaleVelocities {
  double v0 = 1.0, v1 = 1.0;
  double b0 = 0.0, b1 = 0.0;
};

double weighted_norm(double v0, double v1, double q0, double q1);

// rem is r_omega(q1), the band beyond its linearization.
struct ScalePropagator {
  cplx le;     // g~^(<=h)
  cplx below;  // g^(<=h-1)
  cplx single; // g^(h) = le - below
  bool support_ok = true;  // chi^(<=h-1)_{v_h} > 0 only where chi^(<=h)_{v_{h+1}} = 1
};
ScalePropagator scale_propagator(const ScaleCascade& c, int h, const ScaleVelocities& v,
                                 double q0, double q1, double rem);

// Lattice of sample points q = (2 pi (m + 1/2) / beta, 2 pi r / L1).
struct QGrid {
  double beta = 0.0;
  int L1 = 0;
  std::vector<int> m, r;

  double q0(int i) const { return kTwoPi / beta * (m[i] + 0.5); }
  double q1(int i) const { return kTwoPi / L1 * r[i]; }
  // 9 x 9 stencil: m in [-5, 3], r in [-4, 4]
  static QGrid stencil(double beta, int L1);
};

// Values V(q0_i, q1_j), rows over m, columns over r.
struct SampledKernel {
  QGrid grid;
  Mat values;
};

struct LocalParts {
  cplx value, d0, d1;  // V(0_beta), d_{q0} V(0_beta), d_{q1} V(0_beta)
  SampledKernel L0, L1_diag, L1_offdiag, R;
};

// d_{q0} at 0_beta is (beta / 2 pi)(F(0+) - F(0-)); d_{q1} is the backward difference
// averaged over 0+ and 0-. Needs m in {0, -1} and r in {0, -1}; throws ConfigError
// otherwise. n != 0 gives R = V.
LocalParts localize(const SampledKernel& V, int n, bool diagonal);

// [omega][omega'] with index 0 for omega = +, 1 for omega = -
using Mat2 = Eigen::Matrix2cd;

struct ScaleCouplings {
  int h = 0;
  Mat2 nu = Mat2::Zero(), v0 = Mat2::Zero(), v1 = Mat2::Zero();
};

struct BetaFunction {
  Mat2 nu = Mat2::Zero(), v0 = Mat2::Zero(), v1 = Mat2::Zero();
};

// nu_h = gamma nu_{h+1} + gamma beta^nu, v_h = v_{h+1} + beta^v
ScaleCouplings flow_step(const ScaleCouplings& up, const BetaFunction& b, double gamma);

struct RunningCouplings {
  double gamma = 2.0;
  int h_beta = 0;
  std::vector<ScaleCouplings> scales;  // h = 0, -1, ..., h_beta
  std::array<double, 2> nu_omega{};

  const ScaleCouplings& at(int h) const { return scales.at(-h); }
};

// Bulk part of the free covariance and chains of -lambda phi nodes joined by it.
class BulkChains {
 public:
  BulkChains(const HoppingModel& m, const QuasiPeriodicPotential& pot,
             const std::vector<EdgeModeData>& modes, const CutoffFunction& chi, int s_max,
             Exec exec = Exec::parallel);

  int L1() const { return L1_; }
  int D() const { return D_; }
  int s_max() const { return s_max_; }
  long long m_alpha() const { return m_alpha_; }
  int shift(int j, int n) const;
  const QuasiPeriodicPotential& potential() const { return pot_; }
  const std::vector<EdgeModeData>& modes() const { return modes_; }
  const CutoffFunction& chi() const { return chi_; }
  double mu() const { return mu_; }

  Mat bulk(double k0, int j) const;
  std::vector<Mat> bulk_all(double k0) const;
  // diagonal of -lambda phi_{-n}; zero when |n| exceeds the mode range
  Vec node(int n) const;

  // A_{n1} G_b(k + n1 alpha) A_{n2} G_b(k + (n1 + n2) alpha) ... A_{ns} at k = (k0, j).
  // Throws ConfigError if s = 0 or s > s_max.
  Mat chain(const std::vector<int>& shifts, double k0, int j) const;

  // V^(e)(k0; j, .) summed over all chains with s <= s_max nodes; entry j2 is the block
  // from momentum j to momentum j2 (zero blocks where no chain lands).
  std::vector<Mat> potential_row(const std::vector<Mat>& Gb, int j) const;

  // Full L1 D x L1 D operators at one frequency (small lattices).
  Mat full_bulk(const std::vector<Mat>& Gb) const;
  Mat full_vertex() const;

 private:
  QuasiPeriodicPotential pot_;
  std::vector<EdgeModeData> modes_;
  CutoffFunction chi_;
  int L1_, D_, s_max_, n_phi_;
  long long m_alpha_;
  double mu_;
  std::vector<Mat> H_;
  Exec exec_;
};

struct EdgeSite {
  int omega = +1;
  int j = 0;       // lattice momentum index
  int r = 0;       // j - jF(omega), wrapped
  double energy = 0.0;
};

// Matrices over edge sites at a set of Matsubara indices.
struct EffectivePotentialKernel {
  int h = 1;
  double beta = 0.0;
  int L1 = 0;
  long long m_alpha = 0;
  std::vector<EdgeSite> sites;
  std::map<int, Mat> K;

  int site(int omega, int r) const;  // -1 if absent
  // V_{n; omega, omega'}(q) at q = (k0(m), 2 pi r / L1), zero off the support
  cplx value(int n, int omega, int omega_p, int m, int r) const;
  // max |V(-k0) - V(k0)^dagger| over stored pairs m, -m-1
  double conjugation_defect() const;
};

// -lambda <xi^omega(k), phi_{-n} xi^omega'(k + n alpha)> on the edge windows, k0-independent.
EffectivePotentialKernel effective_potential_order1(const QuasiPeriodicPotential& pot,
                                                    const std::vector<EdgeModeData>& modes,
                                                    int L1, const std::vector<int>& m = {0, -1},
                                                    double beta = 1.0);

// Kernels coupling the external field phi (L1 D components) and the edge field (sites).
struct PhiPsiKernels {
  Mat phi_psi, psi_phi, phi_phi;
};

// W_phipsi <- W + W g V, W_psiphi <- W + V g W, phi_phi += W g W + W g V g W.
// Throws ConfigError on dimension mismatch.
PhiPsiKernels iterate_phi_psi_kernels(const PhiPsiKernels& W, const Mat& V, const Vec& g);

// Sum_{s=1}^{s_max} N (G N)^{s-1} with G diagonal.
Mat chain_sum(const Mat& N, const Vec& g, int s_max);

struct RgOptions {
  double beta = 1536.0;
  double gamma = 2.0;
  double delta = 0.0;  // cascade delta; 0 means edge delta / gamma^3
  int s_max = 2;
  int max_sweeps = 40;
  int warmup = 2;
  double tol = 1e-15;
  // Matsubara indices carried along; {0, -1} are always included
  std::vector<int> freqs = {0, -1};
};

struct FlowPass {
  RunningCouplings rcc;
  std::vector<BetaFunction> beta;       // beta_{h}, h = 0, -1, ..., h_beta + 1 (chains on scale h)
  std::array<double, 2> nu0_computed{}; // gamma^0 L0 V^(0), diagonal
  std::array<int, 2> jF{};
  std::array<double, 2> kF{}, vtilde{};
  int support_violations = 0;
  std::vector<EffectivePotentialKernel> kernels;  // V^(1~), V^(0), ..., V^(h_beta)
  Mat two_point;                                  // L1 D x L1 D when requested
};

struct FixedPointLog {
  int iteration = 0;
  double sup_distance = 0.0;
  double contraction = 0.0;  // sup_distance / previous, NaN at the first sweep
};

struct FixedPointResult {
  FlowPass pass;
  std::vector<std::array<double, 2>> nu;  // imposed diagonal nu_h, h = 0 .. h_beta
  std::array<double, 2> nu_omega{};
  std::array<double, 2> kF_lambda{};      // eps(kF) - mu + nu_omega = 0
  std::vector<FixedPointLog> log;
  double contraction = 0.0;               // largest estimate after warmup
  bool converged = false;
};

struct ThetaFit {
  double theta = std::numeric_limits<double>::quiet_NaN();
  double C = std::numeric_limits<double>::quiet_NaN();
  double r2 = 0.0;
  int points = 0;
};

class EdgeRG {
 public:
  EdgeRG(const HoppingModel& m, const QuasiPeriodicPotential& pot,
         const std::vector<EdgeModeData>& modes, double edge_delta, const RgOptions& opt,
         Exec exec = Exec::parallel);

  const ScaleCascade& cascade() const { return cascade_; }
  const BulkChains& bulk() const { return bulk_; }
  const RgOptions& options() const { return opt_; }
  double lambda() const { return bulk_.potential().lambda; }

  // One pass down the scales with imposed diagonal nu_h (index -h) and counterterms.
  // An empty nu keeps the computed nu_h at every scale. With two_point_m the phi-phi
  // kernel is assembled at that Matsubara index over the full L1 D space.
  FlowPass run_pass(const std::vector<std::array<double, 2>>& nu, std::array<double, 2> nu_omega,
                    const int* two_point_m = nullptr, bool keep_kernels = false) const;

  // Counterterm in the band: eps(k) - mu + nu = 0 near the grid Fermi point.
  double fermi_momentum(int w, double nu_omega) const;

 private:
  HoppingModel model_;
  ScaleCascade cascade_;
  CutoffFunction edge_chi_;
  RgOptions opt_;
  BulkChains bulk_;
  Exec exec_;
};

// Iterates T(nu)_h = -sum_{k = h_beta + 1}^{h} gamma^{k - h} beta^nu_k with nu_{h_beta} = 0
// together with a Newton update of nu_omega matching nu_{omega, omega, 0}. Throws
// NoContraction if the sweep ratio is >= 1 after the warmup while above tolerance.
FixedPointResult solve_nu_fixed_point(const EdgeRG& rg);

// log-linear fit of |nu_{omega,omega,h}| / |lambda| against h log gamma over scales with
// nonzero nu
ThetaFit fit_theta(const RunningCouplings& rcc, double lambda, int w);

}  // namespace edgeflow
