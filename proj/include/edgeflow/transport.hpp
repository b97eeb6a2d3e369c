#pragma once

#include <functional>
#include <optional>

#include <Eigen/Sparse>

#include "edgeflow/greens.hpp"

namespace edgeflow {

using SpMat = Eigen::SparseMatrix<cplx>;

// Lattice currents of a hopping model as one-particle matrices M, meaning the
// operator sum_{a,b} a*_a M_ab a_b. Sites are (x1, x2) pairs.
//
// j_{y,x} = i (H(y,x) a*_y a_x - H(x,y) a*_x a_y), and
// j_{i,x} = j_{x,x+e_i} + (j_{x,x+e_i+e_j} + j_{x,x+e_i-e_j} + j_{x+e_j,x+e_i} + j_{x-e_j,x+e_i}) / 2.
class CurrentOperators {
 public:
  // Verifies i[H, n_x] = -sum_i d_i j_{i,x} and throws ConstructionBug otherwise.
  explicit CurrentOperators(const HoppingModel& m);

  const HoppingModel& model() const { return m_; }

  // sum_x w(x) j_{nu,x} for an L1 x L2 real weight field; nu = 0 is the density.
  SpMat smeared(int nu, const RMat& w) const;
  // Bond current j_{y,x}.
  SpMat bond(int y1, int y2, int x1, int x2) const;
  // Kernel of the x2-summed current at momentum p1, acting a_{k1} -> a_{k1 - p1}.
  // J_0 = identity, J_1 = i e^{ik1} T(-1) - i e^{-i(k1-p1)} T(+1).
  Mat kernel(int nu, double k1, double p1) const;
  // Max entry of i[H, diag(w)] - sum_i sum_x (w(x+e_i) - w(x)) j_{i,x}.
  double continuity_residual(const RMat& w) const;
  // Copy whose j_1 omits the x1-bond leaving (x1, x2) (for mutation tests).
  CurrentOperators without_bond(int x1, int x2) const;
  // Copy whose j_1 omits the x1-bond leaving row x2 in every column; kernel() follows.
  CurrentOperators without_row_bonds(int x2) const;

 private:
  HoppingModel m_;
  int drop_x1_ = -1, drop_x2_ = -1, drop_row_ = -1;
  Mat site_block(int y1, int y2, int x1, int x2) const;
  void add_bond(std::vector<Eigen::Triplet<cplx>>& t, int y1, int y2, int x1, int x2,
                double c) const;
};

// Continuum profiles f(s, t) with s along the edge and t across it.
struct Profile {
  std::string name;
  double support = 0.0;  // phi_inf(s, t) = 0 for |s| >= support
  std::function<double(double, double)> mu_inf;
  std::function<double(double, double)> phi_inf;
};
// "odd": mu = s e^{-s^2/2}, phi = (s/W) bump(s/W) plateau(t).
// "gauss": mu = e^{-(s^2+t^2)/2}, phi = bump(s/W) bump(t).
Profile make_profile(const std::string& name, double width = 3.0);

double bump(double t);     // exp(1 - 1/(1-t^2)) on |t| < 1
double plateau(double t);  // 1 on |t| <= 1/2, 0 on |t| >= 1

// Sum_n f(theta (x1 + n L1), t) truncated once new terms are below 1e-14 of the
// accumulated absolute sum.
double periodize(const std::function<double(double, double)>& f, int L1, double theta, double x1,
                 double t);

struct TestFunctionPair {
  std::string preset;
  double theta = 0.0, ell = 0.0;
  RMat mu;       // mu(theta x), L1 x L2
  RMat phi;      // phi_ell(theta x1, x2), L1 x L2 (without the factor theta)
  RMat dmu[2];   // forward differences (mu(theta(x + e_k)) - mu(theta x)) / theta, k = 1, 2
  double pairing = 0.0;  // integral over s of mu_inf(s, 0) phi_inf(s, 0)
};
// x2 enters the profiles as the 1-based row number.
TestFunctionPair make_test_functions(const CylinderLattice& lat, const Profile& prof,
                                     double theta, double ell);

// mu_hat(k_j, x2) = sum_x1 e^{-i k_j x1} mu(theta x), one column per x2.
Mat fourier_samples(const RMat& field);
// max_k |mu_hat(k, x2)| theta (1 + (|k|_T/theta)^r), maximised over x2 as well.
double envelope_constant(const RMat& field, double theta, int r);

// Pair weights in the eigenbasis, d = e_i - e_j, h = 1/(2 cosh(beta xi / 2)):
//   realtime:  (f_j - f_i) / (d - i eta)
//   euclidean: integral over s in [-beta/2, beta/2] of e^{-i eta s} <T gamma_s(.); .>,
//              (f_j - f_i - 2i sin(eta beta/2) h_i h_j) / (d - i eta)
// The two coincide on the bosonic grid.
enum class PairWeight { realtime, euclidean };

// K(A, B; eta) = sum_{ij} A_ij B_ji w_ij(eta) for Hermitian A, B. Exec::serial is the
// full double sum; Exec::parallel keeps only pairs with f_i != f_j and tiles the sum
// over OpenMP threads. One value per eta.
std::vector<cplx> pair_response(const Spectrum& sp, double beta, const SpMat& A, const SpMat& B,
                                const std::vector<double>& etas, PairWeight kind,
                                Exec exec = Exec::parallel);

// Several A against one B, sharing the eigenbasis transform of B.
std::vector<std::vector<cplx>> pair_response_batch(const Spectrum& sp, double beta,
                                                   const std::vector<const SpMat*>& As,
                                                   const SpMat& B, const std::vector<double>& etas,
                                                   PairWeight kind, Exec exec = Exec::parallel);

// <[A, B]> in the Gibbs state.
cplx commutator_expectation(const Spectrum& sp, double beta, const SpMat& A, const SpMat& B,
                            Exec exec = Exec::parallel);

// Real-time Kubo response of j_nu(phi_{theta,ell}) to P = sum_x mu(theta x) n_x.
std::vector<cplx> kubo_realtime(const Spectrum& sp, const CurrentOperators& cur,
                                const TestFunctionPair& tf, double beta,
                                const std::vector<double>& etas, int nu,
                                Exec exec = Exec::parallel);
cplx kubo_realtime(const Spectrum& sp, const CurrentOperators& cur, const TestFunctionPair& tf,
                   double beta, double eta, int nu, Exec exec = Exec::parallel);

// Euclidean form: integral over s in [-beta/2, beta/2] of e^{-i eta s} <T gamma_s(P); J>,
// eta on the bosonic grid (2 pi / beta) N. Throws ConfigError off the grid.
cplx kubo_euclidean(const Spectrum& sp, const CurrentOperators& cur, const TestFunctionPair& tf,
                    double beta, double eta_beta, int nu, Exec exec = Exec::parallel);

// Smallest bosonic frequency >= eta.
double bosonic_ceil(double beta, double eta);

struct TransportOptions {
  std::string preset = "odd";
  double width = 3.0;
  std::vector<double> thetas{0.4, 0.2, 0.1, 0.05};
  // sq: eta in {theta^2, theta^2/2}, theta^2 primary; pinned: eta = eta_value
  std::string eta_rule = "sq";
  double eta_value = 0.01;
  double ell = 8.0;
};

struct ResponsePoint {
  int nu = 0;
  double theta = 0.0, eta = 0.0;
  cplx chi;
  double G = 0.0;  // chi / pairing
};

struct LimitEstimate {
  double value = 0.0;
  double uncertainty = 0.0;
  std::vector<double> per_theta;    // G at the primary eta, per theta
  std::vector<double> richardson;   // successive extrapolants
};

struct EdgeCoefficients {
  LimitEstimate G0, G1;
  // theta limits along eta = theta^2/2 (sq rule only); their distance to G0/G1 is
  // folded into the uncertainty
  std::optional<LimitEstimate> G0_half, G1_half;
  std::vector<double> thetas;          // used
  std::vector<double> dropped_thetas;  // theta L1 < 2 pi
  std::vector<ResponsePoint> points;
  double pairing = 0.0;
};

// Sweep over the theta schedule with eta tied to theta by the eta rule; the
// theta -> 0 limit is Richardson (4 G(theta/2) - G(theta)) / 3. Throws NoLimit
// when the primary extrapolants spread more than the raw sequence.
EdgeCoefficients edge_coefficients(const Spectrum& sp, const CurrentOperators& cur, double beta,
                                   const TransportOptions& opt, Exec exec = Exec::parallel);
LimitEstimate theta_limit(const std::vector<double>& thetas, const std::vector<double>& values);

// g_s(q) = chi(sqrt(v0^2 q0^2 + v1^2 q1^2)) / (i v0 q0 + v1 q1).
cplx relativistic_g(double v0, double v1, const CutoffFunction& chi, double q0, double q1);

// (1/(beta L1)) sum_q g_s(q0 + eta, q1 + p) g_s(q), q1 on the torus (-pi, pi].
cplx bubble_finite(double v0, double v1, const CutoffFunction& chi, double beta, int L1,
                   double eta, double p);
cplx bubble_closed_form(double v0, double v1, double eta, double p);

}  // namespace edgeflow
