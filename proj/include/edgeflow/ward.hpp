#pragma once

#include <array>

#include "edgeflow/scaling.hpp"

namespace edgeflow {

// Terms of  eta K(P, B) + theta sum_k K(A_k, B) + i <[P, B]> = 0  with K the Euclidean
// pair response, P = sum_x mu(theta x) n_x, A_k = sum_x dmu_k(x) j_{k,x} and
// B = theta sum_x phi(theta x1, x2) j_{nu,x}.
struct CurrentWardTerms {
  int nu = 0;
  cplx density, gradient, commutator;
  double residual = 0.0;  // |sum| / max |term|
};

struct CurrentWardReport {
  double beta = 0.0, eta = 0.0, theta = 0.0, ell = 0.0;
  std::vector<CurrentWardTerms> terms;
  double max_residual = 0.0;
};

// eta must lie in (2 pi / beta) N, eta > 0.
CurrentWardReport check_current_ward(const Spectrum& sp, const CurrentOperators& cur,
                                     const TestFunctionPair& tf, double beta, double eta,
                                     const std::vector<int>& nus = {0, 1},
                                     Exec exec = Exec::parallel);

// p = (2 pi p0 / beta, 2 pi p1 / L1) with p0 bosonic, k = (grid.k0(k0), 2 pi k1 / L1),
// h = k + p + m alpha.
struct MomentumTriple {
  int p0 = 0, p1 = 0;
  int k0 = 0, k1 = 0;
  int m = 0;
};

struct VertexFunction {
  std::vector<MomentumTriple> triples;
  std::vector<std::array<Mat, 2>> S3;  // [triple][mu], D x D blocks (x2 sigma, y2 zeta)
};

// Wick form  S3_mu(p, k, h) = sum_r S2(k, r - p) J_mu(r1, p1) S2(r, h)  summed over the full
// k1 grid. Throws ConfigError listing the frequency indices that fall outside the grid.
VertexFunction vertex_function(const MomentumTwoPoint& S2, const CurrentOperators& cur,
                               const std::vector<MomentumTriple>& triples,
                               Exec exec = Exec::parallel);

struct VertexWardReport {
  std::vector<double> residuals;  // per triple
  std::vector<double> scales;     // largest term norm, at least |p| |G(k)| |G(h)|
  double max_residual = 0.0;
};

// -p0 S3_0 + (1 - e^{-i p1}) S3_1 = i S2(k, h - p) - i S2(k + p, h), relative to the scale.
// Residual 0 when every term vanishes (p = 0).
VertexWardReport check_vertex_ward(const VertexFunction& V, const MomentumTwoPoint& S2);

// Triples with q = k - (0, kF) log-spaced in |q| over [q_lo, q_hi], p alternately
// (2 pi / beta, 0) and (0, 2 pi / L1), h = k + p. Among grid points within 15% of each
// target one is drawn with the seed; the sign of k0 is drawn as well.
std::vector<MomentumTriple> ward_sample_triples(const MomentumTwoPoint& S2, int kF_index,
                                                double q_lo, double q_hi, int count,
                                                unsigned seed);
// Default set: q_lo = 2 pi / beta, q_hi = max(0.1, 4 q_lo), 12 triples.
std::vector<MomentumTriple> default_ward_triples(const MomentumTwoPoint& S2, int kF_index,
                                                 unsigned seed);

// |q1|^M <= |q0| <= |q1|, |p1| <= |q1| / 2, |p0| <= |q0| / 2, |q| in [q_max / 2, q_max].
struct ZetaWindow {
  double q_max = 0.3;
  double M = 2.0;
  int count = 12;
  unsigned seed = 0;
};

std::vector<MomentumTriple> zeta_window_triples(const MomentumTwoPoint& S2,
                                                const ScalingLimitFit& fit, const ZetaWindow& w);

struct ZetaReport {
  double v0 = 0.0, v1 = 0.0;
  DressedVertices direct;
  double ratio0 = 0.0, ratio1 = 0.0;  // direct zeta / v
  // Z0^dagger S3_mu Z0 / |Z0|^4 fitted by g(q) g(q + p) zeta_mu with zeta_mu free
  cplx fit_zeta0, fit_zeta1;
  double fit_residual = 0.0;  // sqrt(SSR / sum |s|^2) over both channels
  double r2 = 0.0;
  bool window_too_large = false;  // r2 < 0.9
  std::vector<MomentumTriple> triples;
};

ZetaReport verify_zeta_relations(const ScalingLimitFit& fit, const HoppingModel& m,
                                 const MomentumTwoPoint& S2, const CurrentOperators& cur,
                                 const ZetaWindow& w = {}, Exec exec = Exec::parallel);

}  // namespace edgeflow
