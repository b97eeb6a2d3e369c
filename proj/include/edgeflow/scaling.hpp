#pragma once

#include <map>

#include "edgeflow/transport.hpp"

namespace edgeflow {

// g(q) = chi(|(v0 q0, v1 q1)|) / (i v0 q0 + v1 q1).
struct RelativisticPropagator {
  double v0 = 1.0, v1 = 1.0;
  CutoffFunction chi;

  cplx operator()(double q0, double q1) const { return relativistic_g(v0, v1, chi, q0, q1); }
  // (1 / beta L1) sum_q e^{i (q0 x0 + q1 x1)} g(q) over the fermionic x torus grid.
  cplx spacetime(double x0, int x1, double beta, int L1) const;
};

// Rows of the omega half of one x1 block: x2 < L2/2 for omega = +1, x2 >= L2/2 otherwise.
std::vector<int> side_rows(const CylinderLattice& lat, int omega);

// S2 between the edge rows of the omega side at imaginary-time separation tau,
// from the fixed column x1 = y1 to every x1. blocks[x1] is |rows| x |rows|.
struct EdgeCorrelator {
  int omega = +1;
  double tau = 0.0;
  int y1 = 0;
  std::vector<Mat> blocks;
};
EdgeCorrelator edge_correlator(const Spectrum& sp, double beta, double tau, int omega, int n_rows,
                               int y1 = 0);

// Frobenius norm of sum_{x1} e^{-i k_j (x1 - y1)} blocks[x1] on the k1 grid.
RVec edge_fourier_amplitude(const EdgeCorrelator& c);

// Dominant peak of a sampled amplitude on the k1 grid, refined by a parabola through
// the peak and its neighbours. Throws ExtractionAmbiguous when any value further than
// two grid steps from the peak exceeds half the peak.
double peak_momentum(const RVec& amplitude);
double extract_kF(const EdgeCorrelator& c);
// Scalar signal s(x1), x1 = 0..L1-1.
double extract_kF(const std::vector<cplx>& signal);

struct SatelliteRatios {
  double kF = 0.0;
  int kF_index = 0;
  double main = 0.0;
  double plus = 0.0, minus = 0.0;  // amplitude at kF +- alpha over main
};
SatelliteRatios satellite_ratios(const EdgeCorrelator& c, double kF, long long m_alpha);

struct FitOptions {
  int stencil = 4;          // k1 grid steps on each side of kF
  int shells = 3;           // Matsubara shells +-(2j+1) pi / beta
  int n_keep = 4;
  double rank_ratio = 0.3;  // max sigma_2 / sigma_1
};

// Zn are the omega-side blocks of the dressed edge mode at k1 = kF + n alpha,
// normalized so that sum_n |Zn|^2 = 1.
struct ScalingLimitFit {
  int omega = +1;
  double kF_lambda = 0.0;
  int kF_index = 0;
  double alpha = 0.0;
  double v0 = 0.0, v1 = 0.0;
  std::map<int, Vec> Z;  // length S L2, zero off the omega half
  double fit_residual = 0.0;   // weighted relative residual of the inverse-propagator fit
  double rank_ratio = 0.0;     // worst sigma_2 / sigma_1 over the stencil
  double z_spread = 0.0;       // relative difference of the Zn estimates at +-pi/beta
};

// Mixed-momentum block S_n(k0_i, k1_j) for frequency grid index i.
using BlockSource = std::function<Mat(int i, int j, int n)>;

ScalingLimitFit fit_velocities_and_Z(const BlockSource& S2, const CylinderLattice& lat,
                                     const MatsubaraGrid& grid, long long m_alpha,
                                     double kF_lambda, int omega, const FitOptions& opt = {});
ScalingLimitFit fit_velocities_and_Z(const MomentumTwoPoint& S2, double kF_lambda, int omega,
                                     const FitOptions& opt = {});

struct DressedVertices {
  double zeta0 = 0.0;
  cplx zeta1;
};
// zeta0 = sum |Zn|^2, zeta1 = sum <Zn, dH/dk1(kF + n alpha) Zn>; keep_modes < 0 keeps all.
DressedVertices dressed_vertices(const ScalingLimitFit& fit, const HoppingModel& m,
                                 int keep_modes = -1);

// Log-log slopes in 1 + x1 of the omega-side S2 at (tau, x1; 0, 0), x1 in [x_min, L1/4], for the
// singular part e^{i kF x1} (sum_n e^{i n alpha x1} Zn) gcheck(x) (sum_n Zn)^dagger and for the
// remainder S2 minus the singular part.
struct RemainderFit {
  double singular_slope = 0.0;   // log-log slope of the singular part
  double remainder_slope = 0.0;  // log-log slope of the remainder
  double r2 = 0.0;
};
RemainderFit remainder_decay(const Spectrum& sp, double beta, const ScalingLimitFit& fit,
                             const CutoffFunction& chi, double tau = 1.0, int x_min = 2);

}  // namespace edgeflow
