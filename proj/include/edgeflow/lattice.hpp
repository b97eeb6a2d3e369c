#pragma once

#include <Eigen/Sparse>

#include "edgeflow/common.hpp"

namespace edgeflow {

// Cylinder Lambda_L: x1 periodic with L1 sites, x2 open with L2 sites,
// S internal states per site. Coordinates are 0-based internally
// (x2 = 0 is the row the literature calls x2 = 1).
struct CylinderLattice {
  int L1 = 0;
  int L2 = 0;
  int S = 0;

  CylinderLattice() = default;
  CylinderLattice(int l1, int l2, int s);

  int block() const { return S * L2; }
  int dim() const { return S * L1 * L2; }
  // Index layout: ((x1 * L2) + x2) * S + sigma.
  int index(int x1, int x2, int sigma) const {
    int m = ((x1 % L1) + L1) % L1;
    return (m * L2 + x2) * S + sigma;
  }
  double momentum(int j) const { return kTwoPi * j / L1; }
};

// x1-translation-invariant hopping of range sqrt(2).
// T(d) is the block H(x1 + d, x1); Tp = T(+1), Tm = T(-1).
struct HoppingModel {
  CylinderLattice lattice;
  Mat T0, Tp, Tm;
  double mu = 0.0;
};

// Checks the HoppingModel invariants and throws Error on violation.
HoppingModel make_model(const CylinderLattice& lat, Mat T0, Mat Tp, Mat Tm, double mu);

// Two-band Chern insulator sin k1 s1 + sin k2 s2 + (u + cos k1 + cos k2) s3,
// open in x2.
HoppingModel build_qwz_model(double u, const CylinderLattice& lat, double mu = 0.0);

// Relabel x2 -> L2-1-x2.
HoppingModel mirror_x2(const HoppingModel& m);

// Grid index of k1 if it lies on (2pi/L1)Z within 1e-9, else throws.
int grid_index(const CylinderLattice& lat, double k1);

// H(k1) = T0 + e^{-ik1} T(+1) + e^{ik1} T(-1). Rejects off-grid k1.
Mat bloch_transform(const HoppingModel& m, double k1);
// Same formula without the grid check.
Mat bloch_any(const HoppingModel& m, double k1);
// Analytic d/dk1 of bloch_any.
Mat bloch_derivative(const HoppingModel& m, double k1);

Mat full_hamiltonian(const HoppingModel& m);
Eigen::SparseMatrix<cplx> full_hamiltonian_sparse(const HoppingModel& m);

struct EdgeModeData {
  int omega = +1;              // +1: near x2 = 0, -1: near x2 = L2-1
  std::vector<int> k_index;    // contiguous (cyclic) grid indices
  std::vector<double> k1;      // unwrapped, increasing
  std::vector<double> energy;
  std::vector<Vec> xi;         // normalized, length S*L2
  std::vector<double> loc_weight;
  double kF = 0.0;             // in [0, 2pi)
  double v = 0.0;
  int kF_index = 0;            // nearest grid index
  double decay_rate = 0.0;
};

struct EdgeOptions {
  double min_velocity = 0.05;
  double min_weight = 0.9;
};

std::vector<EdgeModeData> edge_spectrum(const HoppingModel& m, double mu, double delta,
                                        const EdgeOptions& opt = {}, Exec exec = Exec::parallel);

struct FermiPoint {
  double kF = 0.0;
  double v = 0.0;
  int kF_index = 0;
};

FermiPoint fermi_point(const EdgeModeData& mode, double mu);

// Five-point derivative of a sampled band at position i (lower order at the ends).
double stencil_derivative(const std::vector<double>& e, std::size_t i, double h);

// Least-squares line through (x, y); returns slope, intercept, R^2.
struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace edgeflow
