#pragma once

#include <filesystem>
#include <memory>

#include "edgeflow/quasiperiodic.hpp"

namespace edgeflow {

// Fermionic frequencies k0 = (2pi/beta)(i - N + 1/2), i = 0..2N-1.
struct MatsubaraGrid {
  double beta = 48.0;
  int n_freq = 1024;

  int size() const { return 2 * n_freq; }
  double k0(int i) const { return kTwoPi / beta * (i - n_freq + 0.5); }
  // Index of k0 on the grid; throws if off-grid or beyond the cutoff.
  int index(double k0) const;
};

// Smooth even cutoff: 1 on |x| <= delta/gamma, 0 on |x| >= delta.
struct CutoffFunction {
  double delta = 0.4;
  double gamma = 2.0;
  double operator()(double x) const;
};

// C-infinity step from 1 (t <= 0) to 0 (t >= 1).
double smooth_step(double t);

Mat free_covariance(const HoppingModel& m, const MatsubaraGrid& grid, double k0, double k1);

struct EdgeBulk {
  Mat edge, bulk;
};
EdgeBulk edge_bulk_split(const HoppingModel& m, const Mat& G, const CutoffFunction& chi,
                         const std::vector<EdgeModeData>& modes, double k0, double k1);

struct CombesThomas {
  double c = 0.0;        // decay rate of max |G_bulk| in |x2 - y2|
  double C = 0.0;        // prefactor
  double r2 = 0.0;
  double envelope = 0.0; // sup |G_bulk| (1 + |k0|) over the frequency grid
  std::vector<double> separations, log_max;
};
// Fit of log max_{sigma zeta} |G(x2, y2)| against |x2 - y2| over a set of samples.
CombesThomas decay_fit(const std::vector<Mat>& samples, int S, int max_sep);
CombesThomas combes_thomas_fit(const HoppingModel& m, const CutoffFunction& chi,
                               const MatsubaraGrid& grid, const std::vector<EdgeModeData>& modes,
                               const std::vector<double>& k1_samples, int max_sep = 12);

// Eigendecomposition of the full one-particle Hamiltonian A = H + lambda phi.
struct Spectrum {
  CylinderLattice lattice;
  double mu = 0.0;
  RVec energy;  // ascending
  Mat U;        // columns are eigenvectors, phase-fixed
};

// Dense Hermitian eigensolver (LAPACK zheevd).
void hermitian_eigen(const Mat& A, RVec& w, Mat& V);

std::string spectrum_hash(const HoppingModel& m, const QuasiPeriodicPotential& pot);
Spectrum diagonalize(const HoppingModel& m, const QuasiPeriodicPotential& pot);
// Loads from / stores to cache_dir (EDGEFLOW_CACHE_DIR if empty; no caching if neither).
// hit is set when the decomposition came from disk.
std::shared_ptr<const Spectrum> cached_spectrum(const HoppingModel& m,
                                                const QuasiPeriodicPotential& pot,
                                                const std::filesystem::path& cache_dir = {},
                                                bool* hit = nullptr);

// Imaginary-time weight of eigenvalue xi = e - mu at tau = x0 - y0 in (-beta, beta).
// tau = 0 is the normal-ordered value -f(xi).
double time_weight(double beta, double xi, double tau);

// S2 at imaginary times (x0, y0) between full-lattice index sets.
Mat disordered_two_point(const Spectrum& sp, double beta, double x0, double y0,
                         const std::vector<int>& rows, const std::vector<int>& cols);

// Matsubara sum (truncated at the grid, tail-corrected to fourth order) of the clean
// covariance, transformed back to (tau, x1 - y1); returns the (S L2) x (S L2) block.
Mat matsubara_time_sum(const HoppingModel& m, const MatsubaraGrid& grid, double tau, int dx1);

// Sum over all fermionic frequencies of e^{i k0 tau}/(i k0)^m divided by beta, 0 < tau < beta.
double tail_moment(int m, double beta, double tau);

// Mixed momentum representation S_n(k0, k1; x2 s, y2 z), assembled lazily from
// the spectrum: S_n(k) = Uhat_{k1} diag(1/(i k0 + e - mu)) Uhat_{k1 + n alpha}^dagger.
class MomentumTwoPoint {
 public:
  MomentumTwoPoint(std::shared_ptr<const Spectrum> sp, const MatsubaraGrid& grid, long long m_alpha,
                   int n_keep, double memory_budget_gb = 3.0);

  const Spectrum& spectrum() const { return *sp_; }
  const MatsubaraGrid& grid() const { return grid_; }
  int n_keep() const { return n_keep_; }
  int L1() const { return sp_->lattice.L1; }
  long long m_alpha() const { return m_; }
  // Grid index of k1 + n alpha.
  int shift(int j, int n) const;

  // Block at fermionic index i0, momentum index j1, shift n (|n| <= n_keep).
  Mat block(int i0, int j1, int n) const;
  // Same at an arbitrary complex "frequency" z replacing i k0 (used for bosonic shifts).
  Mat block_at(cplx z, int j1, int j2) const;
  // Uhat_{j1} diag(w) Uhat_{j2}^dagger for arbitrary eigenvalue weights.
  Mat weighted(const Vec& w, int j1, int j2) const;
  // All blocks in one row (D x L1 D, column block j2 = block_at(z, j1, j2)) or one
  // column (L1 D x D, row block j1 = block_at(z, j1, j2)).
  Mat row_strip(cplx z, int j1) const;
  Mat col_strip(cplx z, int j2) const;

 private:
  std::shared_ptr<const Spectrum> sp_;
  MatsubaraGrid grid_;
  long long m_;
  int n_keep_;
  Mat uhat_;  // row blocks of size S L2 per k1
};

}  // namespace edgeflow
