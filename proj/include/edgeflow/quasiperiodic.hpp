#pragma once

#include <map>
#include <utility>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "edgeflow/lattice.hpp"

namespace edgeflow {

using Real50 = boost::multiprecision::cpp_bin_float_50;

Real50 golden_mean();  // (sqrt 5 - 1)/2
// "golden" or a decimal literal.
Real50 parse_frequency(const std::string& s);

// Continued-fraction convergents p/q of x in (0,1) with q <= q_max, increasing q.
std::vector<std::pair<long long, long long>> convergents(const Real50& x, long long q_max);
// Double input: remainders below double resolution terminate the expansion.
std::vector<std::pair<long long, long long>> convergents(double x, long long q_max);

struct RationalFrequency {
  long long m = 0;
  int L1 = 0;
  double alpha = 0.0;           // 2 pi m / L1
  double alpha_inf_over_2pi = 0.0;
  double tau = 2.0;
  double c_est = 0.0;           // min_{0<|n|<=L1/2} |n alpha|_T |n|^tau
};

RationalFrequency best_frequency(const Real50& alpha_inf_over_2pi, int L1, double tau);

struct QuasiPeriodicPotential {
  RationalFrequency freq;
  // modes[n] holds phi_n(x2, sigma) in the lattice block layout (length S*L2).
  std::map<int, Vec> modes;
  double lambda = 0.0;
  double C = 1.0, c = 0.5;  // |phi_n| <= C e^{-c|n|}
};

// phi_n(x2) = A e^{-c|n|}, x2 and sigma independent, |n| <= n_modes.
QuasiPeriodicPotential default_potential(const RationalFrequency& f, const CylinderLattice& lat,
                                         double lambda, int n_modes, double amplitude,
                                         double decay);

// Throws if phi_{-n} != conj(phi_n) or the decay bound fails.
void check_potential(const QuasiPeriodicPotential& pot);

// Real field phi(x1, x2, sigma) in full-lattice index layout (without lambda).
RVec build_potential(const QuasiPeriodicPotential& pot, const CylinderLattice& lat);

// H_full + lambda diag(phi).
Mat disordered_hamiltonian(const HoppingModel& m, const QuasiPeriodicPotential& pot);

}  // namespace edgeflow
