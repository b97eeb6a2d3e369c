#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "edgeflow/greens.hpp"

namespace edgeflow {

void hermitian_eigen(const Mat& A, RVec& w, Mat& V) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  V = A;
  w.resize(n);
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', n, V.data(), n, w.data());
  if (info != 0) throw NumericalFailure("zheevd failed with info = " + std::to_string(info));
  // Largest component of each eigenvector real positive.
  for (lapack_int j = 0; j < n; ++j) {
    Eigen::Index i;
    V.col(j).cwiseAbs2().maxCoeff(&i);
    cplx p = V(i, j);
    V.col(j) *= std::abs(p) / p;
  }
}

Spectrum diagonalize(const HoppingModel& m, const QuasiPeriodicPotential& pot) {
  Spectrum sp;
  sp.lattice = m.lattice;
  sp.mu = m.mu;
  hermitian_eigen(disordered_hamiltonian(m, pot), sp.energy, sp.U);
  return sp;
}

double time_weight(double beta, double xi, double tau) {
  if (tau > 0) {
    // e^{-tau xi} (1 - f)
    if (xi >= 0) return std::exp(-tau * xi) / (1.0 + std::exp(-beta * xi));
    return std::exp((beta - tau) * xi) / (1.0 + std::exp(beta * xi));
  }
  if (tau < 0) {
    // -e^{|tau| xi} f
    double a = -tau;
    if (xi <= 0) return -std::exp(a * xi) / (1.0 + std::exp(beta * xi));
    return -std::exp((a - beta) * xi) / (1.0 + std::exp(-beta * xi));
  }
  return -fermi(beta, xi);
}

Mat disordered_two_point(const Spectrum& sp, double beta, double x0, double y0,
                         const std::vector<int>& rows, const std::vector<int>& cols) {
  if (!(x0 >= 0 && x0 < beta && y0 >= 0 && y0 < beta))
    throw Error("imaginary times must lie in [0, beta)");
  const Eigen::Index N = sp.energy.size();
  RVec w(N);
  for (Eigen::Index j = 0; j < N; ++j) w(j) = time_weight(beta, sp.energy(j) - sp.mu, x0 - y0);
  Mat R(rows.size(), N), C(cols.size(), N);
  for (std::size_t a = 0; a < rows.size(); ++a) R.row(a) = sp.U.row(rows[a]);
  for (std::size_t b = 0; b < cols.size(); ++b) C.row(b) = sp.U.row(cols[b]);
  return R * w.asDiagonal() * C.adjoint();
}

}  // namespace edgeflow
