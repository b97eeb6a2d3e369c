#include "edgeflow/lattice.hpp"

#include <cmath>
#include <numeric>

namespace edgeflow {

double torus_dist(double k) {
  double r = std::fmod(k, kTwoPi);
  if (r < 0) r += kTwoPi;
  return std::min(r, kTwoPi - r);
}

double wrap_2pi(double k) {
  double r = std::fmod(k, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r >= kTwoPi) r -= kTwoPi;
  return r;
}

double fermi(double beta, double e) {
  double x = beta * e;
  if (x > 0) {
    double t = std::exp(-x);
    return t / (1.0 + t);
  }
  return 1.0 / (1.0 + std::exp(x));
}

CylinderLattice::CylinderLattice(int l1, int l2, int s) : L1(l1), L2(l2), S(s) {
  if (L1 < 3 || L2 < 3 || S < 1)
    throw ConfigError("lattice requires L1 >= 3, L2 >= 3, S >= 1");
}

HoppingModel make_model(const CylinderLattice& lat, Mat T0, Mat Tp, Mat Tm, double mu) {
  const int D = lat.block();
  for (const Mat* t : {&T0, &Tp, &Tm})
    if (t->rows() != D || t->cols() != D) throw Error("hopping block has wrong dimension");
  const double tol = 1e-13;
  if ((T0 - T0.adjoint()).cwiseAbs().maxCoeff() > tol) throw Error("T(0) is not Hermitian");
  if ((Tp - Tm.adjoint()).cwiseAbs().maxCoeff() > tol) throw Error("T(+1) != T(-1)^dagger");
  const int S = lat.S;
  for (const Mat* t : {&T0, &Tp, &Tm})
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b)
        if (std::abs(a / S - b / S) > 1 && std::abs((*t)(a, b)) != 0.0)
          throw Error("hopping exceeds bandwidth 1 in x2");
  HoppingModel m;
  m.lattice = lat;
  m.T0 = std::move(T0);
  m.Tp = std::move(Tp);
  m.Tm = std::move(Tm);
  m.mu = mu;
  return m;
}

HoppingModel build_qwz_model(double u, const CylinderLattice& lat, double mu) {
  if (lat.S != 2) throw ConfigError("qwz model needs S = 2");
  if (!(std::abs(u) > 0.0 && std::abs(u) < 2.0))
    throw ConfigError("qwz model needs 0 < |u| < 2 (gapless or trivial otherwise)");
  Eigen::Matrix2cd s1, s2, s3;
  s1 << 0, 1, 1, 0;
  s2 << 0, -kI, kI, 0;
  s3 << 1, 0, 0, -1;
  const Eigen::Matrix2cd tm = 0.5 * s3 + s1 / (2.0 * kI);  // coefficient of e^{ik1}
  const Eigen::Matrix2cd tp = 0.5 * s3 - s1 / (2.0 * kI);
  const Eigen::Matrix2cd up = 0.5 * s3 - s2 / (2.0 * kI);  // H(x2+1, x2)
  const int D = lat.block();
  Mat T0 = Mat::Zero(D, D), Tp = Mat::Zero(D, D), Tm = Mat::Zero(D, D);
  for (int x = 0; x < lat.L2; ++x) {
    T0.block<2, 2>(2 * x, 2 * x) = u * s3;
    Tp.block<2, 2>(2 * x, 2 * x) = tp;
    Tm.block<2, 2>(2 * x, 2 * x) = tm;
    if (x + 1 < lat.L2) {
      T0.block<2, 2>(2 * x + 2, 2 * x) = up;
      T0.block<2, 2>(2 * x, 2 * x + 2) = up.adjoint();
    }
  }
  return make_model(lat, std::move(T0), std::move(Tp), std::move(Tm), mu);
}

HoppingModel mirror_x2(const HoppingModel& m) {
  const auto& lat = m.lattice;
  const int D = lat.block(), S = lat.S;
  Eigen::PermutationMatrix<Eigen::Dynamic> P(D);
  for (int x = 0; x < lat.L2; ++x)
    for (int s = 0; s < S; ++s) P.indices()[x * S + s] = (lat.L2 - 1 - x) * S + s;
  auto conj = [&](const Mat& t) -> Mat { return P * t * P.transpose(); };
  return make_model(lat, conj(m.T0), conj(m.Tp), conj(m.Tm), m.mu);
}

int grid_index(const CylinderLattice& lat, double k1) {
  double j = k1 * lat.L1 / kTwoPi;
  double r = std::round(j);
  if (std::abs(j - r) > 1e-9) throw Error("k1 is not on the 2pi/L1 grid");
  long n = static_cast<long>(r) % lat.L1;
  if (n < 0) n += lat.L1;
  return static_cast<int>(n);
}

Mat bloch_any(const HoppingModel& m, double k1) {
  const cplx e = std::exp(kI * k1);
  return m.T0 + std::conj(e) * m.Tp + e * m.Tm;
}

Mat bloch_transform(const HoppingModel& m, double k1) {
  grid_index(m.lattice, k1);
  return bloch_any(m, k1);
}

Mat bloch_derivative(const HoppingModel& m, double k1) {
  const cplx e = std::exp(kI * k1);
  return -kI * std::conj(e) * m.Tp + kI * e * m.Tm;
}

Mat full_hamiltonian(const HoppingModel& m) {
  const auto& lat = m.lattice;
  const int D = lat.block(), N = lat.dim();
  Mat H = Mat::Zero(N, N);
  for (int x = 0; x < lat.L1; ++x) {
    const int a = x * D, b = ((x + 1) % lat.L1) * D;
    H.block(a, a, D, D) += m.T0;
    H.block(b, a, D, D) += m.Tp;
    H.block(a, b, D, D) += m.Tm;
  }
  return H;
}

Eigen::SparseMatrix<cplx> full_hamiltonian_sparse(const HoppingModel& m) {
  const auto& lat = m.lattice;
  const int D = lat.block();
  std::vector<Eigen::Triplet<cplx>> trip;
  auto put = [&](int r0, int c0, const Mat& t) {
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        if (t(i, j) != 0.0) trip.emplace_back(r0 + i, c0 + j, t(i, j));
  };
  for (int x = 0; x < lat.L1; ++x) {
    const int a = x * D, b = ((x + 1) % lat.L1) * D;
    put(a, a, m.T0);
    put(b, a, m.Tp);
    put(a, b, m.Tm);
  }
  Eigen::SparseMatrix<cplx> H(lat.dim(), lat.dim());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

double stencil_derivative(const std::vector<double>& e, std::size_t i, double h) {
  const std::size_t n = e.size();
  if (n < 2) throw Error("derivative needs at least two samples");
  if (i >= 2 && i + 2 < n)
    return (e[i - 2] - 8 * e[i - 1] + 8 * e[i + 1] - e[i + 2]) / (12 * h);
  if (i >= 1 && i + 1 < n) return (e[i + 1] - e[i - 1]) / (2 * h);
  if (i == 0) return (e[1] - e[0]) / h;
  return (e[n - 1] - e[n - 2]) / h;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error("line fit needs two or more points");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace edgeflow
