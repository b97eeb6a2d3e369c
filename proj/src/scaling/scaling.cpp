#include "edgeflow/scaling.hpp"

#include <cmath>

namespace edgeflow {

cplx RelativisticPropagator::spacetime(double x0, int x1, double beta, int L1) const {
  const double step0 = kTwoPi / beta;
  const int n0 = static_cast<int>(std::ceil(chi.delta / std::abs(v0) / step0)) + 1;
  int j_lo = -(static_cast<int>(std::ceil(chi.delta / std::abs(v1) * L1 / kTwoPi)) + 1), j_hi = -j_lo;
  if (j_hi - j_lo + 1 > L1) {
    j_lo = -(L1 / 2);
    j_hi = j_lo + L1 - 1;
  }
  cplx acc = 0;
  for (int i = -n0; i < n0; ++i) {
    const double q0 = step0 * (i + 0.5);
    for (int j = j_lo; j <= j_hi; ++j) {
      const double q1 = kTwoPi * j / L1;
      cplx g = (*this)(q0, q1);
      if (g != 0.0) acc += std::exp(kI * (q0 * x0 + q1 * x1)) * g;
    }
  }
  return acc / (beta * L1);
}

std::vector<int> side_rows(const CylinderLattice& lat, int omega) {
  std::vector<int> r;
  const int half = lat.L2 / 2;
  for (int x2 = 0; x2 < lat.L2; ++x2)
    if ((omega > 0) == (x2 < half))
      for (int s = 0; s < lat.S; ++s) r.push_back(x2 * lat.S + s);
  return r;
}

namespace {

// Edge rows (x2 nearest the omega boundary) inside one x1 block.
std::vector<int> edge_rows(const CylinderLattice& lat, int omega, int n_rows) {
  if (n_rows < 1 || n_rows > lat.L2) throw ConfigError("edge row count out of range");
  std::vector<int> r;
  for (int i = 0; i < n_rows; ++i) {
    const int x2 = omega > 0 ? i : lat.L2 - 1 - i;
    for (int s = 0; s < lat.S; ++s) r.push_back(x2 * lat.S + s);
  }
  return r;
}

int nearest_index(double k, int L1) {
  int j = static_cast<int>(std::lround(wrap_2pi(k) / (kTwoPi / L1)));
  return ((j % L1) + L1) % L1;
}

int cyclic_dist(int a, int b, int L) {
  int d = std::abs(a - b) % L;
  return std::min(d, L - d);
}

Mat restrict(const Mat& A, const std::vector<int>& r, const std::vector<int>& c) {
  Mat out(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(i, j) = A(r[i], c[j]);
  return out;
}

}  // namespace

EdgeCorrelator edge_correlator(const Spectrum& sp, double beta, double tau, int omega, int n_rows,
                               int y1) {
  const auto& lat = sp.lattice;
  const auto local = edge_rows(lat, omega, n_rows);
  const int D = lat.block(), L1 = lat.L1, R = static_cast<int>(local.size());
  std::vector<int> rows, cols;
  for (int x1 = 0; x1 < L1; ++x1)
    for (int r : local) rows.push_back(x1 * D + r);
  for (int r : local) cols.push_back(((y1 % L1 + L1) % L1) * D + r);
  Mat S = disordered_two_point(sp, beta, tau, 0.0, rows, cols);
  EdgeCorrelator c;
  c.omega = omega;
  c.tau = tau;
  c.y1 = y1;
  c.blocks.resize(L1);
  for (int x1 = 0; x1 < L1; ++x1) c.blocks[x1] = S.middleRows(x1 * R, R);
  return c;
}

RVec edge_fourier_amplitude(const EdgeCorrelator& c) {
  const int L1 = static_cast<int>(c.blocks.size());
  RVec a(L1);
  for (int j = 0; j < L1; ++j) {
    Mat acc = Mat::Zero(c.blocks[0].rows(), c.blocks[0].cols());
    for (int x1 = 0; x1 < L1; ++x1) {
      long long d = ((static_cast<long long>(j) * (x1 - c.y1)) % L1 + L1) % L1;
      acc += std::exp(-kI * (kTwoPi * double(d) / L1)) * c.blocks[x1];
    }
    a(j) = acc.norm();
  }
  return a;
}

double peak_momentum(const RVec& A) {
  const int L = static_cast<int>(A.size());
  if (L < 3) throw ConfigError("peak search needs at least three momenta");
  Eigen::Index jm;
  const double top = A.maxCoeff(&jm);
  if (!(top > 0)) throw ExtractionAmbiguous("edge spectrum vanishes identically");
  for (int j = 0; j < L; ++j) {
    if (cyclic_dist(j, static_cast<int>(jm), L) <= 1) continue;
    const double l = A((j + L - 1) % L), r = A((j + 1) % L);
    if (A(j) >= l && A(j) >= r && A(j) > 0.5 * top)
      throw ExtractionAmbiguous("secondary peak at grid index " + std::to_string(j) + " reaches " +
                                std::to_string(A(j) / top) + " of the main peak");
  }
  const double l = A((jm + L - 1) % L), r = A((jm + 1) % L);
  const double curv = l - 2 * top + r;
  double off = curv < 0 ? 0.5 * (l - r) / curv : 0.0;
  off = std::clamp(off, -0.5, 0.5);
  return wrap_2pi(kTwoPi / L * (double(jm) + off));
}

double extract_kF(const EdgeCorrelator& c) { return peak_momentum(edge_fourier_amplitude(c)); }

double extract_kF(const std::vector<cplx>& s) {
  const int L = static_cast<int>(s.size());
  RVec A(L);
  for (int j = 0; j < L; ++j) {
    cplx acc = 0;
    for (int x = 0; x < L; ++x)
      acc += std::exp(-kI * (kTwoPi * double((static_cast<long long>(j) * x) % L) / L)) * s[x];
    A(j) = std::abs(acc);
  }
  return peak_momentum(A);
}

SatelliteRatios satellite_ratios(const EdgeCorrelator& c, double kF, long long m_alpha) {
  RVec A = edge_fourier_amplitude(c);
  const long long L = A.size();
  SatelliteRatios out;
  out.kF = kF;
  out.kF_index = nearest_index(kF, static_cast<int>(L));
  out.main = A(out.kF_index);
  out.plus = A(((out.kF_index + m_alpha) % L + L) % L) / out.main;
  out.minus = A(((out.kF_index - m_alpha) % L + L) % L) / out.main;
  return out;
}

ScalingLimitFit fit_velocities_and_Z(const MomentumTwoPoint& S2, double kF_lambda, int omega,
                                     const FitOptions& opt) {
  FitOptions o = opt;
  o.n_keep = std::min(opt.n_keep, S2.n_keep());
  return fit_velocities_and_Z([&](int i, int j, int n) { return S2.block(i, j, n); },
                              S2.spectrum().lattice, S2.grid(), S2.m_alpha(), kF_lambda, omega, o);
}

ScalingLimitFit fit_velocities_and_Z(const BlockSource& S2, const CylinderLattice& lat,
                                     const MatsubaraGrid& grid, long long m_alpha,
                                     double kF_lambda, int omega, const FitOptions& opt) {
  const int L1 = lat.L1;
  const double dk = kTwoPi / L1;
  if (opt.stencil < 1 || 2 * opt.stencil + 1 > L1) throw ConfigError("scaling.stencil out of range");
  if (opt.shells < 1 || opt.shells > grid.n_freq) throw ConfigError("scaling.shells out of range");
  const int n_keep = opt.n_keep;
  const auto R = side_rows(lat, omega);
  const int j0 = nearest_index(kF_lambda, L1);
  // q1 of the grid point j0 relative to kF_lambda, on the unwrapped line
  const double q1_0 = std::remainder(kTwoPi * j0 / L1 - kF_lambda, kTwoPi);

  ScalingLimitFit fit;
  fit.omega = omega;
  fit.kF_index = j0;
  fit.alpha = kTwoPi * double(m_alpha) / L1;

  // rows: Re part (b q1 + c + d q1^2), Im part (a q0); unknowns (a, b, c, d).
  // d is a curvature nuisance term; it keeps b the slope at q1 = 0 when the stencil is
  // off-centre.
  std::vector<Eigen::Vector4d> rows;
  std::vector<double> rhs, wts;
  Vec u0;  // dominant direction at j0
  for (int d = -opt.stencil; d <= opt.stencil; ++d) {
    const int j = ((j0 + d) % L1 + L1) % L1;
    const double q1 = q1_0 + d * dk;
    Vec u;
    for (int s = 0; s < opt.shells; ++s)
      for (int sg : {+1, -1}) {
        const double q0 = sg * kPi / grid.beta * (2 * s + 1);
        Mat B = restrict(S2(grid.index(q0), j, 0), R, R);
        if (s == 0 && sg > 0) {
          // Dominant mode of S(pi/beta) - S(-pi/beta) = S - S^dagger, reused for all shells.
          // Spectrally distant states are nearly frequency-even and drop out.
          Mat odd = B - B.adjoint();
          Eigen::JacobiSVD<Mat> svd(odd, Eigen::ComputeThinU);
          const auto& sv = svd.singularValues();
          const double ratio = sv.size() > 1 ? sv(1) / sv(0) : 0.0;
          fit.rank_ratio = std::max(fit.rank_ratio, ratio);
          if (ratio > opt.rank_ratio)
            throw ExtractionAmbiguous("rank-1 dominance fails at k1 index " + std::to_string(j) +
                                      ": sigma2/sigma1 = " + std::to_string(ratio));
          u = svd.matrixU().col(0);
        }
        const cplx x = 1.0 / cplx(u.dot(B * u));  // u^dagger B u
        const double w = q0 * q0 + q1 * q1;
        rows.push_back({0.0, q1, 1.0, q1 * q1});
        rhs.push_back(x.real());
        wts.push_back(w);
        rows.push_back({q0, 0.0, 0.0, 0.0});
        rhs.push_back(x.imag());
        wts.push_back(w);
      }
    if (d == 0) u0 = u;
  }
  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(nr, 4);
  RVec y(nr), sw(nr);
  for (Eigen::Index i = 0; i < nr; ++i) {
    sw(i) = std::sqrt(wts[i]);
    X.row(i) = sw(i) * rows[i].transpose();
    y(i) = sw(i) * rhs[i];
  }
  Eigen::Vector4d abc = X.colPivHouseholderQr().solve(y);
  fit.fit_residual = (X * abc - y).norm() / y.norm();
  if (abc(1) == 0.0) throw ExtractionAmbiguous("inverse propagator has no q1 slope");
  fit.kF_lambda = wrap_2pi(kF_lambda - abc(2) / abc(1));

  // Zn / |Z0| from the shift-n channel at j0, averaged over +-pi/beta
  std::map<int, Eigen::RowVectorXcd> zrow;
  double spread = 0;
  for (int n = -n_keep; n <= n_keep; ++n) {
    if (n == 0) continue;
    Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Zero(R.size());
    std::vector<Eigen::RowVectorXcd> est;
    for (int sg : {+1, -1}) {
      const int i0 = grid.index(sg * kPi / grid.beta);
      Mat B0 = restrict(S2(i0, j0, 0), R, R);
      Mat Bn = restrict(S2(i0, j0, n), R, R);
      est.push_back((u0.adjoint() * Bn) / cplx(u0.dot(B0 * u0)));
      acc += est.back();
    }
    acc /= double(est.size());
    if (acc.norm() > 0) spread = std::max(spread, (est[0] - est[1]).norm() / acc.norm());
    zrow[n] = acc;
  }
  fit.z_spread = spread;
  double total = 1.0;
  for (const auto& [n, z] : zrow) total += z.squaredNorm();
  const double z0abs = 1.0 / std::sqrt(total);
  const int D = lat.block();
  auto embed = [&](const Vec& v) {
    Vec full = Vec::Zero(D);
    for (std::size_t i = 0; i < R.size(); ++i) full(R[i]) = v(i);
    return full;
  };
  fit.Z[0] = embed(z0abs * u0);
  for (const auto& [n, z] : zrow) fit.Z[n] = embed(z0abs * z.adjoint());
  fit.v0 = abc(0) * z0abs * z0abs;
  fit.v1 = abc(1) * z0abs * z0abs;
  return fit;
}

DressedVertices dressed_vertices(const ScalingLimitFit& fit, const HoppingModel& m, int keep_modes) {
  DressedVertices out;
  const double k = kTwoPi * fit.kF_index / m.lattice.L1;
  for (const auto& [n, z] : fit.Z) {
    if (keep_modes >= 0 && std::abs(n) > keep_modes) continue;
    out.zeta0 += z.squaredNorm();
    out.zeta1 += z.dot(bloch_derivative(m, k + n * fit.alpha) * z);
  }
  return out;
}

RemainderFit remainder_decay(const Spectrum& sp, double beta, const ScalingLimitFit& fit,
                             const CutoffFunction& chi, double tau, int x_min) {
  const auto& lat = sp.lattice;
  const int L1 = lat.L1, D = lat.block();
  const auto R = side_rows(lat, fit.omega);
  const int x_max = L1 / 4;
  if (x_min < 1 || x_max <= x_min + 2) throw ConfigError("remainder window too small");
  std::vector<int> rows, cols;
  for (int x1 = x_min; x1 <= x_max; ++x1)
    for (int r : R) rows.push_back(x1 * D + r);
  for (int r : R) cols.push_back(r);
  Mat S = disordered_two_point(sp, beta, tau, 0.0, rows, cols);
  RelativisticPropagator g{fit.v0, fit.v1, chi};
  const double kF = kTwoPi * fit.kF_index / L1;
  Vec right = Vec::Zero(R.size());
  for (const auto& [n, z] : fit.Z)
    for (std::size_t i = 0; i < R.size(); ++i) right(i) += z(R[i]);
  std::vector<double> lx, ls, lr;
  const int nr = static_cast<int>(R.size());
  for (int x1 = x_min; x1 <= x_max; ++x1) {
    Vec left = Vec::Zero(nr);
    for (const auto& [n, z] : fit.Z)
      for (int i = 0; i < nr; ++i) left(i) += std::exp(kI * (n * fit.alpha * x1)) * z(R[i]);
    Mat sing = std::exp(kI * (kF * x1)) * g.spacetime(tau, x1, beta, L1) * left * right.adjoint();
    Mat block = S.middleRows((x1 - x_min) * nr, nr);
    lx.push_back(std::log(1.0 + x1));
    ls.push_back(std::log(sing.norm()));
    lr.push_back(std::log((block - sing).norm()));
  }
  RemainderFit out;
  out.singular_slope = fit_line(lx, ls).slope;
  LineFit rf = fit_line(lx, lr);
  out.remainder_slope = rf.slope;
  out.r2 = rf.r2;
  return out;
}

}  // namespace edgeflow
