#include <cmath>

#include "edgeflow/greens.hpp"

namespace edgeflow {

double tail_moment(int m, double beta, double tau) {
  const double x = tau / beta;
  double e = 0;
  switch (m) {
    case 1: e = 1.0; break;
    case 2: e = x - 0.5; break;
    case 3: e = x * x - x; break;
    case 4: e = x * x * x - 1.5 * x * x + 0.25; break;
    default: throw Error("tail_moment: order must be 1..4");
  }
  double fact = 1;
  for (int i = 2; i < m; ++i) fact *= i;
  return 0.5 * e * std::pow(beta, m - 1) / fact;
}

Mat matsubara_time_sum(const HoppingModel& m, const MatsubaraGrid& grid, double tau, int dx1) {
  double sign = 1;
  if (tau < 0) {
    tau += grid.beta;
    sign = -1;
  }
  if (!(tau > 0 && tau < grid.beta)) throw Error("matsubara_time_sum needs 0 < |tau| < beta");
  const auto& lat = m.lattice;
  const int D = lat.block();
  Mat out = Mat::Zero(D, D);
  for (int j = 0; j < lat.L1; ++j) {
    const double k1 = lat.momentum(j);
    Eigen::SelfAdjointEigenSolver<Mat> es(bloch_transform(m, k1));
    Vec s(D);
    for (int a = 0; a < D; ++a) {
      const double xi = es.eigenvalues()(a) - m.mu;
      cplx acc = 0;
      for (int i = 0; i < grid.size(); ++i) {
        const double k0 = grid.k0(i);
        const cplx z = kI * k0;
        cplx asym = 0, zp = z, c = 1;
        for (int p = 1; p <= 4; ++p) {
          asym += c / zp;
          zp *= z;
          c *= -xi;
        }
        acc += std::exp(kI * k0 * tau) * (1.0 / (z + xi) - asym);
      }
      acc /= grid.beta;
      double c = 1;
      for (int p = 1; p <= 4; ++p) {
        acc += c * tail_moment(p, grid.beta, tau);
        c *= -xi;
      }
      s(a) = acc;
    }
    out += (std::exp(kI * (k1 * dx1)) / double(lat.L1)) * (es.eigenvectors() * s.asDiagonal() *
                                                           es.eigenvectors().adjoint());
  }
  return sign * out;
}

namespace {

Vec resolvent_weights(const Spectrum& sp, cplx z) {
  Vec w(sp.energy.size());
  for (Eigen::Index a = 0; a < w.size(); ++a) w(a) = 1.0 / (z + sp.energy(a) - sp.mu);
  return w;
}

}  // namespace

MomentumTwoPoint::MomentumTwoPoint(std::shared_ptr<const Spectrum> sp, const MatsubaraGrid& grid,
                                   long long m_alpha, int n_keep, double memory_budget_gb)
    : sp_(std::move(sp)), grid_(grid), m_(m_alpha), n_keep_(n_keep) {
  const auto& lat = sp_->lattice;
  const Eigen::Index N = lat.dim(), D = lat.block(), L1 = lat.L1;
  const double gb = 2.0 * double(N) * double(N) * sizeof(cplx) / 1e9;
  if (gb > memory_budget_gb)
    throw NumericalFailure("momentum representation needs about " + std::to_string(gb) +
                           " GB, budget is " + std::to_string(memory_budget_gb) + " GB");
  Mat F(L1, L1);  // F(x1, j) = e^{-i k_j x1}/sqrt(L1)
  for (Eigen::Index x = 0; x < L1; ++x)
    for (Eigen::Index j = 0; j < L1; ++j)
      F(x, j) = std::exp(-kI * (kTwoPi * double((x * j) % L1) / double(L1))) / std::sqrt(double(L1));
  uhat_.resize(N, N);
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < N; ++c) {
    Eigen::Map<const Mat> col(sp_->U.col(c).data(), D, L1);
    Eigen::Map<Mat> dst(uhat_.col(c).data(), D, L1);
    dst.noalias() = col * F;
  }
}

int MomentumTwoPoint::shift(int j, int n) const {
  const long long l1 = sp_->lattice.L1;
  return static_cast<int>(((j + n * m_) % l1 + l1) % l1);
}

Mat MomentumTwoPoint::weighted(const Vec& w, int j1, int j2) const {
  const int D = sp_->lattice.block();
  return uhat_.middleRows(j1 * D, D) * w.asDiagonal() * uhat_.middleRows(j2 * D, D).adjoint();
}

Mat MomentumTwoPoint::block_at(cplx z, int j1, int j2) const {
  return weighted(resolvent_weights(*sp_, z), j1, j2);
}

Mat MomentumTwoPoint::row_strip(cplx z, int j1) const {
  const int D = sp_->lattice.block();
  return (uhat_.middleRows(j1 * D, D) * resolvent_weights(*sp_, z).asDiagonal()) * uhat_.adjoint();
}

Mat MomentumTwoPoint::col_strip(cplx z, int j2) const {
  const int D = sp_->lattice.block();
  return uhat_ * (resolvent_weights(*sp_, z).asDiagonal() * uhat_.middleRows(j2 * D, D).adjoint());
}

Mat MomentumTwoPoint::block(int i0, int j1, int n) const {
  if (std::abs(n) > n_keep_) throw Error("shift n beyond n_keep");
  return block_at(kI * grid_.k0(i0), j1, shift(j1, n));
}

}  // namespace edgeflow
