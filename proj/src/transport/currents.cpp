#include <random>

#include "edgeflow/transport.hpp"

namespace edgeflow {

namespace {

double max_abs(const SpMat& a) {
  double r = 0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

}  // namespace

CurrentOperators::CurrentOperators(const HoppingModel& m) : m_(m) {
  const auto& lat = m_.lattice;
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    RMat w(lat.L1, lat.L2);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    double r = continuity_residual(w);
    if (r > 1e-10)
      throw ConstructionBug("lattice continuity equation violated by the current operators (residual " +
                            std::to_string(r) + ")");
  }
}

Mat CurrentOperators::site_block(int y1, int y2, int x1, int x2) const {
  const auto& lat = m_.lattice;
  const int S = lat.S;
  int d = ((y1 - x1) % lat.L1 + lat.L1) % lat.L1;
  const Mat* T = nullptr;
  if (d == 0) T = &m_.T0;
  else if (d == 1) T = &m_.Tp;
  else if (d == lat.L1 - 1) T = &m_.Tm;
  if (!T) return Mat::Zero(S, S);
  return T->block(y2 * S, x2 * S, S, S);
}

void CurrentOperators::add_bond(std::vector<Eigen::Triplet<cplx>>& t, int y1, int y2, int x1,
                                int x2, double c) const {
  const auto& lat = m_.lattice;
  if (y2 < 0 || y2 >= lat.L2 || x2 < 0 || x2 >= lat.L2 || c == 0.0) return;
  const int S = lat.S;
  const int y = lat.index(y1, y2, 0), x = lat.index(x1, x2, 0);
  if (x == y) return;
  Mat hyx = site_block(y1, y2, x1, x2), hxy = site_block(x1, x2, y1, y2);
  for (int a = 0; a < S; ++a)
    for (int b = 0; b < S; ++b) {
      if (hyx(a, b) != 0.0) t.emplace_back(y + a, x + b, c * kI * hyx(a, b));
      if (hxy(a, b) != 0.0) t.emplace_back(x + a, y + b, -c * kI * hxy(a, b));
    }
}

SpMat CurrentOperators::bond(int y1, int y2, int x1, int x2) const {
  std::vector<Eigen::Triplet<cplx>> t;
  add_bond(t, y1, y2, x1, x2, 1.0);
  SpMat M(m_.lattice.dim(), m_.lattice.dim());
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

SpMat CurrentOperators::smeared(int nu, const RMat& w) const {
  const auto& lat = m_.lattice;
  if (w.rows() != lat.L1 || w.cols() != lat.L2) throw Error("weight field must be L1 x L2");
  if (nu < 0 || nu > 2) throw Error("current component must be 0, 1 or 2");
  std::vector<Eigen::Triplet<cplx>> t;
  if (nu == 0) {
    for (int x1 = 0; x1 < lat.L1; ++x1)
      for (int x2 = 0; x2 < lat.L2; ++x2)
        for (int s = 0; s < lat.S; ++s)
          if (w(x1, x2) != 0.0) t.emplace_back(lat.index(x1, x2, s), lat.index(x1, x2, s), w(x1, x2));
  } else {
    const int e1 = nu == 1, e2 = nu == 2;
    const int f1 = 1 - e1, f2 = 1 - e2;
    for (int x1 = 0; x1 < lat.L1; ++x1)
      for (int x2 = 0; x2 < lat.L2; ++x2) {
        double c = w(x1, x2);
        if (c == 0.0) continue;
        if (!(nu == 1 && ((x1 == drop_x1_ && x2 == drop_x2_) || x2 == drop_row_)))
          add_bond(t, x1, x2, x1 + e1, x2 + e2, c);
        add_bond(t, x1, x2, x1 + e1 + f1, x2 + e2 + f2, 0.5 * c);
        add_bond(t, x1, x2, x1 + e1 - f1, x2 + e2 - f2, 0.5 * c);
        add_bond(t, x1 + f1, x2 + f2, x1 + e1, x2 + e2, 0.5 * c);
        add_bond(t, x1 - f1, x2 - f2, x1 + e1, x2 + e2, 0.5 * c);
      }
  }
  SpMat M(lat.dim(), lat.dim());
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

Mat CurrentOperators::kernel(int nu, double k1, double p1) const {
  const int D = m_.lattice.block();
  if (nu == 0) return Mat::Identity(D, D);
  if (nu == 1) {
    Mat Tm = m_.Tm, Tp = m_.Tp;
    if (drop_row_ >= 0) {
      const int S = m_.lattice.S, r = drop_row_ * S;
      Tm.block(r, r, S, S).setZero();
      Tp.block(r, r, S, S).setZero();
    }
    return kI * std::exp(kI * k1) * Tm - kI * std::exp(-kI * (k1 - p1)) * Tp;
  }
  throw Error("momentum kernel defined for nu = 0, 1 only");
}

double CurrentOperators::continuity_residual(const RMat& w) const {
  const auto& lat = m_.lattice;
  SpMat H = full_hamiltonian_sparse(m_);
  SpMat D = smeared(0, w);
  SpMat lhs = kI * (H * D - D * H);
  RMat g1(lat.L1, lat.L2), g2(lat.L1, lat.L2);
  for (int x1 = 0; x1 < lat.L1; ++x1)
    for (int x2 = 0; x2 < lat.L2; ++x2) {
      g1(x1, x2) = w((x1 + 1) % lat.L1, x2) - w(x1, x2);
      g2(x1, x2) = (x2 + 1 < lat.L2 ? w(x1, x2 + 1) : 0.0) - w(x1, x2);
    }
  SpMat diff = lhs - smeared(1, g1) - smeared(2, g2);
  return max_abs(diff);
}

CurrentOperators CurrentOperators::without_bond(int x1, int x2) const {
  CurrentOperators c = *this;
  c.drop_x1_ = ((x1 % m_.lattice.L1) + m_.lattice.L1) % m_.lattice.L1;
  c.drop_x2_ = x2;
  return c;
}

CurrentOperators CurrentOperators::without_row_bonds(int x2) const {
  CurrentOperators c = *this;
  c.drop_row_ = x2;
  return c;
}

}  // namespace edgeflow
