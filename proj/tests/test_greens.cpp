#include <cmath>
#include <random>

#include "doctest.h"
#include "edgeflow/greens.hpp"

using namespace edgeflow;

namespace {

std::vector<int> all_indices(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

QuasiPeriodicPotential no_disorder(const CylinderLattice& lat) {
  auto f = best_frequency(golden_mean(), lat.L1, 2.0);
  return default_potential(f, lat, 0.0, 0, 1.0, 0.5);
}

}  // namespace

TEST_CASE("Matsubara grid") {
  MatsubaraGrid g{10.0, 4};
  CHECK(g.size() == 8);
  for (int i = 0; i < g.size(); ++i) {
    CHECK(g.k0(i) == doctest::Approx(-g.k0(g.size() - 1 - i)));
    CHECK(g.k0(i) != 0.0);
    CHECK(g.index(g.k0(i)) == i);
  }
  CHECK_THROWS(g.index(0.0));
  CHECK_THROWS(g.index(kPi / 10 * 21));
}

TEST_CASE("cutoff function plateaus and symmetry") {
  CutoffFunction chi{0.4, 2.0};
  CHECK(chi(0.0) == 1.0);
  CHECK(chi(0.2) == 1.0);
  CHECK(chi(-0.19) == 1.0);
  CHECK(chi(0.4) == 0.0);
  CHECK(chi(1.0) == 0.0);
  for (double x = 0; x < 0.5; x += 0.013) {
    CHECK(chi(x) == chi(-x));
    CHECK(chi(x) >= 0.0);
    CHECK(chi(x) <= 1.0);
  }
  // flat at both junctions: difference quotients vanish faster than any power
  CHECK(std::abs(chi(0.2 + 1e-3) - 1.0) < 1e-12);
  CHECK(chi(0.4 - 1e-3) < 1e-12);
}

TEST_CASE("free covariance examples") {
  auto m = build_qwz_model(-1.0, CylinderLattice(13, 6, 2), 0.1);
  MatsubaraGrid grid{20.0, 64};
  for (int i : {0, 10, 63, 64, 100}) {
    double k0 = grid.k0(i);
    double k1 = m.lattice.momentum(3);
    Mat G = free_covariance(m, grid, k0, k1);
    // direct inverse oracle
    Mat A = (kI * k0 - m.mu) * Mat::Identity(12, 12) + bloch_transform(m, k1);
    CHECK((G - A.inverse()).norm() < 1e-12);
    CHECK(G.operatorNorm() <= 1.0 / std::abs(k0) + 1e-12);
    Mat Gm = free_covariance(m, grid, -k0, k1);
    CHECK((Gm - G.adjoint()).norm() < 1e-12);
  }
  // diagonal model: scalar resolvent on each eigenvector
  CylinderLattice lat(3, 3, 1);
  Mat T0 = Mat::Zero(3, 3);
  T0.diagonal() << 0.5, -0.2, 1.0;
  auto d = make_model(lat, T0, Mat::Zero(3, 3), Mat::Zero(3, 3), 0.0);
  Mat G = free_covariance(d, grid, grid.k0(70), 0.0);
  CHECK(std::abs(G(0, 0) - 1.0 / (kI * grid.k0(70) + 0.5)) < 1e-14);
}

TEST_CASE("edge/bulk split") {
  auto m = build_qwz_model(-1.0, CylinderLattice(89, 24, 2));
  auto modes = edge_spectrum(m, 0.0, 0.4);
  CutoffFunction chi{0.4, 2.0};
  MatsubaraGrid grid{48.0, 256};
  double k1 = m.lattice.momentum(1);
  for (int i : {256, 255, 260, 300}) {
    double k0 = grid.k0(i);
    Mat G = free_covariance(m, grid, k0, k1);
    auto s = edge_bulk_split(m, G, chi, modes, k0, k1);
    CHECK((s.edge + s.bulk - G).norm() < 1e-12);
    if (std::abs(k0) > 0.4) CHECK(s.edge.norm() == 0.0);
  }
  // far from the window: no edge part
  double kfar = m.lattice.momentum(44);
  Mat G = free_covariance(m, grid, grid.k0(256), kfar);
  CHECK(edge_bulk_split(m, G, chi, modes, grid.k0(256), kfar).edge.norm() == 0.0);
  // mismatched model
  auto other = build_qwz_model(-1.3, CylinderLattice(89, 24, 2));
  CHECK_THROWS(edge_bulk_split(other, G, chi, modes, grid.k0(256), k1));
}

TEST_CASE("Combes-Thomas decay of the bulk propagator") {
  auto m = build_qwz_model(-1.0, CylinderLattice(89, 24, 2));
  auto modes = edge_spectrum(m, 0.0, 0.4);
  CutoffFunction chi{0.4, 2.0};
  MatsubaraGrid grid{48.0, 256};
  std::vector<double> ks;
  for (int j = 0; j < 89; ++j) ks.push_back(m.lattice.momentum(j));
  auto ct = combes_thomas_fit(m, chi, grid, modes, ks);
  CHECK(ct.c > 0);
  CHECK(ct.r2 > 0.99);
  CHECK(std::isfinite(ct.envelope));
  CHECK(ct.envelope < 10.0);
  // pure edge input: nothing to fit
  std::vector<Mat> zero(3, Mat::Zero(48, 48));
  CHECK_THROWS_AS(decay_fit(zero, 2, 12), NumericalFailure);
}

TEST_CASE("two-point function: antiperiodicity, equal time, stability") {
  CylinderLattice lat(8, 6, 2);
  auto m = build_qwz_model(-1.0, lat, 0.05);
  auto f = best_frequency(golden_mean(), 8, 2.0);
  auto pot = default_potential(f, lat, 0.07, 3, 1.0, 0.5);
  Spectrum sp = diagonalize(m, pot);
  const double beta = 8.0;
  auto idx = all_indices(lat.dim());
  Mat a = disordered_two_point(sp, beta, 1.0, 3.0, idx, idx);  // tau = -2
  Mat b = disordered_two_point(sp, beta, 7.0, 1.0, idx, idx);  // tau = 6
  CHECK((a + b).norm() < 1e-12);

  Mat eq = disordered_two_point(sp, beta, 2.0, 2.0, idx, idx);
  for (int x = 0; x < lat.dim(); x += 7) {
    double dens = 0;
    for (int j = 0; j < lat.dim(); ++j)
      dens += fermi(beta, sp.energy(j) - sp.mu) * std::norm(sp.U(x, j));
    CHECK(eq(x, x).real() == doctest::Approx(-dens).epsilon(1e-12));
  }
  CHECK_THROWS(disordered_two_point(sp, beta, 8.0, 0.0, idx, idx));

  for (double bt : {1.0, 64.0, 1024.0})
    for (double xi : {-10.0, -1e-3, 0.0, 2.5, 10.0})
      for (double tau : {-bt + 1e-9, -0.3 * bt, 0.0, 0.5 * bt, bt - 1e-9}) {
        double w = time_weight(bt, xi, tau);
        CHECK(std::isfinite(w));
        CHECK(std::isfinite(fermi(bt, xi)));
      }
}

TEST_CASE("spacetime two-point equals the Matsubara sum of the free covariance") {
  CylinderLattice lat(8, 6, 2);
  auto m = build_qwz_model(-1.0, lat, 0.05);
  Spectrum sp = diagonalize(m, no_disorder(lat));
  MatsubaraGrid grid{8.0, 2048};
  const int D = lat.block();
  std::vector<int> rows, cols;
  for (int d = 0; d < D; ++d) rows.push_back(lat.index(3, 0, 0) + d);
  for (double tau : {0.7, 4.0, -2.5}) {
    for (int dx1 : {0, 1, 3}) {
      cols.clear();
      for (int d = 0; d < D; ++d) cols.push_back(lat.index(3 - dx1, 0, 0) + d);
      double x0 = tau > 0 ? tau : 0.0, y0 = tau > 0 ? 0.0 : -tau;
      Mat exact = disordered_two_point(sp, grid.beta, x0, y0, rows, cols);
      Mat ms = matsubara_time_sum(m, grid, tau, dx1);
      CHECK((exact - ms).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("tail moments: sum of 1/(i k0)^m reproduced by a long direct sum") {
  const double beta = 3.0, tau = 1.1;
  for (int m = 2; m <= 4; ++m) {
    cplx acc = 0;
    for (int n = -400000; n < 400000; ++n) {
      double k0 = kTwoPi / beta * (n + 0.5);
      acc += std::exp(kI * k0 * tau) / std::pow(kI * k0, m);
    }
    CHECK(std::abs(acc / beta - tail_moment(m, beta, tau)) < 1e-5);
  }
}

TEST_CASE("momentum representation") {
  CylinderLattice lat(13, 5, 2);
  auto m = build_qwz_model(-1.0, lat, 0.0);
  auto f = best_frequency(golden_mean(), 13, 2.0);
  MatsubaraGrid grid{10.0, 64};

  SUBCASE("lambda = 0: only n = 0, equal to the free covariance") {
    auto sp = std::make_shared<const Spectrum>(diagonalize(m, no_disorder(lat)));
    MomentumTwoPoint mt(sp, grid, f.m, 4);
    for (int j : {0, 4, 12}) {
      double k0 = grid.k0(60);
      Mat G = free_covariance(m, grid, k0, lat.momentum(j));
      CHECK((mt.block(60, j, 0) - G).cwiseAbs().maxCoeff() < 1e-10);
      for (int n : {-2, 1, 3}) CHECK(mt.block(60, j, n).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SUBCASE("single mode n = +-1: first-order perturbation theory") {
    const double lam = 0.05;
    QuasiPeriodicPotential pot;
    pot.freq = f;
    pot.lambda = lam;
    pot.modes[1] = Vec::Constant(lat.block(), 0.5);
    pot.modes[-1] = Vec::Constant(lat.block(), 0.5);
    auto sp = std::make_shared<const Spectrum>(diagonalize(m, pot));
    MomentumTwoPoint mt(sp, grid, f.m, 2);
    const int i0 = 64, j = 2;
    const double k0 = grid.k0(i0);
    Mat G0 = free_covariance(m, grid, k0, lat.momentum(j));
    Mat G1 = free_covariance(m, grid, k0, lat.momentum(mt.shift(j, 1)));
    Mat pert = G0 * (-lam * pot.modes[-1].asDiagonal().toDenseMatrix()) * G1;
    Mat exact = mt.block(i0, j, 1);
    double rel = (exact - pert).norm() / pert.norm();
    CHECK(rel < 5 * lam);
    // modes +-1 only: the next n = 1 term has three insertions, so the relative
    // error is O(lambda^2)
    pot.lambda = lam / 2;
    auto sp2 = std::make_shared<const Spectrum>(diagonalize(m, pot));
    MomentumTwoPoint mt2(sp2, grid, f.m, 2);
    double rel2 = (mt2.block(i0, j, 1) - pert / 2).norm() / (pert.norm() / 2);
    CHECK(rel2 / rel == doctest::Approx(0.25).epsilon(0.1));
  }

  SUBCASE("conjugation: S_n(k0, k1)^dagger = S_{-n}(-k0, k1 + n alpha)") {
    auto pot = default_potential(f, lat, 0.05, 4, 1.0, 0.5);
    auto sp = std::make_shared<const Spectrum>(diagonalize(m, pot));
    MomentumTwoPoint mt(sp, grid, f.m, 4);
    for (int n : {-3, 0, 2}) {
      int j = 5, i0 = 70;
      Mat lhs = mt.block(i0, j, n).adjoint();
      Mat rhs = mt.block(grid.size() - 1 - i0, mt.shift(j, n), -n);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SUBCASE("resummed mixed representation equals the spacetime two-point") {
    auto pot = default_potential(f, lat, 0.05, 4, 1.0, 0.5);
    auto sp = std::make_shared<const Spectrum>(diagonalize(m, pot));
    MatsubaraGrid g2{4.0, 1024};
    MomentumTwoPoint mt(sp, g2, f.m, 13);
    const int D = lat.block(), L1 = lat.L1;
    const double tau = 1.3;
    const int x1 = 4, y1 = 1;
    std::vector<int> rows, cols;
    for (int d = 0; d < D; ++d) {
      rows.push_back(lat.index(x1, 0, 0) + d);
      cols.push_back(lat.index(y1, 0, 0) + d);
    }
    Mat exact = disordered_two_point(*sp, g2.beta, tau, 0.0, rows, cols);
    const Eigen::Index N = lat.dim();
    Mat acc = Mat::Zero(D, D);
    for (int j = 0; j < L1; ++j)
      for (int n = 0; n < L1; ++n) {
        int j2 = mt.shift(j, n);
        // frequency sum per eigenvalue with fourth-order tail correction
        Vec w(N);
        for (Eigen::Index a = 0; a < N; ++a) {
          double xi = sp->energy(a) - sp->mu;
          cplx s = 0;
          for (int i = 0; i < g2.size(); ++i) {
            cplx z = kI * g2.k0(i);
            cplx asym = 1.0 / z - xi / (z * z) + xi * xi / (z * z * z) - xi * xi * xi / (z * z * z * z);
            s += std::exp(z * tau) * (1.0 / (z + xi) - asym);
          }
          s /= g2.beta;
          s += tail_moment(1, g2.beta, tau) - xi * tail_moment(2, g2.beta, tau) +
               xi * xi * tail_moment(3, g2.beta, tau) - xi * xi * xi * tail_moment(4, g2.beta, tau);
          w(a) = s;
        }
        Mat blk = mt.weighted(w, j, j2);
        acc += std::exp(kI * (lat.momentum(j) * x1 - lat.momentum(j2) * y1)) * blk / double(L1);
      }
    CHECK((acc - exact).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("memory budget is enforced with a size estimate") {
  CylinderLattice lat(13, 5, 2);
  auto m = build_qwz_model(-1.0, lat, 0.0);
  auto sp = std::make_shared<const Spectrum>(diagonalize(m, no_disorder(lat)));
  CHECK_THROWS_AS(MomentumTwoPoint(sp, MatsubaraGrid{10.0, 8}, 8, 2, 1e-9), NumericalFailure);
}

TEST_CASE("eigendecomposition cache round trip") {
  auto dir = std::filesystem::temp_directory_path() / "edgeflow-test-cache";
  std::filesystem::remove_all(dir);
  CylinderLattice lat(8, 4, 2);
  auto m = build_qwz_model(-1.0, lat, 0.0);
  auto f = best_frequency(golden_mean(), 8, 2.0);
  auto pot = default_potential(f, lat, 0.05, 2, 1.0, 0.5);
  bool hit = true;
  auto a = cached_spectrum(m, pot, dir, &hit);
  CHECK_FALSE(hit);
  auto b = cached_spectrum(m, pot, dir, &hit);
  CHECK(hit);
  CHECK(a->energy == b->energy);
  CHECK(a->U == b->U);
  pot.lambda = 0.06;
  CHECK(spectrum_hash(m, pot) != spectrum_hash(m, default_potential(f, lat, 0.05, 2, 1.0, 0.5)));
  std::filesystem::remove_all(dir);
}
