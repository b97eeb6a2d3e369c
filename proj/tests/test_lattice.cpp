#include <algorithm>
#include <random>

#include "doctest.h"
#include "edgeflow/lattice.hpp"

using namespace edgeflow;

namespace {

// Random Hermitian-consistent model with bandwidth 1 in x2.
HoppingModel random_model(int L1, int L2, int S, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  CylinderLattice lat(L1, L2, S);
  const int D = lat.block();
  auto band = [&](bool herm) {
    Mat T = Mat::Zero(D, D);
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b)
        if (std::abs(a / S - b / S) <= 1) T(a, b) = cplx(g(rng), g(rng));
    if (herm) T = 0.5 * (T + T.adjoint()).eval();
    return T;
  };
  Mat T0 = band(true), Tp = band(false);
  return make_model(lat, T0, Tp, Tp.adjoint(), 0.1);
}

}  // namespace

TEST_CASE("qwz bulk Bloch matrix at k = 0 has eigenvalues +-1 for u = -1") {
  // (u + cos k1 + cos k2) s3 at k = 0 is (u + 2) s3.
  Eigen::Matrix2cd h;
  const double u = -1;
  h << u + 2, 0, 0, -(u + 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h);
  CHECK(es.eigenvalues()(0) == doctest::Approx(-1.0));
  CHECK(es.eigenvalues()(1) == doctest::Approx(1.0));

  // Same numbers from the discretized model: a 1-row-periodic strip closed in x2
  // by summing the x2 hoppings reproduces the bulk matrix at k2 = 0.
  auto m = build_qwz_model(u, CylinderLattice(3, 3, 2));
  Mat hk = bloch_transform(m, 0.0);
  Eigen::Matrix2cd bulk = hk.block<2, 2>(2, 2) + hk.block<2, 2>(2, 0) + hk.block<2, 2>(0, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es2(bulk);
  CHECK(es2.eigenvalues()(0) == doctest::Approx(-1.0));
  CHECK(es2.eigenvalues()(1) == doctest::Approx(1.0));
}

TEST_CASE("qwz rejects gapless or mis-sized input") {
  CHECK_THROWS_AS(build_qwz_model(0.0, CylinderLattice(5, 5, 2)), ConfigError);
  CHECK_THROWS_AS(build_qwz_model(2.0, CylinderLattice(5, 5, 2)), ConfigError);
  CHECK_THROWS_AS(build_qwz_model(-2.0, CylinderLattice(5, 5, 2)), ConfigError);
  CHECK_THROWS_AS(build_qwz_model(-1.0, CylinderLattice(5, 5, 1)), ConfigError);
  CHECK_THROWS(CylinderLattice(2, 5, 1));
}

TEST_CASE("hopping invariants") {
  auto m = build_qwz_model(-1.0, CylinderLattice(7, 6, 2));
  CHECK((m.Tp - m.Tm.adjoint()).norm() == doctest::Approx(0.0));
  CHECK((m.T0 - m.T0.adjoint()).norm() == doctest::Approx(0.0));
  // no x2 wrap-around
  CHECK(m.T0.block(0, 10, 2, 2).norm() == 0.0);
  CHECK(m.T0.block(10, 0, 2, 2).norm() == 0.0);
  Mat bad = m.T0;
  bad(0, 11) = 1.0;
  bad(11, 0) = 1.0;
  CHECK_THROWS(make_model(m.lattice, bad, m.Tp, m.Tm, 0.0));
}

TEST_CASE("bloch transform conventions") {
  auto m = build_qwz_model(-1.0, CylinderLattice(8, 5, 2));
  CHECK((bloch_transform(m, 0.0) - (m.Tm + m.T0 + m.Tp)).norm() < 1e-14);
  for (int j = 0; j < 8; ++j) {
    Mat h = bloch_transform(m, m.lattice.momentum(j));
    CHECK((h - h.adjoint()).norm() < 1e-13);
  }
  CHECK_THROWS(bloch_transform(m, 0.1));
}

TEST_CASE("bloch transform equals DFT of real-space rows (random 5x5 model)") {
  auto m = random_model(5, 5, 1, 11);
  Mat H = full_hamiltonian(m);
  const int D = m.lattice.block();
  for (int j = 0; j < 5; ++j) {
    double k = m.lattice.momentum(j);
    Mat ref = Mat::Zero(D, D);
    for (int x1 = 0; x1 < 5; ++x1)
      ref += std::exp(-kI * (k * x1)) * H.block(x1 * D, 0, D, D);
    CHECK((ref - bloch_transform(m, k)).norm() < 1e-12);
  }
}

TEST_CASE("full spectrum is the union of Bloch spectra") {
  for (unsigned seed : {1u, 2u, 3u}) {
    auto m = random_model(6, 4, 2, seed);
    Mat H = full_hamiltonian(m);
    CHECK((H - H.adjoint()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    std::vector<double> all;
    for (int j = 0; j < 6; ++j) {
      Eigen::SelfAdjointEigenSolver<Mat> ek(bloch_transform(m, m.lattice.momentum(j)));
      for (int i = 0; i < ek.eigenvalues().size(); ++i) all.push_back(ek.eigenvalues()(i));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(std::abs(all[i] - es.eigenvalues()(i)) < 1e-10);
    // sparse assembly agrees with dense
    CHECK((Mat(full_hamiltonian_sparse(m)) - H).norm() < 1e-14);
  }
}

TEST_CASE("edge spectrum of QWZ u = -1 on 89 x 24") {
  auto m = build_qwz_model(-1.0, CylinderLattice(89, 24, 2));
  auto modes = edge_spectrum(m, 0.0, 0.4);
  REQUIRE(modes.size() == 2);
  CHECK(modes[0].omega == +1);
  CHECK(modes[1].omega == -1);
  CHECK(modes[0].v * modes[1].v < 0);
  CHECK(modes[0].v < 0);  // E_+ = -sin k1 for this discretization

  // Oracle: count all eigenvalues in the window over the grid.
  std::size_t count = 0;
  for (int j = 0; j < 89; ++j) {
    Eigen::SelfAdjointEigenSolver<Mat> es(bloch_transform(m, m.lattice.momentum(j)));
    for (int i = 0; i < es.eigenvalues().size(); ++i)
      if (std::abs(es.eigenvalues()(i)) < 0.4) ++count;
  }
  CHECK(count == modes[0].energy.size() + modes[1].energy.size());

  for (const auto& md : modes) {
    CHECK(md.kF >= 0.0);
    CHECK(md.kF < kTwoPi);
    CHECK(std::abs(md.v) > 0);
    CHECK(md.decay_rate > 0);
    for (std::size_t i = 0; i < md.xi.size(); ++i) {
      CHECK(md.xi[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(md.loc_weight[i] > 0.9);
    }
  }
  // weight of xi+ on the lower half at kF
  const auto& p = modes[0];
  auto it = std::find(p.k_index.begin(), p.k_index.end(), p.kF_index);
  REQUIRE(it != p.k_index.end());
  CHECK(p.loc_weight[it - p.k_index.begin()] > 0.99);
}

TEST_CASE("edge spectrum is independent of the sweep policy") {
  auto m = build_qwz_model(-1.0, CylinderLattice(34, 12, 2));
  auto a = edge_spectrum(m, 0.0, 0.4, {}, Exec::serial);
  auto b = edge_spectrum(m, 0.0, 0.4, {}, Exec::parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].energy == b[i].energy);
    CHECK(a[i].kF == b[i].kF);
  }
}

TEST_CASE("mirror x2 swaps the chiralities") {
  auto m = build_qwz_model(-1.3, CylinderLattice(55, 16, 2));
  auto a = edge_spectrum(m, 0.0, 0.4);
  auto b = edge_spectrum(mirror_x2(m), 0.0, 0.4);
  REQUIRE(a[0].energy.size() == b[1].energy.size());
  for (std::size_t i = 0; i < a[0].energy.size(); ++i)
    CHECK(std::abs(a[0].energy[i] - b[1].energy[i]) < 1e-8);
  CHECK(a[0].v == doctest::Approx(b[1].v));
  CHECK(a[1].v == doctest::Approx(b[0].v));
}

TEST_CASE("edge wavefunction decays exponentially at kF") {
  // u = -1.5: geometric decay with ratio |u + 1| per row at k1 = 0.
  auto m = build_qwz_model(-1.5, CylinderLattice(89, 24, 2));
  auto modes = edge_spectrum(m, 0.0, 0.4);
  const auto& p = modes[0];
  auto it = std::find(p.k_index.begin(), p.k_index.end(), p.kF_index);
  REQUIRE(it != p.k_index.end());
  const Vec& xi = p.xi[it - p.k_index.begin()];
  std::vector<double> xs, ys;
  for (int x = 0; x < 12; ++x) {
    xs.push_back(x);
    ys.push_back(std::log(xi.segment(2 * x, 2).squaredNorm()));
  }
  LineFit f = fit_line(xs, ys);
  CHECK(f.slope < 0);
  CHECK(f.r2 > 0.98);
  CHECK(f.slope == doctest::Approx(2 * std::log(0.5)).epsilon(1e-3));
}

TEST_CASE("window with extra branches or none is an assumption violation") {
  auto m = build_qwz_model(-1.0, CylinderLattice(34, 12, 2));
  CHECK_THROWS_AS(edge_spectrum(m, 0.0, 3.0), AssumptionViolation);
  CHECK_THROWS_AS(edge_spectrum(m, 5.0, 0.4), AssumptionViolation);
}

TEST_CASE("fermi point on a linear synthetic band") {
  EdgeModeData d;
  const double h = kTwoPi / 50, v = -0.7, k0 = 0.31;
  for (int j = 0; j < 9; ++j) {
    d.k1.push_back(h * j);
    d.energy.push_back(v * (h * j - k0));
  }
  FermiPoint fp = fermi_point(d, 0.0);
  CHECK(fp.kF == doctest::Approx(k0).epsilon(1e-12));
  CHECK(fp.v == doctest::Approx(v).epsilon(1e-12));
  CHECK(fp.kF_index == 2);
  CHECK_THROWS_AS(fermi_point(d, 10.0), AssumptionViolation);
}

TEST_CASE("five-point stencil is exact on quartic data") {
  std::vector<double> e;
  const double h = 0.1;
  for (int i = 0; i < 7; ++i) {
    double x = h * i;
    e.push_back(x * x * x * x - 2 * x);
  }
  double x = 0.3;
  CHECK(stencil_derivative(e, 3, h) == doctest::Approx(4 * x * x * x - 2).epsilon(1e-10));
}
