#include <numeric>
#include <random>

#include "doctest.h"
#include "edgeflow/quasiperiodic.hpp"

using namespace edgeflow;

namespace {

// Best approximations of the second kind by exhaustive search: q is recorded when
// min_p |q x - p| beats every smaller denominator.
std::vector<std::pair<long long, long long>> brute_best(double x, long long qmax) {
  std::vector<std::pair<long long, long long>> out;
  double best = 1e9;
  for (long long q = 1; q <= qmax; ++q) {
    long long p = std::llround(q * x);
    double d = std::abs(q * x - p);
    if (d < best - 1e-15) {
      best = d;
      out.emplace_back(p, q);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("convergents of the golden mean match brute-force best approximants") {
  const double g = (std::sqrt(5.0) - 1) / 2;
  auto cf = convergents(golden_mean(), 100);
  auto bf = brute_best(g, 100);
  // q = 1 appears in both; the continued fraction also starts at 0/1.
  REQUIRE(cf.size() >= bf.size());
  for (auto pq : bf) CHECK(std::find(cf.begin(), cf.end(), pq) != cf.end());
  CHECK(std::find(cf.begin(), cf.end(), std::make_pair(55LL, 89LL)) != cf.end());
  for (auto [p, q] : cf) CHECK(std::gcd(p, q) == 1);
  for (std::size_t i = 1; i < cf.size(); ++i) CHECK(cf[i].second > cf[i - 1].second);
  // best-approximant property
  for (auto [p, q] : cf)
    for (long long qq = 1; qq < q; ++qq) {
      long long pp = std::llround(qq * g);
      CHECK(std::abs(q * g - p) < std::abs(qq * g - pp) + 1e-15);
    }
}

TEST_CASE("rational input terminates") {
  auto cf = convergents(1.0 / 3.0, 1000);
  CHECK(cf.back() == std::make_pair(1LL, 3LL));
  auto cf50 = convergents(Real50(1) / 3, 1000);
  CHECK(cf50.back() == std::make_pair(1LL, 3LL));
  CHECK_THROWS(convergents(0.3, 0));
}

TEST_CASE("extended precision keeps large Fibonacci convergents") {
  auto cf = convergents(golden_mean(), 100000000LL);
  CHECK(cf.back() == std::make_pair(39088169LL, 63245986LL));
}

TEST_CASE("best frequency for L1 = 89") {
  auto f = best_frequency(golden_mean(), 89, 2.0);
  CHECK(f.m == 55);
  CHECK(std::gcd(f.m, 89LL) == 1);
  CHECK(f.alpha == doctest::Approx(kTwoPi * 55 / 89));
  // exhaustive minimum oracle
  double c = 1e9;
  for (int n = 1; n <= 44; ++n) {
    double t = std::fmod(n * f.alpha, kTwoPi);
    c = std::min(c, std::min(t, kTwoPi - t) * n * n);
  }
  CHECK(f.c_est == doctest::Approx(c).epsilon(1e-9));
  CHECK(f.c_est > 0);
  CHECK_THROWS_AS(best_frequency(golden_mean(), 90, 2.0), NotInSequence);
}

TEST_CASE("Diophantine bound holds on random n and is uniform over Fibonacci L1") {
  std::mt19937 rng(5);
  double cmin = 1e9;
  for (int L1 : {13, 21, 34, 55, 89, 144}) {
    auto f = best_frequency(golden_mean(), L1, 2.0);
    cmin = std::min(cmin, f.c_est);
    std::uniform_int_distribution<int> pick(1, L1 / 2);
    for (int t = 0; t < 50; ++t) {
      int n = pick(rng);
      CHECK(torus_dist(n * f.alpha) >= f.c_est / (n * n) * (1 - 1e-12));
    }
  }
  CHECK(cmin > 0.05);
}

TEST_CASE("build_potential examples") {
  CylinderLattice lat(13, 4, 2);
  auto f = best_frequency(golden_mean(), 13, 2.0);
  QuasiPeriodicPotential p;
  p.freq = f;
  p.lambda = 1;
  p.modes[0] = Vec::Ones(lat.block());
  RVec phi = build_potential(p, lat);
  CHECK((phi.array() - 1.0).abs().maxCoeff() < 1e-15);

  p.modes[0] = Vec::Zero(lat.block());
  p.modes[1] = Vec::Constant(lat.block(), 0.5);
  p.modes[-1] = Vec::Constant(lat.block(), 0.5);
  phi = build_potential(p, lat);
  for (int x1 = 0; x1 < 13; ++x1)
    CHECK(phi(lat.index(x1, 2, 1)) == doctest::Approx(std::cos(f.alpha * x1)));

  p.modes[-1] = Vec::Constant(lat.block(), cplx(0.5, 0.1));
  CHECK_THROWS(build_potential(p, lat));
}

TEST_CASE("random admissible modes: real field that Fourier-inverts to the modes") {
  CylinderLattice lat(89, 3, 1);
  auto f = best_frequency(golden_mean(), 89, 2.0);
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  QuasiPeriodicPotential p;
  p.freq = f;
  p.C = 3.0;
  p.c = 0.5;
  for (int n = 0; n <= 6; ++n) {
    Vec v(lat.block());
    for (int i = 0; i < v.size(); ++i)
      v(i) = n == 0 ? cplx(g(rng), 0) : cplx(g(rng), g(rng)) * std::exp(-0.5 * n) * 0.5;
    p.modes[n] = v;
    p.modes[-n] = v.conjugate();
  }
  // direct complex summation oracle for the imaginary part
  double imax = 0;
  for (int x1 = 0; x1 < 89; ++x1)
    for (int x2 = 0; x2 < 3; ++x2) {
      cplx s = 0;
      for (auto& [n, v] : p.modes) s += std::exp(kI * (n * f.alpha * x1)) * v(x2);
      imax = std::max(imax, std::abs(s.imag()));
    }
  CHECK(imax < 1e-12);
  RVec phi = build_potential(p, lat);
  for (auto& [n, v] : p.modes) {
    cplx acc = 0;
    for (int x1 = 0; x1 < 89; ++x1) acc += std::exp(-kI * (n * f.alpha * x1)) * phi(lat.index(x1, 1, 0));
    CHECK(std::abs(acc / 89.0 - v(1)) < 1e-10);
  }
}
