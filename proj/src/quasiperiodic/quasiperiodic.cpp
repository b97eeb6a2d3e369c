#include "edgeflow/quasiperiodic.hpp"

#include <cmath>
#include <numeric>

namespace edgeflow {

Real50 golden_mean() { return (boost::multiprecision::sqrt(Real50(5)) - 1) / 2; }

Real50 parse_frequency(const std::string& s) {
  if (s == "golden") return golden_mean();
  try {
    Real50 x(s);
    if (x <= 0 || x >= 1) throw ConfigError("disorder.alpha_inf must lie in (0,1)");
    return x;
  } catch (const std::runtime_error&) {
    throw ConfigError("disorder.alpha_inf: cannot parse '" + s + "'");
  }
}

namespace {

std::vector<std::pair<long long, long long>> expand(Real50 x, long long q_max, const Real50& eps) {
  if (q_max < 1) throw ConfigError("convergents: q_max must be >= 1");
  std::vector<std::pair<long long, long long>> out;
  long long p0 = 1, q0 = 0;  // p_{-1}, q_{-1}
  Real50 a = boost::multiprecision::floor(x);
  long long p1 = a.convert_to<long long>(), q1 = 1;
  out.emplace_back(p1, q1);
  Real50 r = x - a;
  while (r > eps) {
    x = 1 / r;
    a = boost::multiprecision::floor(x);
    r = x - a;
    long long ai = a.convert_to<long long>();
    long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > q_max) break;
    if (q2 == out.back().second) out.pop_back();  // 0/1 then 1/1 for x > 1/2
    out.emplace_back(p2, q2);
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
  }
  return out;
}

}  // namespace

std::vector<std::pair<long long, long long>> convergents(const Real50& x, long long q_max) {
  return expand(x, q_max, Real50("1e-45"));
}

std::vector<std::pair<long long, long long>> convergents(double x, long long q_max) {
  return expand(Real50(x), q_max, Real50(1e-13));
}

RationalFrequency best_frequency(const Real50& alpha_inf_over_2pi, int L1, double tau) {
  if (!(tau > 1)) throw ConfigError("disorder.tau must exceed 1");
  long long m = -1;
  for (auto [p, q] : convergents(alpha_inf_over_2pi, L1))
    if (q == L1) m = p;
  if (m < 0)
    throw NotInSequence("L1 = " + std::to_string(L1) +
                        " is not a convergent denominator of the target frequency");
  if (std::gcd(m, static_cast<long long>(L1)) != 1) throw ConstructionBug("convergent not coprime");
  RationalFrequency f;
  f.m = m;
  f.L1 = L1;
  f.alpha = kTwoPi * static_cast<double>(m) / L1;
  f.alpha_inf_over_2pi = alpha_inf_over_2pi.convert_to<double>();
  f.tau = tau;
  Real50 gap = boost::multiprecision::abs(Real50(m) / L1 - alpha_inf_over_2pi);
  if (gap > Real50(1) / (Real50(L1) * L1)) throw ConstructionBug("approximant outside 1/L1^2");
  double c = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= L1 / 2; ++n)
    c = std::min(c, torus_dist(kTwoPi * static_cast<double>((n * m) % L1) / L1) * std::pow(n, tau));
  if (!(c > 0)) throw ConstructionBug("Diophantine constant is not positive");
  f.c_est = c;
  return f;
}

QuasiPeriodicPotential default_potential(const RationalFrequency& f, const CylinderLattice& lat,
                                         double lambda, int n_modes, double amplitude,
                                         double decay) {
  QuasiPeriodicPotential p;
  p.freq = f;
  p.lambda = lambda;
  p.C = std::abs(amplitude);
  p.c = decay;
  for (int n = -n_modes; n <= n_modes; ++n)
    p.modes[n] = Vec::Constant(lat.block(), amplitude * std::exp(-decay * std::abs(n)));
  return p;
}

void check_potential(const QuasiPeriodicPotential& pot) {
  for (const auto& [n, v] : pot.modes) {
    auto it = pot.modes.find(-n);
    if (it == pot.modes.end() || (it->second - v.conjugate()).cwiseAbs().maxCoeff() > 1e-14)
      throw ConfigError("potential modes violate phi_{-n} = conj(phi_n)");
    if (v.cwiseAbs().maxCoeff() > pot.C * std::exp(-pot.c * std::abs(n)) * (1 + 1e-12))
      throw ConfigError("potential mode exceeds the C e^{-c|n|} envelope");
  }
}

RVec build_potential(const QuasiPeriodicPotential& pot, const CylinderLattice& lat) {
  check_potential(pot);
  const int D = lat.block();
  Vec field = Vec::Zero(lat.dim());
  for (int x1 = 0; x1 < lat.L1; ++x1) {
    for (const auto& [n, v] : pot.modes) {
      // n*m*x1 reduced exactly so the phase is periodic in x1 to round-off.
      long long r = ((static_cast<long long>(n) * pot.freq.m * x1) % lat.L1 + lat.L1) % lat.L1;
      cplx ph = std::exp(kI * (kTwoPi * static_cast<double>(r) / lat.L1));
      field.segment(x1 * D, D) += ph * v;
    }
  }
  if (field.imag().cwiseAbs().maxCoeff() > 1e-12) throw ConstructionBug("potential not real");
  return field.real();
}

Mat disordered_hamiltonian(const HoppingModel& m, const QuasiPeriodicPotential& pot) {
  Mat H = full_hamiltonian(m);
  if (pot.lambda != 0.0) H.diagonal() += (pot.lambda * build_potential(pot, m.lattice)).cast<cplx>();
  return H;
}

}  // namespace edgeflow
