#include <cmath>

#include "edgeflow/transport.hpp"

namespace edgeflow {

cplx relativistic_g(double v0, double v1, const CutoffFunction& chi, double q0, double q1) {
  double c = chi(std::hypot(v0 * q0, v1 * q1));
  if (c == 0.0) return 0.0;
  return c / cplx(v1 * q1, v0 * q0);
}

cplx bubble_finite(double v0, double v1, const CutoffFunction& chi, double beta, int L1, double eta,
                   double p) {
  double n = eta * beta / kTwoPi;
  if (n < -1e-9 || std::abs(n - std::round(n)) > 1e-9)
    throw ConfigError("bubble: eta must lie in (2 pi / beta) N");
  if (v0 == 0.0 || v1 == 0.0) throw ConfigError("bubble: velocities must be nonzero");
  // g_s(q) vanishes unless |v0 q0| < delta and |v1 q1| < delta
  const int n0 = static_cast<int>(std::ceil(chi.delta / std::abs(v0) * beta / kTwoPi)) + 1;
  int j_lo = -(static_cast<int>(std::ceil(chi.delta / std::abs(v1) * L1 / kTwoPi)) + 1), j_hi = -j_lo;
  if (j_hi - j_lo + 1 > L1) {
    j_lo = -(L1 / 2);
    j_hi = j_lo + L1 - 1;
  }
  cplx acc = 0;
  for (int i = -n0; i < n0; ++i) {
    double q0 = kTwoPi / beta * (i + 0.5);
    for (int j = j_lo; j <= j_hi; ++j) {
      double q1 = kTwoPi * j / L1;
      cplx g = relativistic_g(v0, v1, chi, q0, q1);
      if (g == 0.0) continue;
      double s1 = std::remainder(q1 + p, kTwoPi);  // torus representative in [-pi, pi]
      acc += relativistic_g(v0, v1, chi, q0 + eta, s1) * g;
    }
  }
  return acc / (beta * L1);
}

cplx bubble_closed_form(double v0, double v1, double eta, double p) {
  if (eta == 0.0 && p == 0.0) throw ConfigError("bubble closed form is discontinuous at (0, 0)");
  cplx num(-v1 * p, v0 * eta), den(v1 * p, v0 * eta);
  return num / den / (4.0 * kPi * std::abs(v0 * v1));
}

}  // namespace edgeflow
