#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "edgeflow/transport.hpp"

namespace edgeflow {

double bump(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

double plateau(double t) { return smooth_step(2.0 * std::abs(t) - 1.0); }

Profile make_profile(const std::string& name, double width) {
  if (!(width > 0)) throw ConfigError("transport.width must be positive");
  Profile p;
  p.name = name;
  p.support = width;
  if (name == "odd") {
    p.mu_inf = [](double s, double) { return s * std::exp(-0.5 * s * s); };
    p.phi_inf = [width](double s, double t) { return s / width * bump(s / width) * plateau(t); };
  } else if (name == "gauss") {
    p.mu_inf = [](double s, double t) { return std::exp(-0.5 * (s * s + t * t)); };
    p.phi_inf = [width](double s, double t) { return bump(s / width) * bump(t); };
  } else {
    throw ConfigError("transport.profiles: unknown preset '" + name + "' (odd | gauss)");
  }
  return p;
}

double periodize(const std::function<double(double, double)>& f, int L1, double theta, double x1,
                 double t) {
  double total = f(theta * x1, t);
  double mass = std::abs(total);
  for (int n = 1; n < 100000; ++n) {
    double a = f(theta * (x1 + n * L1), t), b = f(theta * (x1 - n * L1), t);
    total += a + b;
    mass += std::abs(a) + std::abs(b);
    if (n >= 2 && std::abs(a) + std::abs(b) <= 1e-14 * mass) return total;
  }
  throw NumericalFailure("periodization did not converge");
}

TestFunctionPair make_test_functions(const CylinderLattice& lat, const Profile& prof, double theta,
                                     double ell) {
  if (!(theta > 0 && theta <= 1)) throw ConfigError("transport.theta must lie in (0, 1]");
  if (!(ell >= 1)) throw ConfigError("transport.ell must be >= 1");
  TestFunctionPair tf;
  tf.preset = prof.name;
  tf.theta = theta;
  tf.ell = ell;
  const int L1 = lat.L1, L2 = lat.L2;
  // one extra row for the x2 forward difference
  RMat mu(L1, L2 + 1);
  tf.phi.resize(L1, L2);
  for (int x1 = 0; x1 < L1; ++x1)
    for (int x2 = 0; x2 <= L2; ++x2) {
      double row = x2 + 1.0;
      mu(x1, x2) = periodize(prof.mu_inf, L1, theta, x1, theta * row);
      if (x2 < L2) tf.phi(x1, x2) = periodize(prof.phi_inf, L1, theta, x1, row / ell);
    }
  tf.mu = mu.leftCols(L2);
  tf.dmu[0].resize(L1, L2);
  tf.dmu[1].resize(L1, L2);
  for (int x1 = 0; x1 < L1; ++x1)
    for (int x2 = 0; x2 < L2; ++x2) {
      tf.dmu[0](x1, x2) = (mu((x1 + 1) % L1, x2) - mu(x1, x2)) / theta;
      tf.dmu[1](x1, x2) = (mu(x1, x2 + 1) - mu(x1, x2)) / theta;
    }
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double s) { return prof.mu_inf(s, 0.0) * prof.phi_inf(s, 0.0); };
  tf.pairing = gauss_kronrod<double, 61>::integrate(integrand, -prof.support, prof.support, 15, 1e-14);
  if (tf.pairing == 0.0) throw ConfigError("test functions have vanishing edge pairing");
  return tf;
}

Mat fourier_samples(const RMat& field) {
  const int L1 = static_cast<int>(field.rows());
  Mat out(L1, field.cols());
  for (int j = 0; j < L1; ++j)
    for (Eigen::Index c = 0; c < field.cols(); ++c) {
      cplx acc = 0;
      for (int x1 = 0; x1 < L1; ++x1)
        acc += std::exp(-kI * (kTwoPi * ((static_cast<long long>(j) * x1) % L1) / L1)) * field(x1, c);
      out(j, c) = acc;
    }
  return out;
}

double envelope_constant(const RMat& field, double theta, int r) {
  Mat hat = fourier_samples(field);
  const int L1 = static_cast<int>(field.rows());
  double c = 0;
  for (int j = 0; j < L1; ++j) {
    double k = torus_dist(kTwoPi * j / L1);
    double w = theta * (1.0 + std::pow(k / theta, r));
    c = std::max(c, hat.row(j).cwiseAbs().maxCoeff() * w);
  }
  return c;
}

}  // namespace edgeflow
