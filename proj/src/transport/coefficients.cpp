#include <cmath>

#include "edgeflow/transport.hpp"

namespace edgeflow {

LimitEstimate theta_limit(const std::vector<double>& thetas, const std::vector<double>& values) {
  if (thetas.size() != values.size()) throw Error("theta_limit: size mismatch");
  if (values.size() < 2) throw NoLimit("theta limit needs at least two theta values");
  LimitEstimate est;
  est.per_theta = values;
  for (std::size_t k = 0; k + 1 < values.size(); ++k) {
    double r = thetas[k] / thetas[k + 1];
    if (!(r > 1)) throw ConfigError("theta schedule must decrease");
    est.richardson.push_back((r * r * values[k + 1] - values[k]) / (r * r - 1));
  }
  const std::size_t n = est.richardson.size();
  est.value = est.richardson.back();
  const double raw = std::abs(values.back() - values[values.size() - 2]);
  if (n >= 2) {
    est.uncertainty = std::abs(est.richardson[n - 1] - est.richardson[n - 2]);
    if (est.uncertainty > raw)
      throw NoLimit("theta extrapolants spread (" + std::to_string(est.uncertainty) +
                    ") exceeds the raw sequence spread (" + std::to_string(raw) + ")");
  } else {
    est.uncertainty = std::abs(est.value - values.back());
  }
  return est;
}

EdgeCoefficients edge_coefficients(const Spectrum& sp, const CurrentOperators& cur, double beta,
                                   const TransportOptions& opt, Exec exec) {
  const auto& lat = sp.lattice;
  Profile prof = make_profile(opt.preset, opt.width);
  EdgeCoefficients out;
  std::vector<double> g0, g1, h0, h1;
  const bool sq = opt.eta_rule == "sq";
  if (!sq && opt.eta_rule != "pinned") throw ConfigError("transport.eta_rule: expected sq | pinned");
  for (double theta : opt.thetas) {
    if (theta * lat.L1 < kTwoPi) {
      out.dropped_thetas.push_back(theta);
      continue;
    }
    TestFunctionPair tf = make_test_functions(lat, prof, theta, opt.ell);
    out.pairing = tf.pairing;
    std::vector<double> etas{sq ? theta * theta : opt.eta_value};
    if (sq) etas.push_back(0.5 * theta * theta);
    for (int nu : {0, 1}) {
      auto chi = kubo_realtime(sp, cur, tf, beta, etas, nu, exec);
      for (std::size_t q = 0; q < etas.size(); ++q)
        out.points.push_back({nu, theta, etas[q], chi[q], chi[q].real() / tf.pairing});
      (nu == 0 ? g0 : g1).push_back(chi[0].real() / tf.pairing);
      if (sq) (nu == 0 ? h0 : h1).push_back(chi[1].real() / tf.pairing);
    }
    out.thetas.push_back(theta);
  }
  out.G0 = theta_limit(out.thetas, g0);
  out.G1 = theta_limit(out.thetas, g1);
  if (sq) {
    auto widen = [&](LimitEstimate& est, const std::vector<double>& h, std::optional<LimitEstimate>& alt) {
      try {
        alt = theta_limit(out.thetas, h);
        est.uncertainty = std::max(est.uncertainty, std::abs(alt->value - est.value));
      } catch (const NoLimit&) {
        alt.reset();
      }
    };
    widen(out.G0, h0, out.G0_half);
    widen(out.G1, h1, out.G1_half);
  }
  return out;
}

}  // namespace edgeflow
