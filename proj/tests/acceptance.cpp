// Acceptance run at L1 = 89, L2 = 24, beta = 48 (QWZ u = -1, golden frequency).
// One PASS/FAIL line per criterion; exit status 1 if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "edgeflow/cli.hpp"

using namespace edgeflow;

namespace {

constexpr int kL1 = 89, kL2 = 24;
constexpr double kBeta = 48.0;
constexpr double kEdgeDelta = 0.4;

struct Setup {
  CylinderLattice lat{kL1, kL2, 2};
  HoppingModel model = build_qwz_model(-1.0, lat);
  RationalFrequency freq = best_frequency(golden_mean(), kL1, 2.0);
  std::vector<EdgeModeData> modes = edge_spectrum(model, 0.0, kEdgeDelta);

  QuasiPeriodicPotential pot(double lambda, int L2 = kL2) const {
    return default_potential(freq, CylinderLattice(kL1, L2, 2), lambda, 8, 1.0, 0.5);
  }
  std::shared_ptr<const Spectrum> spectrum(double lambda) const { return cached_spectrum(model, pot(lambda)); }
  const EdgeModeData& mode(int omega) const {
    for (const auto& m : modes)
      if (m.omega == omega) return m;
    throw AssumptionViolation("missing edge mode");
  }
};

const Setup& setup() {
  static Setup s;
  return s;
}

std::string num(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(what + (ok ? "" : " (X)"));
  }
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.pass = false;
    v.notes.push_back(std::string("exception: ") + e.what());
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += !v.pass;
  std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " [";
  for (std::size_t i = 0; i < v.notes.size(); ++i) std::cout << (i ? "; " : "") << v.notes[i];
  std::cout << "] (" << num(sec) << " s)" << std::endl;
}

// Renormalized Fermi velocity v1 / v0 of the + edge from the scaling-limit fit.
ScalingLimitFit scaling_fit(double lambda, int omega) {
  auto sp = setup().spectrum(lambda);
  const double kF = extract_kF(edge_correlator(*sp, kBeta, kBeta / 2, omega, 3));
  MomentumTwoPoint S2(sp, MatsubaraGrid{kBeta, 1024}, setup().freq.m, 4);
  return fit_velocities_and_Z(S2, kF, omega);
}

std::map<double, EdgeCoefficients> coefficient_cache;
const EdgeCoefficients& coefficients(double lambda) {
  auto it = coefficient_cache.find(lambda);
  if (it != coefficient_cache.end()) return it->second;
  CurrentOperators cur(setup().model);
  return coefficient_cache[lambda] = edge_coefficients(*setup().spectrum(lambda), cur, kBeta, TransportOptions{});
}

std::map<double, ScalingLimitFit> fit_cache;
const ScalingLimitFit& fit_plus(double lambda) {
  auto it = fit_cache.find(lambda);
  if (it != fit_cache.end()) return it->second;
  return fit_cache[lambda] = scaling_fit(lambda, +1);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  std::cout << "acceptance: QWZ u = -1, L1 = " << kL1 << ", L2 = " << kL2 << ", beta = " << kBeta << std::endl;

  criterion(1, "|2 pi G1 - sgn(v)| <= 0.05, lambda in {0, 0.05}", [] {
    Verdict v;
    for (double lambda : {0.0, 0.05}) {
      const auto& ec = coefficients(lambda);
      const auto& fit = fit_plus(lambda);
      const double sgn = fit.v1 / fit.v0 > 0 ? 1.0 : -1.0;
      const double dev = std::abs(kTwoPi * ec.G1.value - sgn);
      v.check(dev <= 0.05, "lambda " + num(lambda) + ": 2 pi G1 = " + num(kTwoPi * ec.G1.value) + " +- " +
                               num(kTwoPi * ec.G1.uncertainty) + ", sgn(v) = " + num(sgn));
    }
    return v;
  });

  criterion(2, "|2 pi |v(lambda)| G0 - 1| <= 0.10 with v(lambda) from the scaling fit", [] {
    Verdict v;
    for (double lambda : {0.0, 0.05}) {
      const auto& ec = coefficients(lambda);
      const auto& fit = fit_plus(lambda);
      const double vel = std::abs(fit.v1 / fit.v0);
      const double dev = std::abs(kTwoPi * vel * ec.G0.value - 1.0);
      v.check(dev <= 0.10, "lambda " + num(lambda) + ": |v| = " + num(vel) + ", 2 pi |v| G0 = " +
                               num(kTwoPi * vel * ec.G0.value));
    }
    return v;
  });

  criterion(3, "current and vertex Ward identities, relative residual < 1e-8", [] {
    Verdict v;
    CurrentOperators cur(setup().model);
    for (double lambda : {0.0, 0.05}) {
      auto sp = setup().spectrum(lambda);
      double current = 0.0;
      for (double theta : TransportOptions{}.thetas) {
        if (theta * kL1 < kTwoPi) continue;
        auto tf = make_test_functions(setup().lat, make_profile("odd"), theta, 8.0);
        current = std::max(current, check_current_ward(*sp, cur, tf, kBeta, kTwoPi / kBeta).max_residual);
      }
      MomentumTwoPoint S2(sp, MatsubaraGrid{kBeta, 1024}, setup().freq.m, 4);
      auto triples = default_ward_triples(S2, setup().mode(+1).kF_index, 0);
      const double vertex = check_vertex_ward(vertex_function(S2, cur, triples), S2).max_residual;
      v.check(current < 1e-8 && vertex < 1e-8,
              "lambda " + num(lambda) + ": current " + num(current) + ", vertex " + num(vertex));
    }
    return v;
  });

  criterion(4, "|zeta_mu / v_mu - 1| <= 0.05 at lambda = 0.05", [] {
    Verdict v;
    auto sp = setup().spectrum(0.05);
    CurrentOperators cur(setup().model);
    MomentumTwoPoint S2(sp, MatsubaraGrid{400.0, 200}, setup().freq.m, 2);
    ZetaWindow w;
    auto r = verify_zeta_relations(fit_plus(0.05), setup().model, S2, cur, w);
    v.check(std::abs(r.ratio0 - 1.0) <= 0.05, "zeta0/v0 = " + num(r.ratio0));
    v.check(std::abs(r.ratio1 - 1.0) <= 0.05, "zeta1/v1 = " + num(r.ratio1));
    v.notes.push_back("leading-form fit zeta0 = " + num(r.fit_zeta0.real()) + ", zeta1 = " +
                      num(r.fit_zeta1.real()));
    return v;
  });

  criterion(5, "bubble at beta = L1 = 256 within 3% of 1/(4 pi); error halves on doubling", [] {
    Verdict v;
    const CutoffFunction chi{kEdgeDelta, 2.0};
    auto err = [&](int n) {
      const double beta = n, eta = kTwoPi / beta;
      return std::abs(bubble_finite(1.0, 1.0, chi, beta, n, eta, 0.0) - bubble_closed_form(1.0, 1.0, eta, 0.0));
    };
    const double ref = 1.0 / (4 * kPi);
    const double e256 = err(256), e512 = err(512);
    v.check(e256 / ref <= 0.03, "relative error at 256: " + num(e256 / ref));
    v.check(e512 / e256 <= 0.5, "error ratio 512/256: " + num(e512 / e256));
    return v;
  });

  criterion(6, "satellites at kF +- alpha in [lambda/5, 5 lambda]; lambda = 0 fit v0 = 1, v1 = v within 2%", [] {
    Verdict v;
    const double lambda = 0.05;
    auto sp = setup().spectrum(lambda);
    for (int w : {+1, -1}) {
      auto c = edge_correlator(*sp, kBeta, kBeta / 2, w, 3);
      auto sat = satellite_ratios(c, extract_kF(c), setup().freq.m);
      for (double r : {sat.plus, sat.minus})
        v.check(r >= lambda / 5 && r <= 5 * lambda, "omega " + std::to_string(w) + " ratio " + num(r));
    }
    for (int w : {+1, -1}) {
      auto fit = w == +1 ? fit_plus(0.0) : scaling_fit(0.0, w);
      const double vw = setup().mode(w).v;
      v.check(std::abs(fit.v0 - 1.0) <= 0.02, "omega " + std::to_string(w) + " v0 = " + num(fit.v0));
      v.check(std::abs(fit.v1 / vw - 1.0) <= 0.02,
              "omega " + std::to_string(w) + " v1 = " + num(fit.v1) + " vs v = " + num(vw));
    }
    return v;
  });

  criterion(7, "|chi_realtime - chi_euclidean| at eta = 0.2 shrinks >= 1.8x from beta 48 to 96", [] {
    Verdict v;
    auto sp = setup().spectrum(0.05);
    CurrentOperators cur(setup().model);
    auto tf = make_test_functions(setup().lat, make_profile("odd"), 0.2, 8.0);
    for (int nu : {0, 1}) {
      double d[2];
      for (int i = 0; i < 2; ++i) {
        const double beta = kBeta * (i + 1);
        d[i] = std::abs(kubo_realtime(*sp, cur, tf, beta, 0.2, nu) -
                        kubo_euclidean(*sp, cur, tf, beta, bosonic_ceil(beta, 0.2), nu));
      }
      v.check(d[0] / d[1] >= 1.8, "nu " + std::to_string(nu) + ": " + num(d[0]) + " -> " + num(d[1]) +
                                      ", factor " + num(d[0] / d[1]));
    }
    return v;
  });

  criterion(8, "Combes-Thomas: bulk decay c > 0 with R^2 > 0.99, bounded frequency envelope", [] {
    Verdict v;
    const CutoffFunction chi{kEdgeDelta, 2.0};
    std::vector<double> k1s;
    for (int j = 0; j < kL1; ++j) k1s.push_back(setup().lat.momentum(j));
    auto ct = combes_thomas_fit(setup().model, chi, MatsubaraGrid{kBeta, 1024}, setup().modes, k1s);
    auto wide = combes_thomas_fit(setup().model, chi, MatsubaraGrid{kBeta, 8192}, setup().modes, k1s);
    v.check(ct.c > 0, "c = " + num(ct.c));
    v.check(ct.r2 > 0.99, "R^2 = " + num(ct.r2));
    v.check(std::isfinite(wide.envelope) && wide.envelope <= 1.01 * ct.envelope,
            "envelope " + num(ct.envelope) + " (1024 frequencies), " + num(wide.envelope) + " (8192)");
    return v;
  });

  criterion(9, "RG flow: contraction < 0.9, theta in (0,1), |v1[h] - v1[0]| <= lambda^2, off-diagonal decay in L2", [] {
    Verdict v;
    const double lambda = 0.05;
    RgOptions opt;
    opt.beta = 1536.0;
    opt.s_max = 2;
    auto solve = [&](int L2) {
      CylinderLattice lat(kL1, L2, 2);
      auto m = build_qwz_model(-1.0, lat);
      auto modes = edge_spectrum(m, 0.0, kEdgeDelta);
      EdgeRG rg(m, setup().pot(lambda, L2), modes, kEdgeDelta, opt);
      return solve_nu_fixed_point(rg);
    };
    auto fp = solve(kL2);
    v.check(fp.converged && fp.contraction < 0.9, "contraction " + num(fp.contraction));
    for (int w = 0; w < 2; ++w) {
      std::string label = std::string("theta_") + (w == 0 ? "+" : "-");
      try {
        auto tf = fit_theta(fp.pass.rcc, lambda, w);
        v.check(tf.theta > 0 && tf.theta < 1, label + " = " + num(tf.theta) + " over " +
                                                  std::to_string(tf.points) + " scales");
      } catch (const std::exception& e) {
        v.check(false, label + " undetermined: " + e.what());
      }
    }
    double drift = 0.0;
    for (const auto& sc : fp.pass.rcc.scales)
      for (int w = 0; w < 2; ++w) drift = std::max(drift, std::abs(sc.v1(w, w) - fp.pass.rcc.at(0).v1(w, w)));
    v.check(drift <= lambda * lambda, "v1 drift " + num(drift));
    std::vector<double> xs, ys;
    std::string od;
    for (int L2 : {24, 36, 48}) {
      const double nu = std::abs((L2 == kL2 ? fp : solve(L2)).pass.rcc.at(0).nu(0, 1));
      od += (od.empty() ? "" : ", ") + num(nu);
      xs.push_back(L2);
      ys.push_back(std::log(nu));
    }
    const double slope = fit_line(xs, ys).slope;
    v.check(slope < 0, "|nu_{+-,0}| at L2 = 24, 36, 48: " + od + ", log-slope " + num(slope));
    return v;
  });

  criterion(10, "selftest subcommand exits 0 within 5 min", [&] {
    Verdict v;
    if (cli.empty()) {
      v.check(false, "path to the edgeflow binary not given");
      return v;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const int status = std::system((cli + " selftest --out acceptance-selftest > acceptance-selftest.log 2>&1").c_str());
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    v.check(code == 0, "exit " + std::to_string(code));
    v.check(sec <= 300, num(sec) + " s");
    return v;
  });

  std::cout << "acceptance: " << 10 - failures << "/10 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
