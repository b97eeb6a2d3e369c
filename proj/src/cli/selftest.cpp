#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <type_traits>

#include "edgeflow/cli.hpp"

namespace edgeflow::cli {

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records the first failure; later calls append measurements only while passing.
  Outcome& expect(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    } else if (pass && !what.empty() && detail.find(what) == std::string::npos &&
               detail.size() < 160) {
      detail += (detail.empty() ? "" : "; ") + what;
    }
    return *this;
  }
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

template <class E>
bool throws(const std::function<void()>& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

class Runner {
 public:
  Runner(std::ostream& log, std::string filter) : log_(log), filter_(std::move(filter)) {}

  void operator()(const std::string& group, const std::string& name,
                  const std::function<Outcome()>& body) {
    if (!filter_.empty() && (group + "/" + name).find(filter_) == std::string::npos) return;
    SelftestCheck c{group, name};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Outcome o = body();
      c.pass = o.pass;
      c.detail = o.detail;
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log_ << (c.pass ? "PASS " : "FAIL ") << group << "/" << name;
    if (!c.detail.empty()) log_ << "  [" << c.detail << "]";
    log_ << "\n";
    out.push_back(std::move(c));
  }

  std::vector<SelftestCheck> out;

 private:
  std::ostream& log_;
  std::string filter_;
};

// Small fixtures: QWZ u = -1 on 21 x 8 and 55 x 12, golden frequency, default modes.
struct Fixture {
  CylinderLattice lat;
  HoppingModel model;
  RationalFrequency freq;
  std::vector<EdgeModeData> modes;

  explicit Fixture(int L1, int L2, double u = -1.0)
      : lat(L1, L2, 2), model(build_qwz_model(u, lat)),
        freq(best_frequency(golden_mean(), L1, 2.0)), modes(edge_spectrum(model, 0.0, 0.4)) {}

  QuasiPeriodicPotential pot(double lambda) const {
    return default_potential(freq, lat, lambda, 8, 1.0, 0.5);
  }
  std::shared_ptr<const Spectrum> spectrum(double lambda) const {
    return cached_spectrum(model, pot(lambda));
  }
  const EdgeModeData& mode(int omega) const {
    for (const auto& m : modes)
      if (m.omega == omega) return m;
    throw AssumptionViolation("fixture: missing edge mode");
  }
};

const Fixture& f21() {
  static Fixture f(21, 8);
  return f;
}
const Fixture& f55() {
  static Fixture f(55, 12);
  return f;
}

constexpr double kBeta55 = 32.0;

ScalingLimitFit fit55(double lambda, int omega) {
  auto sp = f55().spectrum(lambda);
  auto c = edge_correlator(*sp, kBeta55, kBeta55 / 2, omega, 3);
  MomentumTwoPoint S2(sp, MatsubaraGrid{kBeta55, 256}, f55().freq.m, 4);
  return fit_velocities_and_Z(S2, extract_kF(c), omega, FitOptions{2, 3, 4, 0.3});
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).generic_string()] = ss.str();
  }
  return out;
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c = parse_config(
      "lattice.L1 = 21\nlattice.L2 = 8\nmodel.u = -1\ngrids.beta = 8\ngrids.n_freq = 64\n"
      "disorder.modes = 3\nrg.beta = 64\n");
  c.output.directory = out.string();
  return c;
}

void trivial_lattice(Runner& run) {
  run("lattice", "T(+1) is the adjoint of T(-1)", [] {
    Outcome o;
    for (double u : {-1.0, -1.5, 1.2}) {
      auto m = build_qwz_model(u, CylinderLattice(8, 5, 2));
      o.expect((m.Tp - m.Tm.adjoint()).norm() == 0.0, "u = " + num(u));
    }
    return o;
  });
  run("lattice", "H(0) = T(-1) + T(0) + T(+1)", [] {
    const auto& m = f21().model;
    Outcome o;
    return o.expect((bloch_transform(m, 0.0) - (m.Tm + m.T0 + m.Tp)).norm() < 1e-15, "");
  });
  run("lattice", "H(k1) is Hermitian", [] {
    Outcome o;
    double worst = 0;
    for (int j = 0; j < 21; ++j) {
      Mat H = bloch_transform(f21().model, f21().lat.momentum(j));
      worst = std::max(worst, max_abs(H - H.adjoint()));
    }
    return o.expect(worst < 1e-15, "max defect " + num(worst));
  });
  run("lattice", "edge spectrum takes no potential", [] {
    using Sig = std::vector<EdgeModeData> (*)(const HoppingModel&, double, double,
                                              const EdgeOptions&, Exec);
    static_assert(std::is_same_v<decltype(static_cast<Sig>(&edge_spectrum)), Sig>);
    auto a = edge_spectrum(f21().model, 0.0, 0.4), b = edge_spectrum(f21().model, 0.0, 0.4);
    Outcome o;
    return o.expect(a.size() == b.size() && a[0].energy == b[0].energy, "repeatable");
  });
  run("lattice", "Fermi point of a linear band is exact", [] {
    EdgeModeData d;
    const double h = kTwoPi / 50, v = -0.7, k0 = 0.31;
    for (int j = 0; j < 9; ++j) {
      d.k1.push_back(h * j);
      d.energy.push_back(v * (h * j - k0));
    }
    auto fp = fermi_point(d, 0.0);
    Outcome o;
    o.expect(std::abs(fp.kF - k0) < 1e-12, "kF " + num(fp.kF));
    return o.expect(std::abs(fp.v - v) < 1e-12, "v " + num(fp.v));
  });
  run("lattice", "mu outside the band is an assumption violation", [] {
    EdgeModeData d;
    for (int j = 0; j < 9; ++j) {
      d.k1.push_back(0.1 * j);
      d.energy.push_back(0.5 * (0.1 * j - 0.3));
    }
    Outcome o;
    return o.expect(throws<AssumptionViolation>([&] { fermi_point(d, 10.0); }), "");
  });
}

void trivial_quasiperiodic(Runner& run) {
  run("quasiperiodic", "convergents of 1/3 end at (1,3)", [] {
    auto c = convergents(Real50(1) / 3, 1000);
    Outcome o;
    return o.expect(!c.empty() && c.back() == std::make_pair(1LL, 3LL), "");
  });
  run("quasiperiodic", "convergents are coprime", [] {
    Outcome o;
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    std::vector<std::vector<std::pair<long long, long long>>> all{convergents(golden_mean(), 1000000)};
    for (int i = 0; i < 20; ++i) all.push_back(convergents(u(rng), 100000));
    for (const auto& c : all)
      for (auto [p, q] : c) o.expect(std::gcd(p, q) == 1, std::to_string(p) + "/" + std::to_string(q));
    o.detail.clear();
    return o;
  });
  run("quasiperiodic", "single mode n = 0 gives a constant field", [] {
    CylinderLattice lat(13, 4, 2);
    QuasiPeriodicPotential p;
    p.freq = best_frequency(golden_mean(), 13, 2.0);
    p.modes[0] = Vec::Ones(lat.block());
    RVec phi = build_potential(p, lat);
    Outcome o;
    return o.expect((phi.array() - 1.0).abs().maxCoeff() < 1e-15, "");
  });
  run("quasiperiodic", "modes n = +-1 with 1/2 give cos(alpha x1)", [] {
    CylinderLattice lat(13, 4, 2);
    QuasiPeriodicPotential p;
    p.freq = best_frequency(golden_mean(), 13, 2.0);
    p.modes[1] = Vec::Constant(lat.block(), 0.5);
    p.modes[-1] = Vec::Constant(lat.block(), 0.5);
    RVec phi = build_potential(p, lat);
    double worst = 0;
    for (int x1 = 0; x1 < 13; ++x1)
      for (int x2 = 0; x2 < 4; ++x2)
        worst = std::max(worst, std::abs(phi(lat.index(x1, x2, 1)) - std::cos(p.freq.alpha * x1)));
    Outcome o;
    return o.expect(worst < 1e-14, "max error " + num(worst));
  });
}

void trivial_greens(Runner& run) {
  run("greens", "diagonal H: scalar resolvent on the eigenvector", [] {
    CylinderLattice lat(3, 3, 1);
    Mat T0 = Mat::Zero(3, 3);
    T0.diagonal() << 0.5, -0.2, 1.0;
    auto d = make_model(lat, T0, Mat::Zero(3, 3), Mat::Zero(3, 3), 0.1);
    MatsubaraGrid g{20.0, 64};
    Mat G = free_covariance(d, g, g.k0(70), 0.0);
    Outcome o;
    for (int i = 0; i < 3; ++i)
      o.expect(std::abs(G(i, i) - 1.0 / (kI * g.k0(70) + T0(i, i) - 0.1)) < 1e-14, "");
    return o.expect(std::abs(G(0, 1)) == 0.0, "");
  });
  run("greens", "resolvent norm bound and conjugation", [] {
    const auto& m = f21().model;
    MatsubaraGrid g{20.0, 64};
    Outcome o;
    for (int i : {0, 30, 63, 64, 100})
      for (int j : {0, 5, 13}) {
        const double k0 = g.k0(i), k1 = m.lattice.momentum(j);
        Mat G = free_covariance(m, g, k0, k1);
        o.expect(G.operatorNorm() <= 1.0 / std::abs(k0) * (1 + 1e-12), "norm");
        o.expect(max_abs(free_covariance(m, g, -k0, k1) - G.adjoint()) < 1e-14, "conjugation");
      }
    o.detail.clear();
    return o;
  });
  run("greens", "edge/bulk split: no edge part beyond delta or off-window, exact reassembly", [] {
    const auto& f = f21();
    CutoffFunction chi{0.4, 2.0};
    MatsubaraGrid g{48.0, 256};
    Outcome o;
    for (int i : {256, 255, 270, 300})
      for (int j : {0, 1, 10}) {
        const double k0 = g.k0(i), k1 = f.lat.momentum(j);
        Mat G = free_covariance(f.model, g, k0, k1);
        auto s = edge_bulk_split(f.model, G, chi, f.modes, k0, k1);
        o.expect(max_abs(s.edge + s.bulk - G) < 1e-12, "reassembly");
        if (std::abs(k0) > 0.4) o.expect(s.edge.norm() == 0.0 && (s.bulk - G).norm() == 0.0, "|k0| > delta");
        if (j == 10) o.expect(s.edge.norm() == 0.0, "off-window k1");
      }
    o.detail.clear();
    return o;
  });
  run("greens", "pure edge input: degenerate decay fit", [] {
    std::vector<Mat> zero(3, Mat::Zero(32, 32));
    Outcome o;
    return o.expect(throws<NumericalFailure>([&] { decay_fit(zero, 2, 12); }), "");
  });
  run("greens", "equal time, x = y: minus the local density", [] {
    CylinderLattice lat(8, 6, 2);
    auto m = build_qwz_model(-1.0, lat, 0.05);
    auto pot = default_potential(best_frequency(golden_mean(), 8, 2.0), lat, 0.07, 3, 1.0, 0.5);
    Spectrum sp = diagonalize(m, pot);
    const double beta = 8.0;
    std::vector<int> idx(lat.dim());
    std::iota(idx.begin(), idx.end(), 0);
    Mat eq = disordered_two_point(sp, beta, 2.0, 2.0, idx, idx);
    double worst = 0;
    for (int x = 0; x < lat.dim(); ++x) {
      double dens = 0;
      for (int j = 0; j < lat.dim(); ++j) dens += fermi(beta, sp.energy(j) - sp.mu) * std::norm(sp.U(x, j));
      worst = std::max(worst, std::abs(eq(x, x) + dens));
    }
    Outcome o;
    return o.expect(worst < 1e-12, "max error " + num(worst));
  });
  run("greens", "lambda = 0: only the n = 0 block, equal to the free covariance", [] {
    CylinderLattice lat(13, 5, 2);
    auto m = build_qwz_model(-1.0, lat);
    auto f = best_frequency(golden_mean(), 13, 2.0);
    auto sp = std::make_shared<const Spectrum>(diagonalize(m, default_potential(f, lat, 0.0, 0, 1.0, 0.5)));
    MatsubaraGrid g{10.0, 64};
    MomentumTwoPoint mt(sp, g, f.m, 4);
    double e0 = 0, en = 0;
    for (int j : {0, 4, 12}) {
      e0 = std::max(e0, max_abs(mt.block(60, j, 0) - free_covariance(m, g, g.k0(60), lat.momentum(j))));
      for (int n : {-2, 1, 3}) en = std::max(en, max_abs(mt.block(60, j, n)));
    }
    Outcome o;
    o.expect(e0 < 1e-10, "n = 0 error " + num(e0));
    return o.expect(en < 1e-10, "n != 0 max " + num(en));
  });
}

void trivial_rgflow(Runner& run) {
  run("rgflow", "cascade at beta = 48, delta = 0.4: unique bracketing scale", [] {
    auto c = build_cascade(48.0, 0.4, 2.0);
    const double t = kPi / 48.0;
    int count = 0;
    for (int h = c.h_beta - 5; h <= 3; ++h) count += 0.4 * std::pow(2.0, h - 1) <= t && t <= 0.4 * std::pow(2.0, h);
    Outcome o;
    o.expect(0.4 * std::pow(2.0, c.h_beta - 1) <= t && t <= 0.4 * std::pow(2.0, c.h_beta), "bracket");
    return o.expect(count == 1, "h_beta = " + std::to_string(c.h_beta));
  });
  run("rgflow", "partition of unity at 200 random q", [] {
    auto c = build_cascade(48.0, 0.4, 2.0);
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0.0, 0.6);
    double worst = 0;
    for (int i = 0; i < 200; ++i) worst = std::max(worst, partition_residual(c, u(rng)));
    Outcome o;
    return o.expect(worst < 1e-12, "max residual " + num(worst));
  });
  run("rgflow", "doubling beta lowers h_beta by one", [] {
    Outcome o;
    for (double b : {48.0, 96.0, 200.0, 1536.0})
      o.expect(build_cascade(2 * b, 0.4, 2.0).h_beta == build_cascade(b, 0.4, 2.0).h_beta - 1, num(b));
    o.detail.clear();
    return o;
  });
  run("rgflow", "first-order potential vanishes at lambda = 0", [] {
    auto k = effective_potential_order1(f21().pot(0.0), f21().modes, 21);
    Outcome o;
    for (const auto& [m, K] : k.K) o.expect(K.norm() == 0.0, "");
    return o;
  });
  run("rgflow", "n = 0 diagonal element is -lambda <xi, phi_0 xi>", [] {
    const double lambda = 0.05;
    auto pot = f21().pot(lambda);
    auto k = effective_potential_order1(pot, f21().modes, 21);
    double worst = 0;
    for (const auto& mode : f21().modes)
      for (std::size_t i = 0; i < mode.k_index.size(); ++i) {
        int r = mode.k_index[i] - mode.kF_index;
        r = ((r % 21) + 21 + 10) % 21 - 10;
        const cplx direct = -lambda * mode.xi[i].dot(pot.modes.at(0).cwiseProduct(mode.xi[i]));
        worst = std::max(worst, std::abs(k.value(0, mode.omega, mode.omega, 0, r) - direct));
      }
    Outcome o;
    return o.expect(worst < 1e-15, "max error " + num(worst));
  });
  run("rgflow", "one-node chain is the bare -lambda phi_{-n} node", [] {
    auto pot = f21().pot(0.05);
    BulkChains bc(f21().model, pot, f21().modes, CutoffFunction{0.4, 2.0}, 2);
    Outcome o;
    for (int n : {-2, 0, 3}) {
      Mat c = bc.chain({n}, kPi / 50, 5);
      o.expect((c - Mat(bc.node(n).asDiagonal())).norm() == 0.0, "");
      o.expect((bc.node(n) + pot.lambda * pot.modes.at(-n)).norm() < 1e-15, "");
    }
    return o;
  });
  run("rgflow", "localize: constant kernel is all L0", [] {
    QGrid g = QGrid::stencil(48.0, 89);
    auto lp = localize(SampledKernel{g, Mat::Constant(9, 9, cplx(0.3, -0.1))}, 0, true);
    Outcome o;
    o.expect(std::abs(lp.value - cplx(0.3, -0.1)) < 1e-15, "L0");
    o.expect(lp.L1_diag.values.norm() < 1e-14, "L1");
    return o.expect(lp.R.values.norm() < 1e-14, "R");
  });
  run("rgflow", "localize: n = 3 leaves R = V", [] {
    std::mt19937 rng(4);
    std::normal_distribution<double> nd;
    Mat V(9, 9);
    for (Eigen::Index i = 0; i < V.size(); ++i) V(i) = cplx(nd(rng), nd(rng));
    auto lp = localize(SampledKernel{QGrid::stencil(48.0, 89), V}, 3, true);
    Outcome o;
    return o.expect((lp.R.values - V).norm() == 0.0 && lp.L0.values.norm() == 0.0, "");
  });
  run("rgflow", "zero beta function: v constant, nu grows as gamma^(h_start - h)", [] {
    ScaleCouplings s;
    s.nu << 0.01, cplx(1e-4, 2e-4), cplx(1e-4, -2e-4), -0.02;
    s.v0 << 1.0, 0.0, 0.0, 1.0;
    s.v1 << 0.9, 0.0, 0.0, -0.9;
    ScaleCouplings t = s;
    Outcome o;
    for (int k = 1; k <= 6; ++k) {
      t = flow_step(t, BetaFunction{}, 2.0);
      o.expect((t.nu - std::pow(2.0, k) * s.nu).norm() < 1e-15, "nu at h = " + std::to_string(t.h));
      o.expect(t.v0 == s.v0 && t.v1 == s.v1, "v");
    }
    o.detail.clear();
    return o;
  });
  run("rgflow", "lambda = 0: couplings frozen, nu = 0, kF(lambda) = kF", [] {
    RgOptions opt;
    opt.beta = 200.0;
    EdgeRG rg(f21().model, f21().pot(0.0), f21().modes, 0.4, opt);
    auto fp = solve_nu_fixed_point(rg);
    Outcome o;
    o.expect(fp.converged, "converged");
    for (int w = 0; w < 2; ++w) {
      o.expect(fp.nu_omega[w] == 0.0, "nu_omega");
      o.expect(torus_dist(fp.kF_lambda[w] - f21().mode(w == 0 ? 1 : -1).kF) < 1e-12, "kF");
      for (const auto& s : fp.pass.rcc.scales) {
        o.expect(s.nu.norm() == 0.0, "nu_h");
        o.expect(s.v0(w, w) == cplx(1.0) && s.v1(w, w) == cplx(fp.pass.vtilde[w]), "v_h");
      }
    }
    o.detail.clear();
    return o;
  });
  run("rgflow", "V = 0 leaves the phi-psi kernels unchanged over every scale", [] {
    std::mt19937 rng(8);
    std::normal_distribution<double> nd;
    auto rnd = [&](int r, int c) {
      Mat M(r, c);
      for (Eigen::Index i = 0; i < M.size(); ++i) M(i) = cplx(nd(rng), nd(rng));
      return M;
    };
    PhiPsiKernels W0{rnd(5, 6), rnd(6, 5), rnd(5, 5)};
    PhiPsiKernels W = W0;
    Outcome o;
    for (int h = 0; h > -5; --h) {
      W = iterate_phi_psi_kernels(W, Mat::Zero(6, 6), rnd(6, 1).col(0));
      o.expect(W.phi_psi == W0.phi_psi && W.psi_phi == W0.psi_phi, "h = " + std::to_string(h));
    }
    o.detail.clear();
    return o;
  });
}

void trivial_scaling(Runner& run) {
  run("scaling", "g(q0, 0) = chi(|v0 q0|) / (i v0 q0) and conjugation", [] {
    CutoffFunction chi{0.4, 2.0};
    Outcome o;
    for (double q0 : {kPi / 32, 0.25, -0.1}) {
      o.expect(std::abs(relativistic_g(1.2, 0.5, chi, q0, 0.0) - chi(1.2 * q0) / (kI * 1.2 * q0)) < 1e-15, "axis");
      o.expect(std::abs(relativistic_g(1.2, 0.5, chi, -q0, 0.1) - std::conj(relativistic_g(1.2, 0.5, chi, q0, 0.1))) < 1e-15,
               "conjugation");
    }
    o.detail.clear();
    return o;
  });
  run("scaling", "lambda = 0: kF within one grid step of the band crossing", [] {
    auto sp = f55().spectrum(0.0);
    Outcome o;
    for (int w : {+1, -1}) {
      const double kF = extract_kF(edge_correlator(*sp, kBeta55, kBeta55 / 2, w, 3));
      o.expect(torus_dist(kF - f55().mode(w).kF) <= kTwoPi / 55, "omega " + std::to_string(w) + " kF " + num(kF));
    }
    return o;
  });
  run("scaling", "lambda = 0: zeta0 = 1, zeta1 = v", [] {
    Outcome o;
    for (int w : {+1, -1}) {
      auto fit = fit55(0.0, w);
      auto dv = dressed_vertices(fit, f55().model);
      o.expect(std::abs(dv.zeta0 - 1.0) < 1e-12, "zeta0 " + num(dv.zeta0));
      o.expect(std::abs(dv.zeta1.real() / f55().mode(w).v - 1.0) < 1e-4, "zeta1 " + num(dv.zeta1.real()));
    }
    return o;
  });
}

void trivial_transport(Runner& run) {
  run("transport", "continuity residual vanishes for QWZ u = -1", [] {
    CurrentOperators cur(f21().model);
    std::mt19937 rng(6);
    std::normal_distribution<double> nd;
    RMat w(21, 8);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = nd(rng);
    const double r = cur.continuity_residual(w);
    Outcome o;
    return o.expect(r < 1e-12, "residual " + num(r));
  });
  run("transport", "zero mu profile gives zero response", [] {
    CylinderLattice lat(8, 6, 2);
    auto m = build_qwz_model(-1.0, lat, 0.05);
    Spectrum sp = diagonalize(m, default_potential(best_frequency(golden_mean(), 8, 2.0), lat, 0.1, 3, 1.0, 0.5));
    CurrentOperators cur(m);
    auto tf = make_test_functions(lat, make_profile("odd"), 0.8, 2.0);
    tf.mu.setZero();
    Outcome o;
    for (int nu : {0, 1}) o.expect(std::abs(kubo_realtime(sp, cur, tf, 3.0, 0.1, nu)) == 0.0, "");
    return o;
  });
  run("transport", "bubble: p -> -p is conjugation", [] {
    CutoffFunction chi{0.4, 2.0};
    const double eta = 2 * kTwoPi / 64, p = kTwoPi * 3 / 64;
    cplx a = bubble_finite(1.0, 0.8, chi, 64, 64, eta, p), b = bubble_finite(1.0, 0.8, chi, 64, 64, eta, -p);
    Outcome o;
    return o.expect(std::abs(a - std::conj(b)) < 1e-14, "");
  });
  run("transport", "closed form: eta = 0 gives -1/(4 pi |v0 v1|)", [] {
    Outcome o;
    return o.expect(std::abs(bubble_closed_form(1.3, 0.7, 0.0, 0.3) + 1.0 / (4 * kPi * 1.3 * 0.7)) < 1e-15, "");
  });
  run("transport", "closed form is unimodular times 1/(4 pi |v0 v1|)", [] {
    Outcome o;
    for (double eta : {0.1, 1.0, 0.0})
      for (double p : {-0.5, 0.2, 0.0})
        if (eta != 0.0 || p != 0.0)
          o.expect(std::abs(std::abs(bubble_closed_form(1.0, -0.8, eta, p)) - 1.0 / (4 * kPi * 0.8)) < 1e-15, "");
    return o;
  });
}

void trivial_ward(Runner& run) {
  run("ward", "lambda = 0, density channel: S3 = G(k) G(k + p)", [] {
    auto sp = f55().spectrum(0.0);
    CurrentOperators cur(f55().model);
    MatsubaraGrid g{kBeta55, 64};
    MomentumTwoPoint S2(sp, g, f55().freq.m, 2);
    auto V = vertex_function(S2, cur, {{1, 2, 60, 7, 0}});
    Mat want = S2.block_at(kI * g.k0(60), 7, 7) * S2.block_at(kI * g.k0(61), 9, 9);
    const double r = (V.S3[0][0] - want).norm() / want.norm();
    Outcome o;
    return o.expect(r < 1e-12, "relative error " + num(r));
  });
  run("ward", "lambda = 0, eta = 2 pi / beta: current identity residual < 1e-9", [] {
    CurrentOperators cur(f55().model);
    auto tf = make_test_functions(f55().lat, make_profile("odd"), 0.4, 8.0);
    auto rep = check_current_ward(*f55().spectrum(0.0), cur, tf, kBeta55, kTwoPi / kBeta55);
    Outcome o;
    return o.expect(rep.max_residual < 1e-9, "max residual " + num(rep.max_residual));
  });
  run("ward", "lambda = 0, p = 0: both sides of the vertex identity vanish", [] {
    CurrentOperators cur(f55().model);
    MomentumTwoPoint S2(f55().spectrum(0.0), MatsubaraGrid{kBeta55, 256}, f55().freq.m, 2);
    auto V = vertex_function(S2, cur, {{0, 0, 260, f55().mode(+1).kF_index + 1, 0}});
    auto rep = check_vertex_ward(V, S2);
    Outcome o;
    return o.expect(rep.max_residual == 0.0, "residual " + num(rep.max_residual));
  });
  run("ward", "lambda = 0: zeta0 = v0 = 1 within 1e-3", [] {
    auto sp = f55().spectrum(0.0);
    CurrentOperators cur(f55().model);
    auto fit = fit55(0.0, +1);
    MomentumTwoPoint S2(sp, MatsubaraGrid{400.0, 200}, f55().freq.m, 2);
    ZetaWindow w;
    auto r = verify_zeta_relations(fit, f55().model, S2, cur, w);
    Outcome o;
    o.expect(std::abs(r.direct.zeta0 - 1.0) < 1e-3, "zeta0 " + num(r.direct.zeta0));
    return o.expect(std::abs(r.v0 - 1.0) < 1e-3, "v0 " + num(r.v0));
  });
}

void trivial_cli(Runner& run, const fs::path& tmp) {
  run("cli", "missing model.u names model.u", [] {
    ExperimentConfig c = parse_config("lattice.L1 = 13\n");
    Outcome o;
    try {
      validate(c, "spectrum");
      return o.expect(false, "no error");
    } catch (const InvalidConfig& e) {
      o.expect(std::string(e.what()).find("model.u") != std::string::npos, e.what());
      o.detail.clear();
      return o;
    }
  });
  run("cli", "lambda sweep reuses the lattice spectrum (2 cache hits)", [&] {
    ExperimentConfig c = tiny_config(tmp / "sweep");
    c.sweep.axis = "lambda";
    c.sweep.values = {0.0, 0.02, 0.05};
    c.sweep.command = "spectrum";
    RunContext ctx(c, "sweep");
    auto rep = run_sweep(ctx, c);
    ctx.finish(0);
    Outcome o;
    o.expect(rep.failed == 0, "failed points " + std::to_string(rep.failed));
    return o.expect(rep.cache_hits == 2, "hits " + std::to_string(rep.cache_hits));
  });
}

void invariants_lattice(Runner& run) {
  run("lattice", "full spectrum is the union of Bloch spectra", [] {
    auto m = build_qwz_model(-1.3, CylinderLattice(8, 4, 2));
    Eigen::SelfAdjointEigenSolver<Mat> es(full_hamiltonian(m));
    std::vector<double> all;
    for (int j = 0; j < 8; ++j) {
      Eigen::SelfAdjointEigenSolver<Mat> ek(bloch_transform(m, m.lattice.momentum(j)));
      for (Eigen::Index i = 0; i < ek.eigenvalues().size(); ++i) all.push_back(ek.eigenvalues()(i));
    }
    std::sort(all.begin(), all.end());
    double worst = 0;
    for (std::size_t i = 0; i < all.size(); ++i) worst = std::max(worst, std::abs(all[i] - es.eigenvalues()(i)));
    Outcome o;
    return o.expect(worst < 1e-10, "max difference " + num(worst));
  });
  run("lattice", "edge wavefunction decays exponentially at kF (u = -1.5)", [] {
    auto m = build_qwz_model(-1.5, CylinderLattice(89, 24, 2));
    auto modes = edge_spectrum(m, 0.0, 0.4);
    const auto& p = modes[0];
    auto it = std::find(p.k_index.begin(), p.k_index.end(), p.kF_index);
    Outcome o;
    if (it == p.k_index.end()) return o.expect(false, "kF not on the window");
    const Vec& xi = p.xi[it - p.k_index.begin()];
    std::vector<double> xs, ys;
    for (int x = 0; x < 12; ++x) {
      xs.push_back(x);
      ys.push_back(std::log(xi.segment(2 * x, 2).squaredNorm()));
    }
    auto f = fit_line(xs, ys);
    o.expect(f.slope < 0, "slope " + num(f.slope));
    return o.expect(f.r2 > 0.98, "r2 " + num(f.r2));
  });
  run("lattice", "mirroring x2 swaps the chiralities", [] {
    auto m = build_qwz_model(-1.3, CylinderLattice(55, 16, 2));
    auto a = edge_spectrum(m, 0.0, 0.4), b = edge_spectrum(mirror_x2(m), 0.0, 0.4);
    Outcome o;
    if (a.size() != 2 || b.size() != 2 || a[0].energy.size() != b[1].energy.size())
      return o.expect(false, "window sizes differ");
    double worst = 0;
    for (std::size_t i = 0; i < a[0].energy.size(); ++i) worst = std::max(worst, std::abs(a[0].energy[i] - b[1].energy[i]));
    o.expect(worst < 1e-8, "energy difference " + num(worst));
    return o.expect(std::abs(a[0].v - b[1].v) < 1e-8 && std::abs(a[1].v - b[0].v) < 1e-8, "velocities");
  });
}

void invariants_quasiperiodic(Runner& run) {
  run("quasiperiodic", "Diophantine bound on random n", [] {
    std::mt19937 rng(5);
    Outcome o;
    for (int L1 : {13, 21, 34, 55, 89, 144}) {
      auto f = best_frequency(golden_mean(), L1, 2.0);
      std::uniform_int_distribution<int> pick(1, L1 / 2);
      for (int t = 0; t < 50; ++t) {
        const int n = pick(rng);
        o.expect(torus_dist(n * f.alpha) >= f.c_est / (double(n) * n) * (1 - 1e-12), "L1 " + std::to_string(L1));
      }
    }
    o.detail.clear();
    return o;
  });
  run("quasiperiodic", "c_est over Fibonacci L1 stays above 0.05", [] {
    double cmin = 1e9;
    for (int L1 : {13, 21, 34, 55, 89, 144}) cmin = std::min(cmin, best_frequency(golden_mean(), L1, 2.0).c_est);
    Outcome o;
    return o.expect(cmin > 0.05, "min " + num(cmin));
  });
  run("quasiperiodic", "Fourier transform along x1 recovers the modes", [] {
    CylinderLattice lat(89, 3, 1);
    auto f = best_frequency(golden_mean(), 89, 2.0);
    auto p = default_potential(f, lat, 1.0, 6, 1.0, 0.5);
    RVec phi = build_potential(p, lat);
    double worst = 0;
    for (const auto& [n, v] : p.modes)
      for (int x2 = 0; x2 < 3; ++x2) {
        cplx acc = 0;
        for (int x1 = 0; x1 < 89; ++x1) acc += std::exp(-kI * (n * f.alpha * x1)) * phi(lat.index(x1, x2, 0));
        worst = std::max(worst, std::abs(acc / 89.0 - v(x2)));
      }
    Outcome o;
    return o.expect(worst < 1e-10, "max error " + num(worst));
  });
}

void invariants_greens(Runner& run) {
  run("greens", "spacetime two-point equals the resummed mixed representation", [] {
    CylinderLattice lat(13, 5, 2);
    auto m = build_qwz_model(-1.0, lat);
    auto f = best_frequency(golden_mean(), 13, 2.0);
    auto sp = std::make_shared<const Spectrum>(diagonalize(m, default_potential(f, lat, 0.05, 4, 1.0, 0.5)));
    MatsubaraGrid g{4.0, 1024};
    MomentumTwoPoint mt(sp, g, f.m, 13);
    const int D = lat.block(), L1 = lat.L1;
    const Eigen::Index N = lat.dim();
    double worst = 0;
    for (auto [tau, x1, y1] : {std::tuple{1.3, 4, 1}, std::tuple{0.4, 0, 6}}) {
      std::vector<int> rows, cols;
      for (int d = 0; d < D; ++d) {
        rows.push_back(lat.index(x1, 0, 0) + d);
        cols.push_back(lat.index(y1, 0, 0) + d);
      }
      Mat exact = disordered_two_point(*sp, g.beta, tau, 0.0, rows, cols);
      // per-eigenvalue frequency sums with the fourth-order tail correction
      Vec w(N);
      for (Eigen::Index a = 0; a < N; ++a) {
        const double xi = sp->energy(a) - sp->mu;
        cplx s = 0;
        for (int i = 0; i < g.size(); ++i) {
          const cplx z = kI * g.k0(i);
          const cplx asym = 1.0 / z - xi / (z * z) + xi * xi / (z * z * z) - xi * xi * xi / (z * z * z * z);
          s += std::exp(z * tau) * (1.0 / (z + xi) - asym);
        }
        w(a) = s / g.beta + tail_moment(1, g.beta, tau) - xi * tail_moment(2, g.beta, tau) +
               xi * xi * tail_moment(3, g.beta, tau) - xi * xi * xi * tail_moment(4, g.beta, tau);
      }
      Mat acc = Mat::Zero(D, D);
      for (int j = 0; j < L1; ++j)
        for (int n = 0; n < L1; ++n) {
          const int j2 = mt.shift(j, n);
          acc += std::exp(kI * (lat.momentum(j) * x1 - lat.momentum(j2) * y1)) * mt.weighted(w, j, j2) / double(L1);
        }
      worst = std::max(worst, max_abs(acc - exact));
    }
    Outcome o;
    return o.expect(worst < 1e-6, "max difference " + num(worst));
  });
  run("greens", "two-point decay: |S2| (1 + |(tau, x1)|) stays bounded at lambda = 0.05", [] {
    auto sp = f55().spectrum(0.05);
    Outcome o;
    for (double tau : {1.0, 4.0, kBeta55 / 2}) {
      auto c = edge_correlator(*sp, kBeta55, tau, +1, 3);
      const double t = std::min(tau, kBeta55 - tau);
      const double ref = c.blocks[0].norm() * (1 + t);
      double worst = 0;
      for (int x1 = 1; x1 <= 27; ++x1) {
        const double a = std::max(c.blocks[x1].norm(), c.blocks[55 - x1].norm());
        worst = std::max(worst, a * (1 + std::hypot(t, double(x1))) / ref);
      }
      o.expect(worst < 3.0, "tau " + num(tau) + ": " + num(worst));
    }
    return o;
  });
  run("greens", "Fermi function and time weights finite up to beta = 1024", [] {
    Outcome o;
    for (double bt : {1.0, 64.0, 1024.0})
      for (double xi : {-10.0, -1e-3, 0.0, 2.5, 10.0}) {
        o.expect(std::isfinite(fermi(bt, xi)), "fermi");
        for (double tau : {-bt + 1e-9, -0.3 * bt, 0.0, 0.5 * bt, bt - 1e-9})
          o.expect(std::isfinite(time_weight(bt, xi, tau)), "time weight");
      }
    o.detail.clear();
    return o;
  });
}

void invariants_rgflow(Runner& run) {
  run("rgflow", "single-scale propagator: bound, conjugation, support", [] {
    auto c = build_cascade(4096.0, 0.1, 2.0);
    ScaleVelocities v{1.0, 0.8, 0.01, -0.02};
    std::vector<double> bound;
    Outcome o;
    for (int h = 0; h >= c.h_beta + 1; --h) {
      double mx = 0;
      const double R = 0.1 * std::pow(2.0, h);
      for (int i = 1; i <= 60; ++i)
        for (int k = 0; k < 24; ++k) {
          const double rad = R * (0.2 + 5.0 * i / 60.0), ang = kTwoPi * k / 24;
          const double q0 = rad * std::cos(ang), q1 = rad * std::sin(ang) / 0.8;
          auto p = scale_propagator(c, h, v, q0, q1, 0.0);
          o.expect(std::abs(scale_propagator(c, h, v, -q0, q1, 0.0).single - std::conj(p.single)) < 1e-12, "conjugation");
          const double x = weighted_norm(1.0, 0.8, q0, q1);
          if (x < 0.9 * R / 2 || x > 1.1 * R * 2) o.expect(std::abs(p.single) < 1e-14, "support");
          mx = std::max(mx, std::abs(p.single));
        }
      bound.push_back(mx * std::pow(2.0, h));
    }
    const auto [lo, hi] = std::minmax_element(bound.begin(), bound.end());
    return o.expect(*hi / *lo < 1.5, "C spread " + num(*hi / *lo));
  });
  run("rgflow", "localize is a projection", [] {
    std::mt19937 rng(4);
    std::normal_distribution<double> nd;
    Mat V(9, 9);
    for (Eigen::Index i = 0; i < V.size(); ++i) V(i) = cplx(nd(rng), nd(rng));
    auto l0 = localize(SampledKernel{QGrid::stencil(48.0, 89), V}, 0, true);
    auto again = localize(l0.R, 0, true);
    Outcome o;
    return o.expect(std::abs(again.value) < 1e-12 && std::abs(again.d0) < 1e-10 && std::abs(again.d1) < 1e-10,
                    "");
  });
  run("rgflow", "off-diagonal first-order couplings decay in L2", [] {
    std::vector<double> L2s{8, 12, 16}, logs;
    for (double L2 : L2s) {
      CylinderLattice lat(21, int(L2), 2);
      auto m = build_qwz_model(-1.0, lat);
      auto modes = edge_spectrum(m, 0.0, 0.4);
      auto k = effective_potential_order1(default_potential(f21().freq, lat, 0.05, 8, 1.0, 0.5), modes, 21);
      double mx = 0;
      const Mat& K = k.K.at(0);
      for (std::size_t a = 0; a < k.sites.size(); ++a)
        for (std::size_t b = 0; b < k.sites.size(); ++b)
          if (k.sites[a].omega != k.sites[b].omega) mx = std::max(mx, std::abs(K(a, b)));
      logs.push_back(std::log(mx));
    }
    auto lf = fit_line(L2s, logs);
    Outcome o;
    return o.expect(lf.slope < 0, "log slope " + num(lf.slope));
  });
}

void invariants_scaling(Runner& run) {
  run("scaling", "remainder decays faster than the singular part", [] {
    auto fit = fit55(0.04, +1);
    auto rf = remainder_decay(*f55().spectrum(0.04), kBeta55, fit, CutoffFunction{});
    Outcome o;
    o.expect(rf.remainder_slope < -1.0, "remainder slope " + num(rf.remainder_slope));
    return o.expect(rf.remainder_slope < rf.singular_slope, "singular slope " + num(rf.singular_slope));
  });
  run("scaling", "eigenvector phases leave v0, v1, zeta, |Zn| invariant", [] {
    auto sp = f55().spectrum(0.04);
    auto rotated = std::make_shared<Spectrum>(*sp);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> ph(0, kTwoPi);
    for (Eigen::Index j = 0; j < rotated->U.cols(); ++j) rotated->U.col(j) *= std::exp(kI * ph(rng));
    auto c = edge_correlator(*sp, kBeta55, kBeta55 / 2, +1, 3);
    const double kF = extract_kF(c);
    FitOptions fo{2, 3, 4, 0.3};
    auto a = fit_velocities_and_Z(MomentumTwoPoint(sp, MatsubaraGrid{kBeta55, 256}, f55().freq.m, 4), kF, +1, fo);
    auto b = fit_velocities_and_Z(MomentumTwoPoint(rotated, MatsubaraGrid{kBeta55, 256}, f55().freq.m, 4), kF, +1, fo);
    auto da = dressed_vertices(a, f55().model), db = dressed_vertices(b, f55().model);
    Outcome o;
    o.expect(std::abs(a.v0 - b.v0) < 1e-10 && std::abs(a.v1 - b.v1) < 1e-10, "velocities");
    o.expect(std::abs(da.zeta0 - db.zeta0) < 1e-10 && std::abs(da.zeta1 - db.zeta1) < 1e-10, "vertices");
    for (const auto& [n, z] : a.Z) o.expect(std::abs(b.Z.at(n).norm() - z.norm()) < 1e-8, "|Z" + std::to_string(n) + "|");
    return o;
  });
  run("scaling", "v0, v1 smooth in lambda (quadratic fit, small cubic residual)", [] {
    std::vector<double> lam{0.0, 0.02, 0.04, 0.06}, v0, v1;
    for (double l : lam) {
      auto fit = fit55(l, +1);
      v0.push_back(fit.v0);
      v1.push_back(fit.v1);
    }
    Outcome o;
    for (const auto* v : {&v0, &v1}) {
      Eigen::Matrix<double, 4, 3> X;
      Eigen::Vector4d y;
      for (int i = 0; i < 4; ++i) {
        X.row(i) << 1.0, lam[i], lam[i] * lam[i];
        y(i) = (*v)[i];
      }
      const double res = (X * X.colPivHouseholderQr().solve(y) - y).norm();
      o.expect(res < 1e-3, "cubic residual " + num(res));
    }
    return o;
  });
}

void invariants_transport(Runner& run) {
  const double lambda = 0.05;
  run("transport", "reversed limit: chi(eta, theta) -> 0 as theta -> 0 at fixed eta", [&] {
    auto sp = f55().spectrum(lambda);
    CurrentOperators cur(f55().model);
    Outcome o;
    for (int nu : {0, 1}) {
      std::vector<double> a;
      for (double th : {0.4, 0.2, 0.12}) {
        auto tf = make_test_functions(f55().lat, make_profile("odd"), th, 8.0);
        a.push_back(std::abs(kubo_realtime(*sp, cur, tf, kBeta55, 0.3, nu)));
      }
      o.expect(a[1] < a[0] && a[2] < a[1] && a[2] < 0.25 * a[0],
               "nu " + std::to_string(nu) + ": " + num(a[0]) + ", " + num(a[1]) + ", " + num(a[2]));
    }
    return o;
  });
  run("transport", "two admissible profile pairs give the same G1", [&] {
    auto sp = f55().spectrum(lambda);
    CurrentOperators cur(f55().model);
    TransportOptions a;
    a.thetas = {0.4, 0.2};
    TransportOptions b = a;
    b.width = 4.0;
    auto ea = edge_coefficients(*sp, cur, kBeta55, a), eb = edge_coefficients(*sp, cur, kBeta55, b);
    const double d = std::abs(ea.G1.value - eb.G1.value), tol = ea.G1.uncertainty + eb.G1.uncertainty;
    Outcome o;
    return o.expect(d <= tol, "W = 3: " + num(ea.G1.value) + ", W = 4: " + num(eb.G1.value) + ", tolerance " + num(tol));
  });
  run("transport", "edge locality: rows beyond 4 decay lengths change chi by < 1%", [&] {
    auto sp = f55().spectrum(lambda);
    CurrentOperators cur(f55().model);
    const double len = 1.0 / f55().mode(+1).decay_rate;
    const double ell = std::max(2.0, std::ceil(4 * len));
    auto near = make_test_functions(f55().lat, make_profile("odd"), 0.2, ell);
    auto wide = make_test_functions(f55().lat, make_profile("odd"), 0.2, f55().lat.L2 / 2.0);
    const cplx a = kubo_realtime(*sp, cur, near, kBeta55, 0.04, 1);
    const cplx b = kubo_realtime(*sp, cur, wide, kBeta55, 0.04, 1);
    const double rel = std::abs(a - b) / std::abs(b);
    Outcome o;
    return o.expect(rel < 0.01, "ell " + num(ell) + " vs " + num(f55().lat.L2 / 2.0) + ": relative change " + num(rel));
  });
  run("transport", "response is real: |Im chi| < 1e-3 |chi|", [&] {
    auto sp = f55().spectrum(lambda);
    CurrentOperators cur(f55().model);
    TransportOptions a;
    a.thetas = {0.4, 0.2};
    auto ec = edge_coefficients(*sp, cur, kBeta55, a);
    double worst = 0;
    for (const auto& p : ec.points) worst = std::max(worst, std::abs(p.chi.imag()) / std::abs(p.chi));
    Outcome o;
    return o.expect(worst < 1e-3, "max |Im| / |chi| " + num(worst));
  });
}

void invariants_ward(Runner& run) {
  run("ward", "current identity holds for every lambda, theta, ell", [] {
    CurrentOperators cur(f55().model);
    double worst = 0;
    for (double lambda : {0.0, 0.05})
      for (double th : {0.4, 0.2})
        for (double ell : {4.0, 8.0}) {
          auto tf = make_test_functions(f55().lat, make_profile("odd"), th, ell);
          worst = std::max(worst, check_current_ward(*f55().spectrum(lambda), cur, tf, kBeta55, kTwoPi / kBeta55).max_residual);
        }
    Outcome o;
    return o.expect(worst < 1e-9, "max residual " + num(worst));
  });
  run("ward", "residuals invariant under eigenvector phases", [] {
    auto sp = f55().spectrum(0.05);
    auto rotated = std::make_shared<Spectrum>(*sp);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> ph(0, kTwoPi);
    for (Eigen::Index j = 0; j < rotated->U.cols(); ++j) rotated->U.col(j) *= std::exp(kI * ph(rng));
    CurrentOperators cur(f55().model);
    auto tf = make_test_functions(f55().lat, make_profile("odd"), 0.4, 8.0);
    auto a = check_current_ward(*sp, cur, tf, kBeta55, kTwoPi / kBeta55);
    auto b = check_current_ward(*rotated, cur, tf, kBeta55, kTwoPi / kBeta55);
    MatsubaraGrid g{kBeta55, 256};
    MomentumTwoPoint S2(sp, g, f55().freq.m, 2), S2r(rotated, g, f55().freq.m, 2);
    auto tr = default_ward_triples(S2, f55().mode(+1).kF_index, 7);
    auto va = check_vertex_ward(vertex_function(S2, cur, tr), S2);
    auto vb = check_vertex_ward(vertex_function(S2r, cur, tr), S2r);
    Outcome o;
    o.expect(b.max_residual < 1e-9 && std::abs(a.terms[1].commutator - b.terms[1].commutator) < 1e-10, "current");
    return o.expect(vb.max_residual < 1e-8 && va.max_residual < 1e-8, "vertex " + num(vb.max_residual));
  });
  run("ward", "commutator term bounded by C theta ell", [] {
    CurrentOperators cur(f55().model);
    auto sp = f55().spectrum(0.05);
    const double ell = 6.0;
    std::vector<double> lt, ld;
    double C = 0;
    for (double th : {0.4, 0.3, 0.2, 0.12}) {
      auto tf = make_test_functions(f55().lat, make_profile("odd"), th, ell);
      const double d = std::abs(check_current_ward(*sp, cur, tf, kBeta55, kTwoPi / kBeta55, {1}).terms[0].commutator);
      C = std::max(C, d / (th * ell));
      lt.push_back(std::log(th));
      ld.push_back(std::log(d));
    }
    const double slope = fit_line(lt, ld).slope;
    Outcome o;
    o.expect(slope > 0.8, "log-log slope " + num(slope));
    return o.expect(C < 10.0, "C " + num(C));
  });
}

void invariants_cli(Runner& run, const fs::path& tmp) {
  run("cli", "same config and seed give byte-identical CSV/JSON", [&] {
    std::map<std::string, std::string> trees[2];
    for (int k = 0; k < 2; ++k) {
      ExperimentConfig c = tiny_config(tmp / ("rerun" + std::to_string(k)));
      c.seed = 11;
      RunContext ctx(c, "ward");
      SharedCache cache;
      cmd_ward(ctx, c, cache);
      cmd_twopoint(ctx, c, cache);
      ctx.finish(0);
      trees[k] = read_tree(ctx.dir());
      trees[k].erase("manifest.json");
    }
    Outcome o;
    o.expect(!trees[0].empty(), "");
    return o.expect(trees[0] == trees[1], std::to_string(trees[0].size()) + " files compared");
  });
  run("cli", "every output file is in the manifest with its checksum", [&] {
    ExperimentConfig c = tiny_config(tmp / "manifest");
    RunContext ctx(c, "spectrum");
    SharedCache cache;
    cmd_spectrum(ctx, c, cache);
    ctx.finish(0);
    std::ifstream in(ctx.dir() / "manifest.json");
    json m = json::parse(in);
    std::map<std::string, std::string> listed;
    for (const auto& f : m["files"]) listed[f["path"].get<std::string>()] = f["sha256"].get<std::string>();
    Outcome o;
    int n = 0;
    for (const auto& [name, content] : read_tree(ctx.dir())) {
      if (name == "manifest.json") continue;
      ++n;
      auto it = listed.find(name);
      o.expect(it != listed.end() && it->second == sha256_hex(content), name);
    }
    o.detail.clear();
    return o.expect(n > 0 && n == static_cast<int>(listed.size()), std::to_string(n) + " files");
  });
}

}  // namespace

std::vector<SelftestCheck> run_selftest(std::ostream& log, const std::string& filter) {
  Runner run(log, filter);
  const fs::path tmp = fs::temp_directory_path() / ("edgeflow-selftest-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  trivial_lattice(run);
  trivial_quasiperiodic(run);
  trivial_greens(run);
  trivial_rgflow(run);
  trivial_scaling(run);
  trivial_transport(run);
  trivial_ward(run);
  trivial_cli(run, tmp);
  invariants_lattice(run);
  invariants_quasiperiodic(run);
  invariants_greens(run);
  invariants_rgflow(run);
  invariants_scaling(run);
  invariants_transport(run);
  invariants_ward(run);
  invariants_cli(run, tmp);
  fs::remove_all(tmp);
  return std::move(run.out);
}

}  // namespace edgeflow::cli
