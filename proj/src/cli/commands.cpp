#include <atomic>
#include <cmath>
#include <iostream>
#include <thread>

#include "edgeflow/cli.hpp"

namespace edgeflow::cli {

namespace fs = std::filesystem;

namespace {

struct Setup {
  CylinderLattice lat;
  HoppingModel model;
  RationalFrequency freq;
  QuasiPeriodicPotential pot;
  std::shared_ptr<const std::vector<EdgeModeData>> modes;
};

Setup make_setup(const ExperimentConfig& cfg, SharedCache& cache, int L2 = 0) {
  validate(cfg, "setup");
  Setup s;
  s.lat = CylinderLattice(cfg.lattice.L1, L2 > 0 ? L2 : cfg.lattice.L2, cfg.lattice.S);
  s.model = build_qwz_model(*cfg.model.u, s.lat, cfg.model.mu);
  s.freq = best_frequency(parse_frequency(cfg.disorder.alpha_inf), cfg.lattice.L1, cfg.disorder.tau);
  s.pot = default_potential(s.freq, s.lat, cfg.disorder.lambda, cfg.disorder.modes,
                            cfg.disorder.amplitude, cfg.disorder.decay);
  s.modes = cache.edge_modes(s.model, cfg.model.mu, cfg.model.delta);
  return s;
}

std::shared_ptr<const Spectrum> spectrum_for(const Setup& s, RunContext& ctx) {
  bool hit = false;
  auto sp = cached_spectrum(s.model, s.pot, {}, &hit);
  ctx.note("spectrum_cache_hit", hit);
  ctx.note("spectrum_hash", spectrum_hash(s.model, s.pot));
  return sp;
}

const EdgeModeData& mode_for(const Setup& s, int omega) {
  for (const auto& m : *s.modes)
    if (m.omega == omega) return m;
  throw AssumptionViolation("no edge mode with omega = " + std::to_string(omega) + " in the window");
}

const char* side(int omega) { return omega > 0 ? "plus" : "minus"; }

CutoffFunction cutoff(const ExperimentConfig& cfg) {
  return CutoffFunction{cfg.model.delta, cfg.grids.gamma};
}

MatsubaraGrid grid(const ExperimentConfig& cfg) { return MatsubaraGrid{cfg.grids.beta, cfg.grids.n_freq}; }

json limit_json(const LimitEstimate& e) {
  return {{"value", e.value},
          {"uncertainty", e.uncertainty},
          {"per_theta", e.per_theta},
          {"richardson", e.richardson}};
}

json cplx_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

}  // namespace

CommandResult cmd_spectrum(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache) {
  Setup s = make_setup(cfg, cache);
  CommandResult r;
  CsvTable modes({"omega", "j", "k1", "energy", "loc_weight"});
  json edge = json::array();
  for (const auto& m : *s.modes) {
    for (std::size_t i = 0; i < m.k_index.size(); ++i)
      modes.row().add(m.omega).add(m.k_index[i]).add(m.k1[i]).add(m.energy[i]).add(m.loc_weight[i]);
    edge.push_back({{"omega", m.omega},
                    {"kF", m.kF},
                    {"v", m.v},
                    {"kF_index", m.kF_index},
                    {"decay_rate", m.decay_rate},
                    {"window", m.k_index.size()}});
    r.summary.push_back({std::string("kF_") + side(m.omega), m.kF});
    r.summary.push_back({std::string("v_") + side(m.omega), m.v});
  }
  ctx.write_csv("edge_modes.csv", modes);

  auto sp = spectrum_for(s, ctx);
  CsvTable ev({"index", "energy"});
  for (Eigen::Index i = 0; i < sp->energy.size(); ++i) ev.row().add(static_cast<long long>(i)).add(sp->energy(i));
  ctx.write_csv("eigenvalues.csv", ev);

  std::vector<double> k1s;
  for (int j = 0; j < s.lat.L1; ++j) k1s.push_back(s.lat.momentum(j));
  auto ct = combes_thomas_fit(s.model, cutoff(cfg), grid(cfg), *s.modes, k1s);
  CsvTable dec({"separation", "log_max"});
  for (std::size_t i = 0; i < ct.separations.size(); ++i) dec.row().add(ct.separations[i]).add(ct.log_max[i]);
  ctx.write_csv("bulk_decay.csv", dec);

  long long below = 0;
  for (Eigen::Index i = 0; i < sp->energy.size(); ++i) below += sp->energy(i) < cfg.model.mu;
  ctx.write_json("spectrum.json",
                 {{"dim", s.lat.dim()},
                  {"alpha", s.freq.alpha},
                  {"m_alpha", s.freq.m},
                  {"c_est", s.freq.c_est},
                  {"energy_min", sp->energy.minCoeff()},
                  {"energy_max", sp->energy.maxCoeff()},
                  {"states_below_mu", below},
                  {"edge_modes", edge},
                  {"combes_thomas",
                   {{"c", ct.c}, {"C", ct.C}, {"r2", ct.r2}, {"envelope", ct.envelope}}}});
  r.summary.push_back({"ct_c", ct.c});
  r.summary.push_back({"ct_r2", ct.r2});
  r.summary.push_back({"ct_envelope", ct.envelope});
  return r;
}

CommandResult cmd_twopoint(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache) {
  Setup s = make_setup(cfg, cache);
  auto sp = spectrum_for(s, ctx);
  const double beta = cfg.grids.beta;
  CommandResult r;
  CsvTable amp({"omega", "j", "k1", "amplitude"});
  json out = json::array();
  for (int w : {+1, -1}) {
    auto c = edge_correlator(*sp, beta, beta / 2, w, 3);
    RVec a = edge_fourier_amplitude(c);
    for (int j = 0; j < s.lat.L1; ++j) amp.row().add(w).add(j).add(s.lat.momentum(j)).add(a(j));
    const double kF = extract_kF(c);
    auto sat = satellite_ratios(c, kF, s.freq.m);
    out.push_back({{"omega", w},
                   {"kF_lambda", kF},
                   {"kF_clean", mode_for(s, w).kF},
                   {"kF_index", sat.kF_index},
                   {"main", sat.main},
                   {"satellite_plus", sat.plus},
                   {"satellite_minus", sat.minus},
                   {"alpha", s.freq.alpha},
                   {"tau", beta / 2}});
    r.summary.push_back({std::string("kF_") + side(w), kF});
    r.summary.push_back({std::string("sat_plus_") + side(w), sat.plus});
    r.summary.push_back({std::string("sat_minus_") + side(w), sat.minus});
  }
  ctx.write_csv("edge_fourier.csv", amp);
  ctx.write_json("twopoint.json", out);
  return r;
}

CommandResult cmd_scaling(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache) {
  Setup s = make_setup(cfg, cache);
  auto sp = spectrum_for(s, ctx);
  const double beta = cfg.grids.beta;
  MomentumTwoPoint S2(sp, grid(cfg), s.freq.m, cfg.rg.n_keep);
  CommandResult r;
  CsvTable zt({"omega", "n", "x2", "sigma", "re", "im"});
  json out = json::array();
  for (int w : {+1, -1}) {
    const double kF = extract_kF(edge_correlator(*sp, beta, beta / 2, w, 3));
    auto fit = fit_velocities_and_Z(S2, kF, w);
    auto dv = dressed_vertices(fit, s.model);
    auto rem = remainder_decay(*sp, beta, fit, cutoff(cfg));
    json zn = json::object();
    for (const auto& [n, z] : fit.Z) {
      zn[std::to_string(n)] = z.norm();
      for (Eigen::Index i = 0; i < z.size(); ++i)
        zt.row().add(w).add(n).add(static_cast<int>(i / s.lat.S)).add(static_cast<int>(i % s.lat.S))
            .add(z(i).real()).add(z(i).imag());
    }
    out.push_back({{"omega", w},
                   {"kF_lambda", fit.kF_lambda},
                   {"v0", fit.v0},
                   {"v1", fit.v1},
                   {"v_clean", mode_for(s, w).v},
                   {"zeta0", dv.zeta0},
                   {"zeta1", cplx_json(dv.zeta1)},
                   {"Z_norms", zn},
                   {"fit_residual", fit.fit_residual},
                   {"rank_ratio", fit.rank_ratio},
                   {"z_spread", fit.z_spread},
                   {"remainder", {{"singular_slope", rem.singular_slope},
                                  {"remainder_slope", rem.remainder_slope},
                                  {"r2", rem.r2}}}});
    r.summary.push_back({std::string("v0_") + side(w), fit.v0});
    r.summary.push_back({std::string("v1_") + side(w), fit.v1});
    r.summary.push_back({std::string("zeta1_") + side(w), dv.zeta1.real()});
  }
  ctx.write_csv("Z.csv", zt);
  ctx.write_json("scaling.json", out);
  return r;
}

CommandResult cmd_transport(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache) {
  Setup s = make_setup(cfg, cache);
  auto sp = spectrum_for(s, ctx);
  CurrentOperators cur(s.model);
  CommandResult r;
  CsvTable pts({"profile", "nu", "theta", "eta", "chi_re", "chi_im", "G"});
  json out = json::array();
  for (const auto& preset : cfg.transport.profiles) {
    TransportOptions opt;
    opt.preset = preset;
    opt.width = cfg.transport.width;
    opt.thetas = cfg.transport.thetas;
    opt.eta_rule = cfg.transport.eta_rule;
    opt.eta_value = cfg.transport.eta;
    opt.ell = cfg.transport.ell;
    auto ec = edge_coefficients(*sp, cur, cfg.grids.beta, opt);
    for (const auto& p : ec.points)
      pts.row().add(preset).add(p.nu).add(p.theta).add(p.eta).add(p.chi.real()).add(p.chi.imag()).add(p.G);
    json o = {{"profile", preset},
              {"G0", limit_json(ec.G0)},
              {"G1", limit_json(ec.G1)},
              {"two_pi_G0", kTwoPi * ec.G0.value},
              {"two_pi_G1", kTwoPi * ec.G1.value},
              {"thetas", ec.thetas},
              {"dropped_thetas", ec.dropped_thetas},
              {"pairing", ec.pairing}};
    if (ec.G0_half) o["G0_half_eta"] = limit_json(*ec.G0_half);
    if (ec.G1_half) o["G1_half_eta"] = limit_json(*ec.G1_half);
    out.push_back(o);
    const std::string pre = cfg.transport.profiles.size() > 1 ? preset + "_" : "";
    r.summary.push_back({pre + "G0", ec.G0.value});
    r.summary.push_back({pre + "G0_err", ec.G0.uncertainty});
    r.summary.push_back({pre + "G1", ec.G1.value});
    r.summary.push_back({pre + "G1_err", ec.G1.uncertainty});
  }
  ctx.write_csv("transport_points.csv", pts);
  ctx.write_json("transport.json", out);
  return r;
}

CommandResult cmd_transport_point(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache) {
  Setup s = make_setup(cfg, cache);
  const double theta = cfg.transport.thetas.front();
  if (theta * s.lat.L1 < kTwoPi)
    throw AssumptionViolation("theta L1 < 2 pi: the profile is wider than the ring");
  auto sp = spectrum_for(s, ctx);
  CurrentOperators cur(s.model);
  const std::string preset = cfg.transport.profiles.front();
  auto tf = make_test_functions(s.lat, make_profile(preset, cfg.transport.width), theta, cfg.transport.ell);
  const double eta = cfg.transport.eta_rule == "sq" ? theta * theta : cfg.transport.eta;
  CommandResult r;
  CsvTable pts({"profile", "nu", "theta", "eta", "chi_re", "chi_im", "G"});
  json o = {{"profile", preset}, {"theta", theta}, {"eta", eta}, {"pairing", tf.pairing}};
  for (int nu : {0, 1}) {
    const cplx chi = kubo_realtime(*sp, cur, tf, cfg.grids.beta, eta, nu);
    const double G = chi.real() / tf.pairing;
    pts.row().add(preset).add(nu).add(theta).add(eta).add(chi.real()).add(chi.imag()).add(G);
    o["G" + std::to_string(nu)] = G;
    r.summary.push_back({"G" + std::to_string(nu), G});
  }
  ctx.write_csv("transport_points.csv", pts);
  ctx.write_json("transport.json", o);
  return r;
}

CommandResult cmd_ward(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache) {
  Setup s = make_setup(cfg, cache);
  auto sp = spectrum_for(s, ctx);
  CurrentOperators cur(s.model);
  const double beta = cfg.grids.beta, eta = kTwoPi / beta;
  const std::string preset = cfg.transport.profiles.front();

  json current_res = json::array();
  std::vector<double> used;
  double current_max = 0.0;
  CsvTable ct({"theta", "nu", "density_re", "density_im", "gradient_re", "gradient_im",
               "commutator_re", "commutator_im", "residual"});
  for (double theta : cfg.transport.thetas) {
    if (theta * s.lat.L1 < kTwoPi) continue;
    auto tf = make_test_functions(s.lat, make_profile(preset, cfg.transport.width), theta, cfg.transport.ell);
    auto rep = check_current_ward(*sp, cur, tf, beta, eta);
    for (const auto& t : rep.terms) {
      current_res.push_back(t.residual);
      ct.row().add(theta).add(t.nu).add(t.density.real()).add(t.density.imag()).add(t.gradient.real())
          .add(t.gradient.imag()).add(t.commutator.real()).add(t.commutator.imag()).add(t.residual);
    }
    current_max = std::max(current_max, rep.max_residual);
    used.push_back(theta);
  }
  if (used.empty()) throw AssumptionViolation("no theta in transport.thetas resolves the ring (theta L1 >= 2 pi)");

  MomentumTwoPoint S2(sp, grid(cfg), s.freq.m, cfg.rg.n_keep);
  const int kFi = mode_for(s, +1).kF_index;
  auto triples = default_ward_triples(S2, kFi, cfg.seed);
  auto V = vertex_function(S2, cur, triples);
  auto vr = check_vertex_ward(V, S2);
  CsvTable vt({"p0", "p1", "k0", "k1", "m", "residual", "scale"});
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    vt.row().add(t.p0).add(t.p1).add(t.k0).add(t.k1).add(t.m).add(vr.residuals[i]).add(vr.scales[i]);
  }
  const double q_lo = kTwoPi / beta;
  json out = json::array();
  out.push_back({{"identity", "current-current"},
                 {"residuals", current_res},
                 {"max_residual", current_max},
                 {"window_params",
                  {{"beta", beta}, {"eta", eta}, {"thetas", used}, {"ell", cfg.transport.ell},
                   {"profile", preset}, {"nus", {0, 1}}}}});
  out.push_back({{"identity", "vertex"},
                 {"residuals", vr.residuals},
                 {"max_residual", vr.max_residual},
                 {"window_params",
                  {{"beta", beta}, {"q_lo", q_lo}, {"q_hi", std::max(0.1, 4 * q_lo)},
                   {"count", triples.size()}, {"seed", cfg.seed}, {"kF_index", kFi}}}});
  ctx.write_csv("ward_current.csv", ct);
  ctx.write_csv("ward_vertex.csv", vt);
  ctx.write_json("ward.json", out);
  return {{{"current_max_residual", current_max}, {"vertex_max_residual", vr.max_residual}}};
}

CommandResult cmd_rgflow(RunContext& ctx, const ExperimentConfig& cfg, SharedCache& cache) {
  RgOptions opt;
  opt.beta = cfg.rg.beta;
  opt.gamma = cfg.grids.gamma;
  opt.s_max = cfg.rg.s_max;
  opt.max_sweeps = cfg.rg.max_sweeps;

  auto solve = [&](int L2) {
    Setup s = make_setup(cfg, cache, L2);
    EdgeRG rg(s.model, s.pot, *s.modes, cfg.model.delta, opt);
    return std::make_pair(solve_nu_fixed_point(rg), rg.cascade().h_beta);
  };
  auto [fp, h_beta] = solve(cfg.lattice.L2);

  CsvTable traj({"h", "omega", "omega_prime", "v0", "v1", "nu_re", "nu_im", "v0_im", "v1_im"});
  for (const auto& sc : fp.pass.rcc.scales)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        traj.row().add(sc.h).add(a == 0 ? 1 : -1).add(b == 0 ? 1 : -1).add(sc.v0(a, b).real())
            .add(sc.v1(a, b).real()).add(sc.nu(a, b).real()).add(sc.nu(a, b).imag())
            .add(sc.v0(a, b).imag()).add(sc.v1(a, b).imag());
  ctx.write_csv("rgflow_trajectory.csv", traj);

  json log = json::array();
  for (const auto& l : fp.log)
    log.push_back({{"iteration", l.iteration},
                   {"sup_distance", l.sup_distance},
                   {"contraction_estimate", number_or_null(l.contraction)}});
  json fits = json::array();
  CommandResult r;
  for (int w = 0; w < 2; ++w) {
    ThetaFit tf;
    try {
      tf = fit_theta(fp.pass.rcc, cfg.disorder.lambda, w);
    } catch (const Error&) {
    }
    fits.push_back({{"omega", w == 0 ? 1 : -1},
                    {"theta", number_or_null(tf.theta)},
                    {"C", number_or_null(tf.C)},
                    {"r2", tf.r2},
                    {"points", tf.points}});
    r.summary.push_back({std::string("theta_") + (w == 0 ? "plus" : "minus"), tf.theta});
  }
  double v1_drift = 0.0;
  for (const auto& sc : fp.pass.rcc.scales)
    for (int w = 0; w < 2; ++w)
      v1_drift = std::max(v1_drift, std::abs(sc.v1(w, w) - fp.pass.rcc.at(0).v1(w, w)));

  json offdiag = json::array();
  if (!cfg.rg.scan_L2.empty()) {
    CsvTable od({"L2", "nu_pm_abs", "v0_pm_abs", "v1_pm_abs"});
    std::vector<double> xs, ys;
    for (int L2 : cfg.rg.scan_L2) {
      auto res = L2 == cfg.lattice.L2 ? fp : solve(L2).first;
      const auto& c0 = res.pass.rcc.at(0);
      const double nu = std::abs(c0.nu(0, 1));
      od.row().add(L2).add(nu).add(std::abs(c0.v0(0, 1))).add(std::abs(c0.v1(0, 1)));
      offdiag.push_back({{"L2", L2}, {"nu_pm_abs", nu}});
      if (nu > 0) {
        xs.push_back(L2);
        ys.push_back(std::log(nu));
      }
    }
    ctx.write_csv("rgflow_offdiag.csv", od);
    double slope = std::numeric_limits<double>::quiet_NaN();
    if (xs.size() >= 2) slope = fit_line(xs, ys).slope;
    r.summary.push_back({"offdiag_log_slope", slope});
    ctx.note("offdiag_log_slope", number_or_null(slope));
  }

  ctx.write_json("rgflow_fixed_point.json",
                 {{"iterations", log},
                  {"converged", fp.converged},
                  {"contraction", number_or_null(fp.contraction)},
                  {"nu_omega", fp.nu_omega},
                  {"kF_lambda", fp.kF_lambda},
                  {"h_beta", h_beta},
                  {"rg_beta", cfg.rg.beta},
                  {"s_max", cfg.rg.s_max},
                  {"support_violations", fp.pass.support_violations},
                  {"v1_max_drift", v1_drift},
                  {"theta_fits", fits},
                  {"offdiag", offdiag}});
  r.summary.push_back({"contraction", fp.contraction});
  r.summary.push_back({"nu_omega_plus", fp.nu_omega[0]});
  r.summary.push_back({"nu_omega_minus", fp.nu_omega[1]});
  r.summary.push_back({"v1_max_drift", v1_drift});
  return r;
}

CommandResult cmd_bubble(RunContext& ctx, const ExperimentConfig& cfg, SharedCache&) {
  const auto& b = cfg.bubble;
  const CutoffFunction chi = cutoff(cfg);
  const int lo = std::min(2, b.levels - 1);
  CsvTable t({"beta", "L1", "eta", "p", "re", "im", "closed_re", "closed_im", "abs_error",
              "rel_error", "error_ratio"});
  json rows = json::array();
  double prev = std::numeric_limits<double>::quiet_NaN();
  CommandResult r;
  for (int i = 0; i < b.levels; ++i) {
    const double f = std::ldexp(1.0, i - lo);
    const double beta = cfg.grids.beta * f;
    const int L1 = static_cast<int>(std::lround(cfg.lattice.L1 * f));
    const double eta = b.eta_min ? kTwoPi / beta : cfg.transport.eta;
    const cplx val = bubble_finite(b.v0, b.v1, chi, beta, L1, eta, b.p);
    const cplx ref = bubble_closed_form(b.v0, b.v1, eta, b.p);
    const double err = std::abs(val - ref), rel = err / std::abs(ref);
    const double ratio = err / prev;
    t.row().add(beta).add(L1).add(eta).add(b.p).add(val.real()).add(val.imag()).add(ref.real())
        .add(ref.imag()).add(err).add(rel).add(ratio);
    rows.push_back({{"beta", beta}, {"L1", L1}, {"eta", eta}, {"value", cplx_json(val)},
                    {"closed_form", cplx_json(ref)}, {"rel_error", rel},
                    {"error_ratio", number_or_null(ratio)}});
    if (i == lo) {
      r.summary.push_back({"rel_error", rel});
      r.summary.push_back({"re", val.real()});
    }
    prev = err;
  }
  ctx.write_csv("bubble.csv", t);
  ctx.write_json("bubble.json", {{"v0", b.v0}, {"v1", b.v1}, {"p", b.p}, {"eta_min", b.eta_min},
                                 {"delta", chi.delta}, {"gamma", chi.gamma}, {"rows", rows}});
  return r;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const AssumptionViolation*>(&e)) return 3;
  return 4;
}

namespace {

using CommandFn = CommandResult (*)(RunContext&, const ExperimentConfig&, SharedCache&);

CommandFn lookup(const std::string& name) {
  static const std::map<std::string, CommandFn> t = {
      {"spectrum", cmd_spectrum}, {"twopoint", cmd_twopoint},   {"scaling", cmd_scaling},
      {"transport", cmd_transport}, {"ward", cmd_ward},         {"rgflow", cmd_rgflow},
      {"bubble", cmd_bubble},     {"transport-point", cmd_transport_point}};
  auto it = t.find(name);
  return it == t.end() ? nullptr : it->second;
}

ExperimentConfig point_config(const ExperimentConfig& cfg, double x) {
  ExperimentConfig c = cfg;
  const std::string v = format_double(x);
  if (cfg.sweep.axis == "lambda") set_value(c, "disorder.lambda", v);
  if (cfg.sweep.axis == "beta") set_value(c, "grids.beta", v);
  if (cfg.sweep.axis == "L") set_value(c, "lattice.L1", v);
  if (cfg.sweep.axis == "theta") c.transport.thetas = {x};
  return c;
}

}  // namespace

SweepReport run_sweep(RunContext& ctx, const ExperimentConfig& cfg) {
  const auto& values = cfg.sweep.values;
  const std::string command = cfg.sweep.axis == "theta" ? "transport-point" : cfg.sweep.command;
  CommandFn fn = lookup(command);
  SharedCache cache;

  struct Point {
    int status = 0;
    std::string error;
    Summary summary;
    std::vector<OutputFile> files;
  };
  std::vector<Point> pts(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < values.size();) {
      const std::string sub = "point-" + std::to_string(i);
      try {
        ExperimentConfig c = point_config(cfg, values[i]);
        validate(c, command);
        RunContext pc(c, command, ctx.dir() / sub);
        try {
          pts[i].summary = fn(pc, c, cache).summary;
          pc.finish(0);
        } catch (const std::exception& e) {
          pc.finish(exit_code_for(e), e.what());
          throw;
        }
        for (auto f : pc.files()) {
          f.path = sub + "/" + f.path;
          pts[i].files.push_back(f);
        }
        pts[i].files.push_back({sub + "/manifest.json", file_sha256(pc.dir() / "manifest.json"),
                                fs::file_size(pc.dir() / "manifest.json")});
      } catch (const std::exception& e) {
        pts[i].status = exit_code_for(e);
        pts[i].error = e.what();
      }
    }
  };
  const int nw = std::max(1, std::min<int>(cfg.sweep.workers, static_cast<int>(values.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<std::string> keys;
  for (const auto& p : pts)
    for (const auto& [k, v] : p.summary)
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  std::vector<std::string> header{cfg.sweep.axis, "status", "exit_code", "error"};
  header.insert(header.end(), keys.begin(), keys.end());
  CsvTable t(header);
  SweepReport rep;
  json jp = json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    t.row().add(values[i]).add(p.status == 0 ? "ok" : "failed").add(p.status).add(p.error);
    for (const auto& k : keys) {
      double v = std::numeric_limits<double>::quiet_NaN();
      for (const auto& [kk, vv] : p.summary)
        if (kk == k) v = vv;
      t.add(p.status == 0 ? format_double(v) : "");
    }
    jp.push_back({{"value", values[i]}, {"status", p.status}, {"error", p.error},
                  {"dir", "point-" + std::to_string(i)}});
    ++rep.points;
    rep.failed += p.status != 0;
    for (const auto& f : p.files) ctx.record(f.path);
  }
  rep.cache_hits = cache.hits();

  json summary = {{"axis", cfg.sweep.axis},
                  {"command", command},
                  {"values", values},
                  {"points", jp},
                  {"failed", rep.failed},
                  {"cache_hits", cache.hits()},
                  {"cache_misses", cache.misses()}};
  if (cfg.sweep.axis == "theta") {
    std::vector<std::pair<double, std::size_t>> ok;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (pts[i].status == 0) ok.push_back({values[i], i});
    std::sort(ok.begin(), ok.end(), [](auto& a, auto& b) { return a.first > b.first; });
    json ex = json::object();
    for (int nu : {0, 1}) {
      std::vector<double> th, g;
      for (auto [x, i] : ok) {
        th.push_back(x);
        g.push_back(pts[i].summary[nu].second);
      }
      try {
        ex["G" + std::to_string(nu)] = limit_json(theta_limit(th, g));
      } catch (const Error& e) {
        ex["G" + std::to_string(nu)] = {{"error", e.what()}};
      }
    }
    summary["extrapolation"] = ex;
  }
  ctx.write_csv("sweep.csv", t);
  ctx.write_json("sweep.json", summary);
  ctx.note("cache_hits", cache.hits());
  if (rep.points > 0 && rep.failed == rep.points) throw NumericalFailure("sweep: every point failed");
  return rep;
}

int run(const std::string& command, const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
  std::unique_ptr<RunContext> ctx;
  try {
    validate(cfg, command);
    if (command != "selftest" && command != "bubble")
      for (const auto& w : aspect_warnings(cfg)) err << "warning: " << w << "\n";
    ctx = std::make_unique<RunContext>(cfg, command);
    if (command == "selftest") {
      auto checks = run_selftest(log);
      CsvTable t({"group", "check", "pass", "seconds", "detail"});
      int failed = 0;
      for (const auto& c : checks) {
        t.row().add(c.group).add(c.name).add(c.pass ? "true" : "false").add(c.seconds).add(c.detail);
        failed += !c.pass;
      }
      ctx->write_csv("selftest.csv", t);
      ctx->note("checks", checks.size());
      ctx->note("failed", failed);
      log << (failed == 0 ? "selftest: all " : "selftest: FAILED ") << (failed == 0 ? checks.size() : failed)
          << (failed == 0 ? " checks passed\n" : " checks\n");
      const int code = failed == 0 ? 0 : 4;
      ctx->finish(code);
      return code;
    }
    if (command == "sweep") {
      auto rep = run_sweep(*ctx, cfg);
      log << "sweep: " << rep.points - rep.failed << "/" << rep.points << " points ok, cache hits "
          << rep.cache_hits << "\n";
    } else {
      CommandFn fn = lookup(command);
      if (!fn) throw InvalidConfig({{"command", "unknown subcommand '" + command + "'"}});
      SharedCache cache;
      auto res = fn(*ctx, cfg, cache);
      for (const auto& [k, v] : res.summary) log << command << ": " << k << " = " << format_double(v) << "\n";
    }
    ctx->finish(0);
    log << "outputs: " << ctx->dir().string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "error: " << e.what() << "\n";
    if (ctx) ctx->finish(code, e.what());
    return code;
  }
}

}  // namespace edgeflow::cli
