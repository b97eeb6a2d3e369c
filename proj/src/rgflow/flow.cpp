#include <algorithm>
#include <cmath>
#include <set>

#include "edgeflow/rgflow.hpp"

namespace edgeflow {

BulkChains::BulkChains(const HoppingModel& m, const QuasiPeriodicPotential& pot,
                       const std::vector<EdgeModeData>& modes, const CutoffFunction& chi,
                       int s_max, Exec exec)
    : pot_(pot), modes_(modes), chi_(chi), L1_(m.lattice.L1), D_(m.lattice.block()),
      s_max_(s_max), n_phi_(0), m_alpha_(pot.freq.m), mu_(m.mu), exec_(exec) {
  if (s_max < 1 || s_max > 3) throw ConfigError("BulkChains: s_max must be 1, 2 or 3");
  for (const auto& [n, phi] : pot.modes) {
    if (phi.size() != D_) throw ConfigError("BulkChains: potential modes do not match the block size");
    n_phi_ = std::max(n_phi_, std::abs(n));
  }
  H_.resize(L1_);
  for (int j = 0; j < L1_; ++j) H_[j] = bloch_transform(m, m.lattice.momentum(j));
}

int BulkChains::shift(int j, int n) const {
  const long long l1 = L1_;
  return static_cast<int>(((j + n * m_alpha_) % l1 + l1) % l1);
}

Mat BulkChains::bulk(double k0, int j) const {
  // LU of the banded matrix keeps far entries accurate relative to their size
  Mat A = H_[j];
  A.diagonal().array() += kI * k0 - mu_;
  Mat G = A.partialPivLu().inverse();
  const double c0 = chi_(k0);
  if (c0 == 0.0) return G;
  for (const auto& mode : modes_)
    for (std::size_t i = 0; i < mode.k_index.size(); ++i) {
      if (mode.k_index[i] != j) continue;
      const double e = mode.energy[i];
      G -= (c0 * chi_(e - mu_) / (kI * k0 + e - mu_)) * (mode.xi[i] * mode.xi[i].adjoint());
    }
  return G;
}

std::vector<Mat> BulkChains::bulk_all(double k0) const {
  std::vector<Mat> out(L1_);
#pragma omp parallel for schedule(dynamic) if (exec_ == Exec::parallel)
  for (int j = 0; j < L1_; ++j) out[j] = bulk(k0, j);
  return out;
}

Vec BulkChains::node(int n) const {
  auto it = pot_.modes.find(-n);
  if (it == pot_.modes.end()) return Vec::Zero(D_);
  return -pot_.lambda * it->second;
}

Mat BulkChains::chain(const std::vector<int>& shifts, double k0, int j) const {
  const int s = static_cast<int>(shifts.size());
  if (s < 1 || s > s_max_) throw ConfigError("chain: order must lie in [1, s_max]");
  Mat M = node(shifts[0]).asDiagonal();
  int jj = shift(j, shifts[0]);
  for (int v = 1; v < s; ++v) {
    M = M * bulk(k0, jj) * node(shifts[v]).asDiagonal();
    jj = shift(jj, shifts[v]);
  }
  return M;
}

std::vector<Mat> BulkChains::potential_row(const std::vector<Mat>& Gb, int j) const {
  if (static_cast<int>(Gb.size()) != L1_) throw ConfigError("potential_row: need G_b on every momentum");
  std::vector<Mat> total(L1_), cur(L1_);
  for (int n = -n_phi_; n <= n_phi_; ++n) {
    if (!pot_.modes.count(-n)) continue;
    int j2 = shift(j, n);
    if (cur[j2].size() == 0) cur[j2] = Mat::Zero(D_, D_);
    cur[j2].diagonal() += node(n);
  }
  total = cur;
  for (int s = 2; s <= s_max_; ++s) {
    std::vector<Mat> next(L1_);
    for (int j2 = 0; j2 < L1_; ++j2) {
      if (cur[j2].size() == 0) continue;
      const Mat RG = cur[j2] * Gb[j2];
      for (int n = -n_phi_; n <= n_phi_; ++n) {
        if (!pot_.modes.count(-n)) continue;
        int j3 = shift(j2, n);
        if (next[j3].size() == 0) next[j3] = Mat::Zero(D_, D_);
        next[j3] += RG * node(n).asDiagonal();
      }
    }
    for (int j3 = 0; j3 < L1_; ++j3) {
      if (next[j3].size() == 0) continue;
      if (total[j3].size() == 0) total[j3] = Mat::Zero(D_, D_);
      total[j3] += next[j3];
    }
    cur = std::move(next);
  }
  for (auto& b : total)
    if (b.size() == 0) b = Mat::Zero(D_, D_);
  return total;
}

Mat BulkChains::full_bulk(const std::vector<Mat>& Gb) const {
  Mat G = Mat::Zero(L1_ * D_, L1_ * D_);
  for (int j = 0; j < L1_; ++j) G.block(j * D_, j * D_, D_, D_) = Gb[j];
  return G;
}

Mat BulkChains::full_vertex() const {
  Mat V = Mat::Zero(L1_ * D_, L1_ * D_);
  for (int j = 0; j < L1_; ++j)
    for (int n = -n_phi_; n <= n_phi_; ++n) {
      if (!pot_.modes.count(-n)) continue;
      int j2 = shift(j, n);
      V.block(j * D_, j2 * D_, D_, D_).diagonal() += node(n);
    }
  return V;
}

namespace {

const EdgeModeData& mode_of(const std::vector<EdgeModeData>& modes, int omega) {
  for (const auto& m : modes)
    if (m.omega == omega) return m;
  throw ConfigError("EdgeRG: no edge mode with chirality " + std::to_string(omega));
}

struct Local {
  Mat2 L0 = Mat2::Zero(), d0 = Mat2::Zero(), d1 = Mat2::Zero();
};

// Per-frequency matrices over the sites; site_at[w][r] gives the site index.
struct SiteTable {
  std::array<std::map<int, int>, 2> at;
  int get(int w, int r) const {
    auto it = at[w].find(r);
    if (it == at[w].end()) throw ConfigError("EdgeRG: edge window lacks the localization points");
    return it->second;
  }
};

Local local_parts(const std::map<int, Mat>& X, const SiteTable& st, double beta, int L1) {
  Local out;
  const Mat& P = X.at(0);
  const Mat& N = X.at(-1);
  for (int w = 0; w < 2; ++w)
    for (int u = 0; u < 2; ++u) {
      const int a0 = st.get(w, 0), b0 = st.get(u, 0), a1 = st.get(w, -1), b1 = st.get(u, -1);
      SampledKernel s;
      s.grid.beta = beta;
      s.grid.L1 = L1;
      s.grid.m = {0, -1};
      s.grid.r = {0, -1};
      s.values.resize(2, 2);
      s.values << P(a0, b0), P(a1, b1), N(a0, b0), N(a1, b1);
      auto lp = localize(s, 0, w == u);
      out.L0(w, u) = lp.value;
      out.d0(w, u) = lp.d0;
      out.d1(w, u) = lp.d1;
    }
  return out;
}

}  // namespace

EdgeRG::EdgeRG(const HoppingModel& m, const QuasiPeriodicPotential& pot,
               const std::vector<EdgeModeData>& modes, double edge_delta, const RgOptions& opt,
               Exec exec)
    : model_(m),
      cascade_(build_cascade(opt.beta, opt.delta > 0 ? opt.delta : edge_delta / std::pow(opt.gamma, 3),
                             opt.gamma)),
      edge_chi_{edge_delta, opt.gamma},
      opt_(opt),
      bulk_(m, pot, modes, CutoffFunction{edge_delta, opt.gamma}, opt.s_max, exec),
      exec_(exec) {
  mode_of(modes, +1);
  mode_of(modes, -1);
}

double EdgeRG::fermi_momentum(int w, double nu_omega) const {
  const auto& mode = mode_of(bulk_.modes(), w == 0 ? +1 : -1);
  const double mu = model_.mu;
  for (std::size_t i = 0; i + 1 < mode.energy.size(); ++i) {
    const double a = mode.energy[i] - mu + nu_omega, b = mode.energy[i + 1] - mu + nu_omega;
    if (a == 0.0) return wrap_2pi(mode.k1[i]);
    if (a * b < 0.0) return wrap_2pi(mode.k1[i] + (mode.k1[i + 1] - mode.k1[i]) * a / (a - b));
  }
  throw AssumptionViolation("EdgeRG: counterterm moves the Fermi point out of the edge window");
}

FlowPass EdgeRG::run_pass(const std::vector<std::array<double, 2>>& nu,
                          std::array<double, 2> nu_omega, const int* two_point_m,
                          bool keep_kernels) const {
  const ScaleCascade& c = cascade_;
  const int L1 = bulk_.L1(), D = bulk_.D(), hb = c.h_beta;
  const double beta = c.beta, gamma = c.gamma, mu = model_.mu, dk = kTwoPi / L1;
  if (!nu.empty() && static_cast<int>(nu.size()) != 1 - hb)
    throw ConfigError("run_pass: imposed nu must cover h = 0 .. h_beta");

  FlowPass pass;
  pass.rcc.gamma = gamma;
  pass.rcc.h_beta = hb;
  pass.rcc.nu_omega = nu_omega;

  // sites, Fermi points and band remainders
  std::vector<EdgeSite> sites;
  std::vector<int> site_w;
  std::vector<const Vec*> xi;
  std::vector<double> rem;
  SiteTable st;
  std::array<double, 2> vt{};
  for (int w = 0; w < 2; ++w) {
    const auto& mode = mode_of(bulk_.modes(), w == 0 ? +1 : -1);
    const double kF = fermi_momentum(w, nu_omega[w]);
    std::size_t near = 0;
    for (std::size_t i = 0; i < mode.k1.size(); ++i)
      if (torus_dist(mode.k1[i] - kF) < torus_dist(mode.k1[near] - kF)) near = i;
    vt[w] = stencil_derivative(mode.energy, near, dk);
    pass.jF[w] = mode.k_index[near];
    pass.kF[w] = kF;
    pass.vtilde[w] = vt[w];
    for (std::size_t i = 0; i < mode.k_index.size(); ++i) {
      int r = mode.k_index[i] - pass.jF[w];
      r = ((r % L1) + L1 + L1 / 2) % L1 - L1 / 2;
      st.at[w][r] = static_cast<int>(sites.size());
      sites.push_back({mode.omega, mode.k_index[i], r, mode.energy[i]});
      site_w.push_back(w);
      xi.push_back(&mode.xi[i]);
      rem.push_back(mode.energy[i] - mu + nu_omega[w] - vt[w] * dk * r);
    }
  }
  const int ns = static_cast<int>(sites.size());
  for (int w = 0; w < 2; ++w) {
    st.get(w, 0);
    st.get(w, -1);
  }

  std::set<int> fs(opt_.freqs.begin(), opt_.freqs.end());
  fs.insert(0);
  fs.insert(-1);
  if (two_point_m) fs.insert(*two_point_m);
  const std::vector<int> freqs(fs.begin(), fs.end());
  auto k0_of = [&](int m) { return kTwoPi / beta * (m + 0.5); };
  auto q1_of = [&](int a) { return dk * sites[a].r; };

  auto make_kernel = [&](int h, const std::map<int, Mat>& K) {
    EffectivePotentialKernel k;
    k.h = h;
    k.beta = beta;
    k.L1 = L1;
    k.m_alpha = bulk_.m_alpha();
    k.sites = sites;
    k.K = K;
    return k;
  };

  // first scale
  std::map<int, Mat> V1, V, G;
  std::vector<int> site_j;
  for (const auto& s : sites) site_j.push_back(s.j);
  std::vector<int> uniq = site_j;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  PhiPsiKernels W;
  std::vector<Mat> Gb_tp;
  for (int m : freqs) {
    const double k0 = k0_of(m);
    auto Gb = bulk_.bulk_all(k0);
    std::map<int, std::vector<Mat>> rows;
    for (int j : uniq) rows[j] = bulk_.potential_row(Gb, j);
    Mat Vt = Mat::Zero(ns, ns);
    Vec g1 = Vec::Zero(ns);
    for (int a = 0; a < ns; ++a) {
      const double ca = edge_chi_(k0) * edge_chi_(sites[a].energy - mu);
      if (ca == 0.0) continue;
      for (int b = 0; b < ns; ++b) {
        const double cb = edge_chi_(k0) * edge_chi_(sites[b].energy - mu);
        if (cb == 0.0) continue;
        Vt(a, b) = xi[a]->dot(rows[sites[a].j][sites[b].j] * *xi[b]);
      }
      const int w = site_w[a];
      Vt(a, a) += nu_omega[w] * ca;
      const cplx gt = ca / (kI * k0 + sites[a].energy - mu + nu_omega[w] * ca);
      const double x = weighted_norm(1.0, vt[w], k0, q1_of(a));
      const double cdn = c.chi_le(0, x);
      const cplx gdn = cdn == 0.0 ? cplx(0.0) : cdn / (kI * k0 + sites[a].energy - mu + nu_omega[w]);
      if (cdn > 0.0 && ca < 1.0) ++pass.support_violations;
      g1(a) = gt - gdn;
    }
    V1[m] = Vt;
    G[m] = g1;
    V[m] = chain_sum(Vt, g1, opt_.s_max);
    if (two_point_m && m == *two_point_m) {
      const Mat Gbf = bulk_.full_bulk(Gb), Vf = bulk_.full_vertex();
      const int N = L1 * D;
      Mat P = Mat::Identity(N, N), Q = Mat::Identity(N, N), tp = Mat::Identity(N, N), tq = tp;
      const Mat GV = Gbf * Vf, VG = Vf * Gbf;
      for (int s = 1; s <= opt_.s_max; ++s) {
        tp = tp * GV;
        tq = tq * VG;
        P += tp;
        Q += tq;
      }
      Mat Xi = Mat::Zero(N, ns);
      for (int a = 0; a < ns; ++a) Xi.block(sites[a].j * D, a, D, 1) = *xi[a];
      W.phi_psi = P * Xi;
      W.psi_phi = Xi.adjoint() * Q;
      W.phi_phi = Gbf * Q;
      W = iterate_phi_psi_kernels(W, V[m], g1);
    }
  }
  if (keep_kernels) {
    pass.kernels.push_back(make_kernel(1, V1));
    pass.kernels.push_back(make_kernel(0, V));
  }

  // initial couplings on scale 0
  Local loc = local_parts(V, st, beta, L1);
  ScaleCouplings cur;
  cur.h = 0;
  std::array<ScaleVelocities, 2> vel;
  std::array<cplx, 2> abs_d0{}, abs_d1{};
  for (int w = 0; w < 2; ++w) {
    pass.nu0_computed[w] = loc.L0(w, w).real();
    vel[w] = {1.0, vt[w], (kI * loc.d0(w, w)).real(), -loc.d1(w, w).real()};
    abs_d0[w] = loc.d0(w, w);
    abs_d1[w] = loc.d1(w, w);
    cur.v0(w, w) = vel[w].v0 + vel[w].b0;
    cur.v1(w, w) = vel[w].v1 + vel[w].b1;
  }
  cur.nu = loc.L0;
  for (int w = 0; w < 2; ++w) {
    const int u = 1 - w;
    cur.v0(w, u) = -kI * loc.d0(w, u);
    cur.v1(w, u) = loc.d1(w, u);
  }

  for (int h = 0; h >= hb; --h) {
    const double gh = std::pow(gamma, h);
    std::array<double, 2> imposed{};
    for (int w = 0; w < 2; ++w) {
      imposed[w] = nu.empty() ? loc.L0(w, w).real() / gh : nu[-h][w];
      cur.nu(w, w) = imposed[w];
    }
    pass.rcc.scales.push_back(cur);

    std::map<int, Mat> Vn, Delta;
    for (int m : freqs) {
      const double k0 = k0_of(m);
      Mat N = V[m];
      Vec g(ns);
      for (int a = 0; a < ns; ++a) {
        const int w = site_w[a];
        const double q1 = q1_of(a);
        N(a, a) -= k0 * abs_d0[w] + q1 * abs_d1[w] + loc.L0(w, w) - gh * imposed[w];
        auto p = scale_propagator(c, h, vel[w], k0, q1, rem[a]);
        if (!p.support_ok) ++pass.support_violations;
        g(a) = p.single;
      }
      Mat Nres = Mat::Zero(ns, ns);
      for (int a = 0; a < ns; ++a)
        for (int b = 0; b < ns; ++b)
          if (sites[a].r == sites[b].r) Nres(a, b) = N(a, b);
      Vn[m] = chain_sum(N, g, opt_.s_max);
      Delta[m] = (Vn[m] - N) - (chain_sum(Nres, g, opt_.s_max) - Nres);
      G[m] = g;
      if (two_point_m && m == *two_point_m) W = iterate_phi_psi_kernels(W, Vn[m], g);
    }
    if (keep_kernels) pass.kernels.push_back(make_kernel(h - 1, Vn));

    if (h == hb) {
      if (two_point_m) {
        const int m = *two_point_m;
        const double k0 = k0_of(m);
        Vec g(ns);
        for (int a = 0; a < ns; ++a)
          g(a) = scale_propagator(c, hb, vel[site_w[a]], k0, q1_of(a), rem[a]).below;
        W = iterate_phi_psi_kernels(W, chain_sum(Vn[m], g, opt_.s_max), g);
      }
      break;
    }

    Local ld = local_parts(Delta, st, beta, L1);
    BetaFunction b;
    b.nu = ld.L0 / gh;
    for (int w = 0; w < 2; ++w) {
      b.v0(w, w) = (kI * ld.d0(w, w)).real();
      b.v1(w, w) = -ld.d1(w, w).real();
      const int u = 1 - w;
      b.v0(w, u) = -kI * ld.d0(w, u);
      b.v1(w, u) = ld.d1(w, u);
    }
    pass.beta.push_back(b);
    cur = flow_step(cur, b, gamma);
    for (int w = 0; w < 2; ++w) {
      vel[w] = {vel[w].v0 + vel[w].b0, vel[w].v1 + vel[w].b1, b.v0(w, w).real(), b.v1(w, w).real()};
      abs_d0[w] = ld.d0(w, w);
      abs_d1[w] = ld.d1(w, w);
    }
    V = std::move(Vn);
    loc = local_parts(V, st, beta, L1);
  }
  if (two_point_m) pass.two_point = W.phi_phi;
  return pass;
}

FixedPointResult solve_nu_fixed_point(const EdgeRG& rg) {
  const auto& c = rg.cascade();
  const auto& opt = rg.options();
  const int hb = c.h_beta, ns = 1 - hb;
  FixedPointResult res;
  std::vector<std::array<double, 2>> nu(ns, {0.0, 0.0});
  std::array<double, 2> nw{0.0, 0.0};
  double prev = std::numeric_limits<double>::quiet_NaN();
  const double tol = opt.tol * std::max(1.0, std::abs(rg.lambda()));
  for (int it = 1; it <= opt.max_sweeps; ++it) {
    FlowPass p = rg.run_pass(nu, nw);
    std::vector<std::array<double, 2>> T(ns, {0.0, 0.0});
    std::array<double, 2> nw2{};
    double dist = 0.0;
    for (int w = 0; w < 2; ++w) {
      for (int h = hb + 1; h <= 0; ++h) {
        double s = 0.0;
        for (int k = hb + 1; k <= h; ++k) s += std::pow(c.gamma, k - h) * p.beta[-k].nu(w, w).real();
        T[-h][w] = -s;
      }
      nw2[w] = nw[w] - (p.nu0_computed[w] - T[0][w]);
      dist = std::max(dist, std::abs(nw2[w] - nw[w]));
      for (int i = 0; i < ns; ++i) dist = std::max(dist, std::abs(T[i][w] - nu[i][w]));
    }
    FixedPointLog lg;
    lg.iteration = it;
    lg.sup_distance = dist;
    lg.contraction = std::isnan(prev) || prev == 0.0 ? std::numeric_limits<double>::quiet_NaN() : dist / prev;
    res.log.push_back(lg);
    nu = T;
    nw = nw2;
    if (it > opt.warmup && !std::isnan(lg.contraction)) res.contraction = std::max(res.contraction, lg.contraction);
    if (dist <= tol) {
      res.converged = true;
      break;
    }
    if (it > opt.warmup && !std::isnan(lg.contraction) && lg.contraction >= 1.0)
      throw NoContraction("nu fixed point: sweep " + std::to_string(it) + " expands the distance (factor " +
                          std::to_string(lg.contraction) + ")");
    prev = dist;
  }
  res.nu = nu;
  res.nu_omega = nw;
  res.pass = rg.run_pass(nu, nw, nullptr, true);
  for (int w = 0; w < 2; ++w) res.kF_lambda[w] = rg.fermi_momentum(w, nw[w]);
  return res;
}

ThetaFit fit_theta(const RunningCouplings& rcc, double lambda, int w) {
  ThetaFit f;
  if (lambda == 0.0) return f;
  std::vector<double> x, y;
  for (const auto& s : rcc.scales) {
    const double a = std::abs(s.nu(w, w));
    if (a <= 0.0) continue;
    x.push_back(s.h * std::log(rcc.gamma));
    y.push_back(std::log(a / std::abs(lambda)));
  }
  f.points = static_cast<int>(x.size());
  if (f.points < 2) return f;
  auto lf = fit_line(x, y);
  f.theta = lf.slope;
  f.r2 = lf.r2;
  double C = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) C = std::max(C, std::exp(y[i] - f.theta * x[i]));
  f.C = C;
  return f;
}

}  // namespace edgeflow
