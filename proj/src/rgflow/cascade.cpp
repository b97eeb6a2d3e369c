#include <cmath>

#include "edgeflow/rgflow.hpp"

namespace edgeflow {

double ScaleCascade::chi_le(int h, double x) const { return chi(std::pow(gamma, -h - 1) * x); }

double ScaleCascade::f(int h, double x) const { return chi_le(h, x) - chi_le(h - 1, x); }

ScaleCascade build_cascade(double beta, double delta, double gamma) {
  if (!(beta > 0) || !(gamma > 1) || !(delta > 0))
    throw ConfigError("build_cascade: need beta > 0, gamma > 1, delta > 0");
  const double t = kPi / beta;
  if (t > delta) throw ConfigError("build_cascade: pi / beta exceeds delta, no scale <= 0");
  int h = static_cast<int>(std::ceil(std::log(t / delta) / std::log(gamma)));
  while (delta * std::pow(gamma, h) < t) ++h;
  while (delta * std::pow(gamma, h - 1) > t) --h;
  if (!(delta * std::pow(gamma, h - 1) <= t && t <= delta * std::pow(gamma, h)))
    throw ConstructionBug("build_cascade: bracketing failed");
  ScaleCascade c;
  c.beta = beta;
  c.gamma = gamma;
  c.delta = delta;
  c.h_beta = h;
  c.chi = CutoffFunction{delta, gamma};
  return c;
}

double partition_residual(const ScaleCascade& c, double x) {
  double s = c.chi_le(c.h_beta - 1, x);
  for (int h = c.h_beta; h <= 0; ++h) s += c.f(h, x);
  return std::abs(s - c.chi_le(0, x));
}

double weighted_norm(double v0, double v1, double q0, double q1) {
  return std::hypot(v0 * q0, v1 * q1);
}

ScalePropagator scale_propagator(const ScaleCascade& c, int h, const ScaleVelocities& v,
                                 double q0, double q1, double rem) {
  ScalePropagator p;
  const double up = c.chi_le(h, weighted_norm(v.v0, v.v1, q0, q1));
  if (up != 0.0) {
    const double a0 = v.v0 + v.b0 * up, a1 = v.v1 + v.b1 * up;
    p.le = up / cplx(a1 * q1 + rem, a0 * q0);
  }
  const double w0 = v.v0 + v.b0, w1 = v.v1 + v.b1;
  const double dn = c.chi_le(h - 1, weighted_norm(w0, w1, q0, q1));
  if (dn != 0.0) p.below = dn / cplx(w1 * q1 + rem, w0 * q0);
  p.single = p.le - p.below;
  p.support_ok = !(dn > 0.0 && up < 1.0);
  return p;
}

QGrid QGrid::stencil(double beta, int L1) {
  QGrid g;
  g.beta = beta;
  g.L1 = L1;
  for (int m = -5; m <= 3; ++m) g.m.push_back(m);
  for (int r = -4; r <= 4; ++r) g.r.push_back(r);
  return g;
}

namespace {

int position(const std::vector<int>& v, int x) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] == x) return static_cast<int>(i);
  return -1;
}

}  // namespace

LocalParts localize(const SampledKernel& V, int n, bool diagonal) {
  const QGrid& g = V.grid;
  const int rows = static_cast<int>(g.m.size()), cols = static_cast<int>(g.r.size());
  if (V.values.rows() != rows || V.values.cols() != cols)
    throw ConfigError("localize: sample matrix does not match the grid");
  const int p = position(g.m, 0), mneg = position(g.m, -1);
  const int r0 = position(g.r, 0), rneg = position(g.r, -1);
  if (p < 0 || mneg < 0 || r0 < 0 || rneg < 0)
    throw ConfigError("localize: grid lacks (+-pi/beta, 0) or (+-pi/beta, -2pi/L1)");

  LocalParts out;
  for (auto* s : {&out.L0, &out.L1_diag, &out.L1_offdiag, &out.R}) {
    s->grid = g;
    s->values = Mat::Zero(rows, cols);
  }
  if (n != 0) {
    out.R.values = V.values;
    return out;
  }
  const Mat& F = V.values;
  out.value = 0.5 * (F(p, r0) + F(mneg, r0));
  out.d0 = g.beta / kTwoPi * (F(p, r0) - F(mneg, r0));
  out.d1 = g.L1 / kTwoPi * 0.5 * ((F(p, r0) - F(p, rneg)) + (F(mneg, r0) - F(mneg, rneg)));
  Mat& L1 = diagonal ? out.L1_diag.values : out.L1_offdiag.values;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      out.L0.values(i, j) = out.value;
      L1(i, j) = g.q0(i) * out.d0 + g.q1(j) * out.d1;
    }
  out.R.values = F - out.L0.values - L1;
  return out;
}

ScaleCouplings flow_step(const ScaleCouplings& up, const BetaFunction& b, double gamma) {
  ScaleCouplings s;
  s.h = up.h - 1;
  s.nu = gamma * (up.nu + b.nu);
  s.v0 = up.v0 + b.v0;
  s.v1 = up.v1 + b.v1;
  return s;
}

Mat chain_sum(const Mat& N, const Vec& g, int s_max) {
  if (N.rows() != N.cols() || N.rows() != g.size())
    throw ConfigError("chain_sum: kernel and propagator sizes differ");
  Mat out = N, term = N;
  for (int s = 2; s <= s_max; ++s) {
    term = term * g.asDiagonal() * N;
    out += term;
  }
  return out;
}

PhiPsiKernels iterate_phi_psi_kernels(const PhiPsiKernels& W, const Mat& V, const Vec& g) {
  const auto n = g.size();
  if (W.phi_psi.cols() != n || W.psi_phi.rows() != n || V.rows() != n || V.cols() != n)
    throw ConfigError("iterate_phi_psi_kernels: kernel grids do not match");
  PhiPsiKernels out = W;
  if (out.phi_phi.size() == 0) out.phi_phi = Mat::Zero(W.phi_psi.rows(), W.psi_phi.cols());
  if (out.phi_phi.rows() != W.phi_psi.rows() || out.phi_phi.cols() != W.psi_phi.cols())
    throw ConfigError("iterate_phi_psi_kernels: phi-phi kernel has the wrong shape");
  const Mat Wg = W.phi_psi * g.asDiagonal();
  const Mat gW = g.asDiagonal() * W.psi_phi;
  const Mat WgV = Wg * V;
  out.phi_phi += Wg * W.psi_phi + WgV * gW;
  out.phi_psi += WgV;
  out.psi_phi += V * gW;
  return out;
}

int EffectivePotentialKernel::site(int omega, int r) const {
  for (std::size_t a = 0; a < sites.size(); ++a)
    if (sites[a].omega == omega && sites[a].r == r) return static_cast<int>(a);
  return -1;
}

cplx EffectivePotentialKernel::value(int n, int omega, int omega_p, int m, int r) const {
  auto it = K.find(m);
  if (it == K.end()) throw ConfigError("EffectivePotentialKernel: frequency not sampled");
  const int a = site(omega, r);
  if (a < 0) return 0.0;
  const long long l1 = L1;
  const int j2 = static_cast<int>(((sites[a].j + n * m_alpha) % l1 + l1) % l1);
  for (std::size_t b = 0; b < sites.size(); ++b)
    if (sites[b].omega == omega_p && sites[b].j == j2) return it->second(a, b);
  return 0.0;
}

double EffectivePotentialKernel::conjugation_defect() const {
  double d = 0.0;
  for (const auto& [m, Km] : K) {
    auto it = K.find(-m - 1);
    if (it == K.end()) continue;
    d = std::max(d, (it->second - Km.adjoint()).cwiseAbs().maxCoeff());
  }
  return d;
}

EffectivePotentialKernel effective_potential_order1(const QuasiPeriodicPotential& pot,
                                                    const std::vector<EdgeModeData>& modes,
                                                    int L1, const std::vector<int>& m,
                                                    double beta) {
  EffectivePotentialKernel k;
  k.h = 1;
  k.beta = beta;
  k.L1 = L1;
  k.m_alpha = pot.freq.m;
  std::vector<const Vec*> xi;
  for (const auto& mode : modes)
    for (std::size_t i = 0; i < mode.k_index.size(); ++i) {
      int r = mode.k_index[i] - mode.kF_index;
      r = ((r % L1) + L1 + L1 / 2) % L1 - L1 / 2;
      k.sites.push_back({mode.omega, mode.k_index[i], r, mode.energy[i]});
      xi.push_back(&mode.xi[i]);
    }
  const int ns = static_cast<int>(k.sites.size());
  Mat K1 = Mat::Zero(ns, ns);
  const long long l1 = L1;
  for (int a = 0; a < ns; ++a)
    for (const auto& [n, phi_n] : pot.modes) {
      // node -lambda phi_{-n} moves k to k + n alpha
      const int j2 = static_cast<int>(((k.sites[a].j - n * k.m_alpha) % l1 + l1) % l1);
      for (int b = 0; b < ns; ++b)
        if (k.sites[b].j == j2)
          K1(a, b) += -pot.lambda * xi[a]->dot(phi_n.cwiseProduct(*xi[b]));
    }
  for (int mm : m) k.K[mm] = K1;
  return k;
}

}  // namespace edgeflow
