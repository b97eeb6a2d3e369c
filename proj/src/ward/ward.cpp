#include <algorithm>
#include <cmath>
#include <random>

#include "edgeflow/ward.hpp"

namespace edgeflow {

namespace {

int wrap(long long j, int L) { return static_cast<int>(((j % L) + L) % L); }

}  // namespace

CurrentWardReport check_current_ward(const Spectrum& sp, const CurrentOperators& cur,
                                     const TestFunctionPair& tf, double beta, double eta,
                                     const std::vector<int>& nus, Exec exec) {
  const double n = eta * beta / kTwoPi;
  if (!(n > 0.5) || std::abs(n - std::round(n)) > 1e-9)
    throw ConfigError("check_current_ward: eta must lie in (2 pi / beta) N");
  CurrentWardReport rep;
  rep.beta = beta;
  rep.eta = eta;
  rep.theta = tf.theta;
  rep.ell = tf.ell;
  const SpMat P = cur.smeared(0, tf.mu);
  const SpMat A1 = cur.smeared(1, tf.dmu[0]);
  const SpMat A2 = cur.smeared(2, tf.dmu[1]);
  for (int nu : nus) {
    if (nu < 0 || nu > 2) throw ConfigError("check_current_ward: nu must be 0, 1 or 2");
    const SpMat B = tf.theta * cur.smeared(nu, tf.phi);
    auto K = pair_response_batch(sp, beta, {&P, &A1, &A2}, B, {eta}, PairWeight::euclidean, exec);
    CurrentWardTerms t;
    t.nu = nu;
    t.density = eta * K[0][0];
    t.gradient = tf.theta * (K[1][0] + K[2][0]);
    t.commutator = kI * commutator_expectation(sp, beta, P, B, exec);
    double scale = std::max({std::abs(t.density), std::abs(t.gradient), std::abs(t.commutator)});
    t.residual = scale > 0 ? std::abs(t.density + t.gradient + t.commutator) / scale : 0.0;
    rep.max_residual = std::max(rep.max_residual, t.residual);
    rep.terms.push_back(t);
  }
  return rep;
}

namespace {

struct TripleIndices {
  int jk, jh, i_h;
  double p0, p1;
};

TripleIndices resolve(const MomentumTwoPoint& S2, const MomentumTriple& t) {
  const int L1 = S2.L1();
  TripleIndices r;
  r.jk = wrap(t.k1, L1);
  r.jh = wrap(static_cast<long long>(t.k1) + t.p1 + t.m * S2.m_alpha(), L1);
  r.i_h = t.k0 + t.p0;
  r.p0 = kTwoPi * t.p0 / S2.grid().beta;
  r.p1 = kTwoPi * t.p1 / L1;
  return r;
}

}  // namespace

VertexFunction vertex_function(const MomentumTwoPoint& S2, const CurrentOperators& cur,
                               const std::vector<MomentumTriple>& triples, Exec exec) {
  const auto& grid = S2.grid();
  std::string missing;
  for (const auto& t : triples)
    for (int i : {t.k0, t.k0 + t.p0})
      if (i < 0 || i >= grid.size()) missing += " " + std::to_string(i);
  if (!missing.empty())
    throw ConfigError("vertex_function: frequency indices outside the grid:" + missing);

  const int L1 = S2.L1(), D = S2.spectrum().lattice.block();
  VertexFunction V;
  V.triples = triples;
  V.S3.resize(triples.size());
  const int nt = static_cast<int>(triples.size());

  auto one = [&](int a) {
    const auto& t = triples[a];
    const TripleIndices ix = resolve(S2, t);
    const cplx zk = kI * grid.k0(t.k0), zh = kI * grid.k0(ix.i_h);
    std::array<Mat, 2> out{Mat::Zero(D, D), Mat::Zero(D, D)};
    if (exec == Exec::serial) {
      for (int jr = 0; jr < L1; ++jr) {
        const int jrp = wrap(jr - t.p1, L1);
        Mat left = S2.block_at(zk, ix.jk, jrp), right = S2.block_at(zh, jr, ix.jh);
        out[0] += left * right;
        out[1] += left * cur.kernel(1, kTwoPi * jr / L1, ix.p1) * right;
      }
    } else {
      const Mat R = S2.row_strip(zk, ix.jk), C = S2.col_strip(zh, ix.jh);
      for (int jr = 0; jr < L1; ++jr) {
        const int jrp = wrap(jr - t.p1, L1);
        auto left = R.middleCols(jrp * D, D);
        auto right = C.middleRows(jr * D, D);
        out[0].noalias() += left * right;
        out[1].noalias() += left * (cur.kernel(1, kTwoPi * jr / L1, ix.p1) * right);
      }
    }
    V.S3[a] = std::move(out);
  };

  if (exec == Exec::serial) {
    for (int a = 0; a < nt; ++a) one(a);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (int a = 0; a < nt; ++a) one(a);
  }
  return V;
}

VertexWardReport check_vertex_ward(const VertexFunction& V, const MomentumTwoPoint& S2) {
  const auto& grid = S2.grid();
  const int L1 = S2.L1();
  VertexWardReport rep;
  for (std::size_t a = 0; a < V.triples.size(); ++a) {
    const auto& t = V.triples[a];
    const TripleIndices ix = resolve(S2, t);
    Mat time_term = -ix.p0 * V.S3[a][0];
    Mat space_term = (1.0 - std::exp(-kI * ix.p1)) * V.S3[a][1];
    Mat r1 = kI * S2.block_at(kI * grid.k0(t.k0), ix.jk, wrap(ix.jh - t.p1, L1));
    Mat r2 = -kI * S2.block_at(kI * grid.k0(ix.i_h), wrap(t.k1 + t.p1, L1), ix.jh);
    // |p| |G(k)| |G(h)| sets the size when the shift makes every term vanish (lambda = 0, m != 0)
    const double natural = std::max(std::abs(ix.p0), std::abs(1.0 - std::exp(-kI * ix.p1))) *
                           S2.block_at(kI * grid.k0(t.k0), ix.jk, ix.jk).norm() *
                           S2.block_at(kI * grid.k0(ix.i_h), ix.jh, ix.jh).norm();
    double scale =
        std::max({time_term.norm(), space_term.norm(), r1.norm(), r2.norm(), natural});
    double res = (time_term + space_term - r1 - r2).norm();
    rep.residuals.push_back(scale > 0 ? res / scale : 0.0);
    rep.scales.push_back(scale);
    rep.max_residual = std::max(rep.max_residual, rep.residuals.back());
  }
  return rep;
}

std::vector<MomentumTriple> ward_sample_triples(const MomentumTwoPoint& S2, int kF_index,
                                                double q_lo, double q_hi, int count,
                                                unsigned seed) {
  if (count < 1 || !(q_lo > 0) || q_hi < q_lo)
    throw ConfigError("ward_sample_triples: need count >= 1 and 0 < q_lo <= q_hi");
  const auto& grid = S2.grid();
  const int L1 = S2.L1(), nf = grid.n_freq;
  const double dk = kTwoPi / L1;
  std::mt19937 rng(seed);
  std::vector<MomentumTriple> out;
  for (int s = 0; s < count; ++s) {
    const double target = count == 1 ? q_lo : q_lo * std::pow(q_hi / q_lo, double(s) / (count - 1));
    std::vector<std::pair<int, int>> near;  // (positive-frequency index, k1 offset)
    std::pair<int, int> best{nf, 0};
    double best_gap = 1e300;
    for (int i = nf; i < grid.size() - 1 && grid.k0(i) <= 1.2 * target; ++i)
      for (int d = -L1 / 2; d <= L1 / 2; ++d) {
        double q = std::hypot(grid.k0(i), d * dk);
        double gap = std::abs(std::log(q / target));
        if (gap < best_gap) {
          best_gap = gap;
          best = {i, d};
        }
        if (std::abs(q / target - 1.0) <= 0.15) near.emplace_back(i, d);
      }
    if (near.empty()) near.push_back(best);
    auto [i, d] = near[std::uniform_int_distribution<std::size_t>(0, near.size() - 1)(rng)];
    MomentumTriple t;
    const bool time_axis = s % 2 == 0;
    t.p0 = time_axis ? 1 : 0;
    t.p1 = time_axis ? 0 : 1;
    // negative k0 mirrors i about the grid centre; k0 + p0 stays on the grid either way
    t.k0 = std::bernoulli_distribution(0.5)(rng) ? i : grid.size() - 1 - i;
    t.k1 = wrap(kF_index + d, L1);
    out.push_back(t);
  }
  return out;
}

std::vector<MomentumTriple> default_ward_triples(const MomentumTwoPoint& S2, int kF_index,
                                                 unsigned seed) {
  const double q_lo = kTwoPi / S2.grid().beta;
  return ward_sample_triples(S2, kF_index, q_lo, std::max(0.1, 4.0 * q_lo), 12, seed);
}

std::vector<MomentumTriple> zeta_window_triples(const MomentumTwoPoint& S2,
                                                const ScalingLimitFit& fit, const ZetaWindow& w) {
  const auto& grid = S2.grid();
  const int L1 = S2.L1(), nf = grid.n_freq;
  const double dk = kTwoPi / L1, db = kTwoPi / grid.beta;
  std::vector<MomentumTriple> time_set, space_set;
  for (int i = nf; i < grid.size() - 1 && grid.k0(i) <= w.q_max; ++i)
    for (int j = 0; j < L1; ++j) {
      const double q0 = grid.k0(i), q1 = std::remainder(dk * j - fit.kF_lambda, kTwoPi);
      const double a1 = std::abs(q1), q = std::hypot(q0, q1);
      if (q < 0.5 * w.q_max || q > w.q_max) continue;
      if (std::pow(a1, w.M) > q0 || q0 > a1) continue;
      MomentumTriple t;
      t.k0 = i;
      t.k1 = j;
      // |p| about |q| / 4, at least one grid step, within the window
      int n0 = std::max(1, static_cast<int>(std::lround(0.25 * q0 / db)));
      if (n0 * db <= 0.5 * q0 && i + n0 < grid.size()) {
        t.p0 = n0;
        t.p1 = 0;
        time_set.push_back(t);
      }
      int n1 = std::max(1, static_cast<int>(std::lround(0.25 * a1 / dk)));
      if (n1 * dk <= 0.5 * a1) {
        t.p0 = 0;
        t.p1 = q1 > 0 ? n1 : -n1;
        space_set.push_back(t);
      }
    }
  std::mt19937 rng(w.seed);
  std::shuffle(time_set.begin(), time_set.end(), rng);
  std::shuffle(space_set.begin(), space_set.end(), rng);
  std::vector<MomentumTriple> out;
  std::size_t a = 0, b = 0;
  while (static_cast<int>(out.size()) < w.count && (a < time_set.size() || b < space_set.size())) {
    bool take_time = out.size() % 2 == 0 ? a < time_set.size() : b >= space_set.size();
    out.push_back(take_time ? time_set[a++] : space_set[b++]);
  }
  if (out.empty())
    throw ConfigError("zeta window holds no grid momenta; raise q_max or the grid resolution");
  return out;
}

ZetaReport verify_zeta_relations(const ScalingLimitFit& fit, const HoppingModel& m,
                                 const MomentumTwoPoint& S2, const CurrentOperators& cur,
                                 const ZetaWindow& w, Exec exec) {
  ZetaReport rep;
  rep.v0 = fit.v0;
  rep.v1 = fit.v1;
  rep.direct = dressed_vertices(fit, m);
  rep.ratio0 = rep.direct.zeta0 / fit.v0;
  rep.ratio1 = rep.direct.zeta1.real() / fit.v1;

  rep.triples = zeta_window_triples(S2, fit, w);
  const VertexFunction V = vertex_function(S2, cur, rep.triples, exec);
  const Vec& Z0 = fit.Z.at(0);
  const double z4 = Z0.squaredNorm() * Z0.squaredNorm();
  const auto& grid = S2.grid();
  const int L1 = S2.L1();
  const double dk = kTwoPi / L1, db = kTwoPi / grid.beta;
  auto g = [&](double q0, double q1) { return 1.0 / cplx(fit.v1 * q1, fit.v0 * q0); };

  const std::size_t nt = rep.triples.size();
  std::vector<cplx> G(nt);
  std::array<std::vector<cplx>, 2> s;
  for (std::size_t a = 0; a < nt; ++a) {
    const auto& t = rep.triples[a];
    const double q0 = grid.k0(t.k0), q1 = std::remainder(dk * t.k1 - fit.kF_lambda, kTwoPi);
    G[a] = g(q0, q1) * g(q0 + db * t.p0, q1 + dk * t.p1);
    for (int mu = 0; mu < 2; ++mu) s[mu].push_back(Z0.dot(V.S3[a][mu] * Z0) / z4);
  }
  double ssr = 0, tot = 0;
  cplx zeta[2];
  for (int mu = 0; mu < 2; ++mu) {
    cplx num = 0;
    double den = 0;
    for (std::size_t a = 0; a < nt; ++a) {
      num += std::conj(G[a]) * s[mu][a];
      den += std::norm(G[a]);
    }
    zeta[mu] = num / den;
    for (std::size_t a = 0; a < nt; ++a) {
      ssr += std::norm(s[mu][a] - G[a] * zeta[mu]);
      tot += std::norm(s[mu][a]);
    }
  }
  rep.fit_zeta0 = zeta[0];
  rep.fit_zeta1 = zeta[1];
  rep.fit_residual = std::sqrt(ssr / tot);
  rep.r2 = 1.0 - ssr / tot;
  rep.window_too_large = rep.r2 < 0.9;
  return rep;
}

}  // namespace edgeflow
