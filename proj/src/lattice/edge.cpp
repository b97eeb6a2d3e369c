#include <algorithm>
#include <cmath>
#include <limits>

#include "edgeflow/lattice.hpp"

namespace edgeflow {

namespace {

struct WindowState {
  double energy;
  Vec vec;
  double lower;  // weight on x2 < L2/2
};

double lower_weight(const Vec& v, const CylinderLattice& lat) {
  const int half = lat.L2 / 2;
  double w = 0;
  for (int x = 0; x < half; ++x)
    for (int s = 0; s < lat.S; ++s) w += std::norm(v(x * lat.S + s));
  return w;
}

// Deterministic phase: largest component real positive.
void fix_phase(Vec& v) {
  Eigen::Index i;
  v.cwiseAbs().maxCoeff(&i);
  v *= std::abs(v(i)) / v(i);
}

std::vector<WindowState> window_states(const HoppingModel& m, int j, double mu, double delta) {
  const auto& lat = m.lattice;
  Eigen::SelfAdjointEigenSolver<Mat> es(bloch_any(m, lat.momentum(j)));
  const RVec& e = es.eigenvalues();
  std::vector<int> in;
  for (int i = 0; i < e.size(); ++i)
    if (e(i) > mu - delta && e(i) < mu + delta) in.push_back(i);

  // Rotate (near-)degenerate groups so that each vector lives on one side.
  const int half = lat.L2 / 2;
  RVec proj = RVec::Zero(lat.block());
  proj.head(half * lat.S).setOnes();
  std::vector<WindowState> out;
  std::size_t a = 0;
  while (a < in.size()) {
    std::size_t b = a + 1;
    while (b < in.size() && e(in[b]) - e(in[b - 1]) < 1e-6) ++b;
    Mat V(lat.block(), static_cast<Eigen::Index>(b - a));
    for (std::size_t c = a; c < b; ++c) V.col(c - a) = es.eigenvectors().col(in[c]);
    if (b - a > 1) {
      Mat Q = V.adjoint() * proj.asDiagonal() * V;
      Eigen::SelfAdjointEigenSolver<Mat> qs(Q);
      V = V * qs.eigenvectors();
    }
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
      Vec v = V.col(c);
      fix_phase(v);
      out.push_back({e(in[a + c]), v, lower_weight(v, lat)});
    }
    a = b;
  }
  return out;
}

struct Track {
  std::vector<int> t;  // sweep steps
  std::vector<WindowState> s;
  bool open = true;
};

}  // namespace

std::vector<EdgeModeData> edge_spectrum(const HoppingModel& m, double mu, double delta,
                                        const EdgeOptions& opt, Exec exec) {
  if (!(delta > 0)) throw ConfigError("delta must be positive");
  const auto& lat = m.lattice;
  const int L1 = lat.L1;
  std::vector<std::vector<WindowState>> per_k(L1);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (int j = 0; j < L1; ++j) per_k[j] = window_states(m, j, mu, delta);

  int j0 = 0;
  for (int j = 1; j < L1; ++j)
    if (per_k[j].size() < per_k[j0].size()) j0 = j;

  std::vector<Track> tracks;
  for (int t = 0; t < L1; ++t) {
    const auto& cur = per_k[(j0 + t) % L1];
    std::vector<int> open;
    for (int b = 0; b < static_cast<int>(tracks.size()); ++b)
      if (tracks[b].open) open.push_back(b);
    std::vector<bool> used_b(open.size(), false), used_s(cur.size(), false);
    // Greedy global matching on overlap, ties broken by energy proximity.
    for (;;) {
      int bb = -1, ss = -1;
      double best = 0.5, bestde = 0;
      for (std::size_t p = 0; p < open.size(); ++p) {
        if (used_b[p]) continue;
        const auto& prev = tracks[open[p]].s.back();
        for (std::size_t q = 0; q < cur.size(); ++q) {
          if (used_s[q]) continue;
          double ov = std::abs(prev.vec.dot(cur[q].vec));
          double de = std::abs(prev.energy - cur[q].energy);
          if (ov > best + 1e-12 || (std::abs(ov - best) <= 1e-12 && bb >= 0 && de < bestde)) {
            best = ov;
            bestde = de;
            bb = static_cast<int>(p);
            ss = static_cast<int>(q);
          }
        }
      }
      if (bb < 0) break;
      used_b[bb] = used_s[ss] = true;
      tracks[open[bb]].t.push_back(t);
      tracks[open[bb]].s.push_back(cur[ss]);
    }
    for (std::size_t p = 0; p < open.size(); ++p)
      if (!used_b[p]) tracks[open[p]].open = false;
    for (std::size_t q = 0; q < cur.size(); ++q)
      if (!used_s[q]) tracks.push_back({{t}, {cur[q]}, true});
  }
  // Close the cycle: a track alive at the last step may continue one born at step 0.
  for (auto& tail : tracks) {
    if (!tail.open || tail.t.back() != L1 - 1) continue;
    for (auto& head : tracks) {
      if (&head == &tail || head.t.empty() || head.t.front() != 0) continue;
      if (std::abs(tail.s.back().vec.dot(head.s.front().vec)) > 0.5) {
        for (std::size_t i = 0; i < head.t.size(); ++i) {
          tail.t.push_back(head.t[i] + L1);
          tail.s.push_back(head.s[i]);
        }
        head.t.clear();
        break;
      }
    }
  }
  std::erase_if(tracks, [](const Track& tr) { return tr.t.empty(); });

  if (tracks.size() != 2)
    throw AssumptionViolation("edge_spectrum: found " + std::to_string(tracks.size()) +
                              " branches in the energy window, expected 2");

  const double h = kTwoPi / L1;
  std::vector<EdgeModeData> out;
  for (auto& tr : tracks) {
    EdgeModeData d;
    double mean_lower = 0;
    for (auto& s : tr.s) mean_lower += s.lower;
    mean_lower /= tr.s.size();
    d.omega = mean_lower > 0.5 ? +1 : -1;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      int j = j0 + tr.t[i];
      d.k_index.push_back(j % L1);
      d.k1.push_back(h * j);
      d.energy.push_back(tr.s[i].energy);
      d.xi.push_back(tr.s[i].vec);
      double w = d.omega > 0 ? tr.s[i].lower : 1.0 - tr.s[i].lower;
      d.loc_weight.push_back(w);
      if (w <= opt.min_weight)
        throw AssumptionViolation("edge branch localization weight " + std::to_string(w) +
                                  " below threshold");
    }
    for (std::size_t i = 0; i < d.energy.size(); ++i)
      if (d.energy.size() >= 2 && std::abs(stencil_derivative(d.energy, i, h)) < opt.min_velocity)
        throw AssumptionViolation("edge branch velocity below threshold inside the window");

    FermiPoint fp = fermi_point(d, mu);
    d.kF = fp.kF;
    d.v = fp.v;
    d.kF_index = fp.kF_index;

    // Decay fit of the window envelope, measured from the owning edge.
    std::vector<double> xs, ys;
    for (int x = 0; x < lat.L2 / 2; ++x) {
      int row = d.omega > 0 ? x : lat.L2 - 1 - x;
      double env = 0;
      for (auto& v : d.xi) env = std::max(env, v.segment(row * lat.S, lat.S).squaredNorm());
      if (env > 1e-26) {
        xs.push_back(x);
        ys.push_back(std::log(env));
      }
    }
    if (xs.size() >= 2) d.decay_rate = -0.5 * fit_line(xs, ys).slope;
    out.push_back(std::move(d));
  }
  if (out[0].omega == out[1].omega)
    throw AssumptionViolation("both edge branches sit on the same side of the cylinder");
  if (out[0].omega < 0) std::swap(out[0], out[1]);
  return out;
}

FermiPoint fermi_point(const EdgeModeData& mode, double mu) {
  const auto& e = mode.energy;
  const auto& k = mode.k1;
  const std::size_t n = e.size();
  if (n < 2) throw AssumptionViolation("band has fewer than two samples");
  const double h = k[1] - k[0];
  int crossings = 0;
  FermiPoint fp;
  for (std::size_t i = 0; i < n; ++i) {
    double di = e[i] - mu;
    if (di == 0.0) {
      ++crossings;
      fp.kF = k[i];
      fp.v = stencil_derivative(e, i, h);
      continue;
    }
    if (i + 1 < n) {
      double dj = e[i + 1] - mu;
      if (di * dj < 0) {
        ++crossings;
        double t = di / (di - dj);
        fp.kF = k[i] + t * (k[i + 1] - k[i]);
        fp.v = (1 - t) * stencil_derivative(e, i, h) + t * stencil_derivative(e, i + 1, h);
      }
    }
  }
  if (crossings != 1)
    throw AssumptionViolation("band crosses mu " + std::to_string(crossings) +
                              " times, expected exactly once");
  fp.kF = wrap_2pi(fp.kF);
  if (kTwoPi - fp.kF < 1e-12) fp.kF = 0.0;
  int L1 = static_cast<int>(std::lround(kTwoPi / h));
  fp.kF_index = static_cast<int>(std::lround(fp.kF / h)) % L1;
  return fp;
}

}  // namespace edgeflow
