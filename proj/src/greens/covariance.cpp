#include <cmath>
#include <limits>

#include "edgeflow/greens.hpp"

namespace edgeflow {

int MatsubaraGrid::index(double k0) const {
  double t = k0 * beta / kTwoPi - 0.5;
  double r = std::round(t);
  if (std::abs(t - r) > 1e-9) throw Error("k0 is not a fermionic Matsubara frequency");
  int i = static_cast<int>(r) + n_freq;
  if (i < 0 || i >= size()) throw Error("k0 beyond the frequency cutoff");
  return i;
}

double smooth_step(double t) {
  if (t <= 0) return 1.0;
  if (t >= 1) return 0.0;
  double a = std::exp(-1.0 / (1.0 - t));
  double b = std::exp(-1.0 / t);
  return a / (a + b);
}

double CutoffFunction::operator()(double x) const {
  double lo = delta / gamma;
  return smooth_step((std::abs(x) - lo) / (delta - lo));
}

Mat free_covariance(const HoppingModel& m, const MatsubaraGrid& grid, double k0, double k1) {
  grid.index(k0);
  Eigen::SelfAdjointEigenSolver<Mat> es(bloch_transform(m, k1));
  Vec d(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = 1.0 / (kI * k0 + es.eigenvalues()(i) - m.mu);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

EdgeBulk edge_bulk_split(const HoppingModel& m, const Mat& G, const CutoffFunction& chi,
                         const std::vector<EdgeModeData>& modes, double k0, double k1) {
  const int j = grid_index(m.lattice, k1);
  Mat Ge = Mat::Zero(G.rows(), G.cols());
  const double c0 = chi(k0);
  for (const auto& mode : modes) {
    for (std::size_t i = 0; i < mode.k_index.size(); ++i) {
      if (mode.k_index[i] != j) continue;
      const Vec& xi = mode.xi[i];
      if (xi.size() != G.rows()) throw Error("edge mode does not match the model dimension");
      double e = mode.energy[i];
      if ((bloch_any(m, k1) * xi - e * xi).norm() > 1e-6) throw Error("edge mode is not an eigenvector of this model");
      if (c0 == 0.0) continue;
      Ge += (c0 * chi(e - m.mu) / (kI * k0 + e - m.mu)) * (xi * xi.adjoint());
    }
  }
  return {Ge, G - Ge};
}

CombesThomas decay_fit(const std::vector<Mat>& samples, int S, int max_sep) {
  if (samples.empty()) throw Error("decay fit needs samples");
  const int L2 = static_cast<int>(samples.front().rows()) / S;
  max_sep = std::min(max_sep, L2 - 1);
  if (max_sep + 1 < 8) throw Error("Combes-Thomas fit needs at least 8 separations");
  std::vector<double> best(max_sep + 1, 0.0);
  for (const Mat& Gb : samples)
    for (int x = 0; x < L2; ++x)
      for (int y = 0; y < L2; ++y) {
        int d = std::abs(x - y);
        if (d > max_sep) continue;
        best[d] = std::max(best[d], Gb.block(x * S, y * S, S, S).cwiseAbs().maxCoeff());
      }
  CombesThomas ct;
  for (int d = 0; d <= max_sep; ++d) {
    if (best[d] <= 1e-300) continue;
    ct.separations.push_back(d);
    ct.log_max.push_back(std::log(best[d]));
  }
  if (ct.separations.size() < 8)
    throw NumericalFailure("Combes-Thomas fit is degenerate (bulk propagator vanishes)");
  LineFit f = fit_line(ct.separations, ct.log_max);
  if (!(f.slope < 0)) throw BoundViolation("bulk propagator does not decay in |x2 - y2|");
  ct.c = -f.slope;
  ct.C = std::exp(f.intercept);
  ct.r2 = f.r2;
  return ct;
}

CombesThomas combes_thomas_fit(const HoppingModel& m, const CutoffFunction& chi,
                               const MatsubaraGrid& grid, const std::vector<EdgeModeData>& modes,
                               const std::vector<double>& k1_samples, int max_sep) {
  const double k0 = kPi / grid.beta;
  std::vector<Mat> samples;
  for (double k1 : k1_samples)
    samples.push_back(edge_bulk_split(m, free_covariance(m, grid, k0, k1), chi, modes, k0, k1).bulk);
  CombesThomas ct = decay_fit(samples, m.lattice.S, max_sep);

  // Frequency envelope at the first sampled momentum.
  const double k1 = k1_samples.empty() ? 0.0 : k1_samples.front();
  Eigen::SelfAdjointEigenSolver<Mat> es(bloch_transform(m, k1));
  for (int i = 0; i < grid.size(); ++i) {
    double q0 = grid.k0(i);
    Vec d(es.eigenvalues().size());
    for (Eigen::Index a = 0; a < d.size(); ++a) d(a) = 1.0 / (kI * q0 + es.eigenvalues()(a) - m.mu);
    Mat G = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
    Mat Gb = edge_bulk_split(m, G, chi, modes, q0, k1).bulk;
    ct.envelope = std::max(ct.envelope, Gb.cwiseAbs().maxCoeff() * (1 + std::abs(q0)));
  }
  return ct;
}

}  // namespace edgeflow
