#include <cmath>

#include "edgeflow/transport.hpp"

namespace edgeflow {

namespace {

constexpr double kOccupationTiny = 1e-15;

void require_hermitian(const SpMat& A, const char* what) {
  SpMat d = A - SpMat(A.adjoint());
  double scale = 0, err = 0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  for (int k = 0; k < d.outerSize(); ++k)
    for (SpMat::InnerIterator it(d, k); it; ++it) err = std::max(err, std::abs(it.value()));
  if (err > 1e-12 * std::max(scale, 1.0)) throw Error(std::string(what) + " is not Hermitian");
}

struct Occupation {
  RVec f, h;
};

Occupation occupation(const Spectrum& sp, double beta) {
  const Eigen::Index n = sp.energy.size();
  Occupation o{RVec(n), RVec(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    double xi = sp.energy(i) - sp.mu;
    o.f(i) = fermi(beta, xi);
    double a = 0.5 * beta * std::abs(xi);
    o.h(i) = std::exp(-a) / (1.0 + std::exp(-2.0 * a));
  }
  return o;
}

cplx weight(PairWeight kind, double beta, double eta, double ei, double ej, double fi, double fj,
            double hi, double hj) {
  double d = ei - ej;
  cplx num = fj - fi;
  if (kind == PairWeight::euclidean) {
    double s = std::sin(0.5 * eta * beta);
    num -= 2.0 * kI * s * hi * hj;
    if (d == 0.0 && eta == 0.0) return beta * hi * hj;
  }
  if (num == 0.0) return 0.0;
  return num / cplx(d, -eta);
}

void check_etas(const std::vector<double>& etas, PairWeight kind) {
  for (double e : etas)
    if (!(e > 0) && !(kind == PairWeight::euclidean && e == 0.0))
      throw ConfigError("eta must be positive");
}

}  // namespace

namespace {

// Eigenbasis window of the pair sum: energies ascend, so {f > tiny} = [0, a_end) and
// {f < 1 - tiny} = [b0, N).
struct PairWindow {
  Eigen::Index a_end = 0, b0 = 0;
};

PairWindow pair_window(const Occupation& occ) {
  const Eigen::Index N = occ.f.size();
  PairWindow w;
  while (w.a_end < N && occ.f(w.a_end) > kOccupationTiny) ++w.a_end;
  while (w.b0 < N && occ.f(w.b0) >= 1.0 - kOccupationTiny) ++w.b0;
  return w;
}

std::vector<cplx> pair_sum(const Spectrum& sp, const Occupation& occ, const PairWindow& win,
                           double beta, const Mat& At, const Mat& BtT,
                           const std::vector<double>& etas, PairWeight kind) {
  const auto& e = sp.energy;
  const Eigen::Index na = win.a_end, nb = e.size() - win.b0;
  const std::size_t ne = etas.size();
  // per-column partial sums, reduced serially afterwards
  Mat col_ab(nb, ne), col_cc(nb, ne);
#pragma omp parallel for schedule(static)
  for (Eigen::Index jj = 0; jj < nb; ++jj) {
    const Eigen::Index j = win.b0 + jj;
    for (std::size_t q = 0; q < ne; ++q) {
      cplx ab = 0, cc = 0;
      for (Eigen::Index i = 0; i < na; ++i) {
        cplx x = At(i, jj) * BtT(i, jj) *
                 weight(kind, beta, etas[q], e(i), e(j), occ.f(i), occ.f(j), occ.h(i), occ.h(j));
        ab += x;
        if (i >= win.b0 && j < win.a_end) cc += x;
      }
      col_ab(jj, q) = ab;
      col_cc(jj, q) = cc;
    }
  }
  std::vector<cplx> out(ne);
  for (std::size_t q = 0; q < ne; ++q) {
    cplx ab = 0, cc = 0;
    for (Eigen::Index jj = 0; jj < nb; ++jj) {
      ab += col_ab(jj, q);
      cc += col_cc(jj, q);
    }
    // ordered pairs in (A x B) and its transpose, overlap counted once
    out[q] = ab + std::conj(ab) - cc;
  }
  return out;
}

std::vector<cplx> serial_pair_sum(const Spectrum& sp, const Occupation& occ, double beta,
                                  const Mat& At, const Mat& Bt, const std::vector<double>& etas,
                                  PairWeight kind) {
  const Eigen::Index N = sp.energy.size();
  const auto& e = sp.energy;
  std::vector<cplx> out(etas.size(), 0.0);
  for (std::size_t q = 0; q < etas.size(); ++q) {
    cplx acc = 0;
    for (Eigen::Index j = 0; j < N; ++j)
      for (Eigen::Index i = 0; i < N; ++i)
        acc += At(i, j) * Bt(j, i) *
               weight(kind, beta, etas[q], e(i), e(j), occ.f(i), occ.f(j), occ.h(i), occ.h(j));
    out[q] = acc;
  }
  return out;
}

}  // namespace

std::vector<cplx> pair_response(const Spectrum& sp, double beta, const SpMat& A, const SpMat& B,
                                const std::vector<double>& etas, PairWeight kind, Exec exec) {
  return pair_response_batch(sp, beta, {&A}, B, etas, kind, exec).front();
}

std::vector<std::vector<cplx>> pair_response_batch(const Spectrum& sp, double beta,
                                                   const std::vector<const SpMat*>& As,
                                                   const SpMat& B, const std::vector<double>& etas,
                                                   PairWeight kind, Exec exec) {
  check_etas(etas, kind);
  for (const SpMat* A : As) require_hermitian(*A, "response operator A");
  require_hermitian(B, "response operator B");
  const Occupation occ = occupation(sp, beta);
  std::vector<std::vector<cplx>> out;

  if (exec == Exec::serial) {
    Mat Bt = sp.U.adjoint() * (B * sp.U);
    for (const SpMat* A : As) {
      Mat At = sp.U.adjoint() * (*A * sp.U);
      out.push_back(serial_pair_sum(sp, occ, beta, At, Bt, etas, kind));
    }
    return out;
  }

  const PairWindow win = pair_window(occ);
  const Eigen::Index na = win.a_end, nb = sp.energy.size() - win.b0;
  if (na == 0 || nb == 0) return std::vector<std::vector<cplx>>(As.size(), std::vector<cplx>(etas.size(), 0.0));
  Mat BtT = (sp.U.rightCols(nb).adjoint() * (B * sp.U.leftCols(na))).transpose();  // na x nb
  for (const SpMat* A : As) {
    Mat At = sp.U.leftCols(na).adjoint() * (*A * sp.U.rightCols(nb));  // na x nb
    out.push_back(pair_sum(sp, occ, win, beta, At, BtT, etas, kind));
  }
  return out;
}

cplx commutator_expectation(const Spectrum& sp, double beta, const SpMat& A, const SpMat& B,
                            Exec exec) {
  // <[a* A a, a* B a]> = Tr([A, B] Gamma), Gamma_ba = <a*_a a_b> = (U f U^dagger)_ba
  const Eigen::Index N = sp.energy.size();
  RVec f(N);
  for (Eigen::Index i = 0; i < N; ++i) f(i) = fermi(beta, sp.energy(i) - sp.mu);
  SpMat C = A * B - B * A;
  if (exec == Exec::serial) {
    Mat gamma = sp.U * f.asDiagonal() * sp.U.adjoint();
    cplx acc = 0;
    for (int k = 0; k < C.outerSize(); ++k)
      for (SpMat::InnerIterator it(C, k); it; ++it) acc += it.value() * gamma(it.col(), it.row());
    return acc;
  }
  Eigen::Index na = 0;
  while (na < N && f(na) > kOccupationTiny) ++na;
  Mat Ut = sp.U.leftCols(na).transpose();  // column b holds row b of U
  RVec fa = f.head(na);
  std::vector<cplx> part(C.outerSize(), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < C.outerSize(); ++k) {
    cplx acc = 0;
    for (SpMat::InnerIterator it(C, k); it; ++it) {
      // Gamma_{col,row} = sum_j U(col, j) f_j conj(U(row, j))
      cplx g = (Ut.col(it.col()).array() * fa.array().cast<cplx>() * Ut.col(it.row()).conjugate().array()).sum();
      acc += it.value() * g;
    }
    part[k] = acc;
  }
  cplx acc = 0;
  for (cplx p : part) acc += p;
  return acc;
}

std::vector<cplx> kubo_realtime(const Spectrum& sp, const CurrentOperators& cur,
                                const TestFunctionPair& tf, double beta,
                                const std::vector<double>& etas, int nu, Exec exec) {
  for (double e : etas)
    if (!(e > 0)) throw ConfigError("kubo_realtime: eta must be positive");
  if (nu != 0 && nu != 1) throw ConfigError("kubo: nu must be 0 or 1");
  SpMat P = cur.smeared(0, tf.mu);
  SpMat J = tf.theta * cur.smeared(nu, tf.phi);
  return pair_response(sp, beta, P, J, etas, PairWeight::realtime, exec);
}

cplx kubo_realtime(const Spectrum& sp, const CurrentOperators& cur, const TestFunctionPair& tf,
                   double beta, double eta, int nu, Exec exec) {
  return kubo_realtime(sp, cur, tf, beta, std::vector<double>{eta}, nu, exec).front();
}

double bosonic_ceil(double beta, double eta) {
  double step = kTwoPi / beta;
  double n = std::ceil(eta / step - 1e-9);
  return std::max(n, 1.0) * step;
}

cplx kubo_euclidean(const Spectrum& sp, const CurrentOperators& cur, const TestFunctionPair& tf,
                    double beta, double eta_beta, int nu, Exec exec) {
  double n = eta_beta * beta / kTwoPi;
  if (!(n > 0.5) || std::abs(n - std::round(n)) > 1e-9)
    throw ConfigError("kubo_euclidean: eta_beta must lie in (2 pi / beta) N");
  if (nu != 0 && nu != 1) throw ConfigError("kubo: nu must be 0 or 1");
  SpMat P = cur.smeared(0, tf.mu);
  SpMat J = tf.theta * cur.smeared(nu, tf.phi);
  return pair_response(sp, beta, P, J, {eta_beta}, PairWeight::euclidean, exec).front();
}

}  // namespace edgeflow
