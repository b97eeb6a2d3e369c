// Serial reference against the OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "edgeflow/transport.hpp"

using namespace edgeflow;

namespace {

Exec policy(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

struct KuboCase {
  HoppingModel model;
  Spectrum sp;
  CurrentOperators cur;
  TestFunctionPair tf;

  KuboCase(int L1, int L2)
      : model(build_qwz_model(-1.0, CylinderLattice(L1, L2, 2))),
        sp(diagonalize(model, default_potential(best_frequency(golden_mean(), L1, 2.0), model.lattice,
                                                0.05, 8, 1.0, 0.5))),
        cur(model),
        tf(make_test_functions(model.lattice, make_profile("odd"), 0.4, 4.0)) {}
};

const KuboCase& kubo_case(int L1) {
  static KuboCase small(21, 8), large(55, 12);
  return L1 == 21 ? small : large;
}

void BM_KuboRealtime(benchmark::State& st) {
  const auto& c = kubo_case(static_cast<int>(st.range(1)));
  const std::vector<double> etas{0.16, 0.08};
  for (auto _ : st) benchmark::DoNotOptimize(kubo_realtime(c.sp, c.cur, c.tf, 32.0, etas, 1, policy(st)));
}
BENCHMARK(BM_KuboRealtime)->ArgsProduct({{0, 1}, {21, 55}})->Unit(benchmark::kMillisecond);

void BM_KuboEuclidean(benchmark::State& st) {
  const auto& c = kubo_case(static_cast<int>(st.range(1)));
  const double eta = bosonic_ceil(32.0, 0.16);
  for (auto _ : st) benchmark::DoNotOptimize(kubo_euclidean(c.sp, c.cur, c.tf, 32.0, eta, 1, policy(st)));
}
BENCHMARK(BM_KuboEuclidean)->ArgsProduct({{0, 1}, {21, 55}})->Unit(benchmark::kMillisecond);

void BM_EdgeSpectrum(benchmark::State& st) {
  auto m = build_qwz_model(-1.0, CylinderLattice(static_cast<int>(st.range(1)), 24, 2));
  for (auto _ : st) benchmark::DoNotOptimize(edge_spectrum(m, 0.0, 0.4, EdgeOptions{}, policy(st)));
}
BENCHMARK(BM_EdgeSpectrum)->ArgsProduct({{0, 1}, {89, 233}})->Unit(benchmark::kMillisecond);

void BM_CommutatorExpectation(benchmark::State& st) {
  const auto& c = kubo_case(static_cast<int>(st.range(1)));
  SpMat P = c.cur.smeared(0, c.tf.mu), J = c.cur.smeared(1, c.tf.phi);
  for (auto _ : st) benchmark::DoNotOptimize(commutator_expectation(c.sp, 32.0, P, J, policy(st)));
}
BENCHMARK(BM_CommutatorExpectation)->ArgsProduct({{0, 1}, {21, 55}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
