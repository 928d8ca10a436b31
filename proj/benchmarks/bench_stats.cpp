#include <benchmark/benchmark.h>

#include "vtb/rng.hpp"
#include "vtb/stats.hpp"

using namespace vtb;

namespace {

void BM_WilcoxonExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  stats::WilcoxonOptions o;
  o.method = stats::WilcoxonMethod::exact;
  for (auto _ : state) benchmark::DoNotOptimize(stats::wilcoxon_signed_rank(a, b, o));
}
BENCHMARK(BM_WilcoxonExact)->Arg(10)->Arg(25)->Arg(50);

void BM_CliffsDelta(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(stats::cliffs_delta(a, b));
}
BENCHMARK(BM_CliffsDelta)->Range(64, 1 << 14);

}  // namespace
