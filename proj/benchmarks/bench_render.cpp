#include <benchmark/benchmark.h>

#include <cmath>

#include "vtb/chart.hpp"
#include "vtb/png.hpp"

using namespace vtb;

namespace {

std::vector<float> wave(std::size_t n) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(std::sin(0.07 * i) + 0.3 * std::cos(0.31 * i));
  return v;
}

void BM_Render(benchmark::State& state) {
  const auto type = kAllChartTypes[static_cast<std::size_t>(state.range(0))];
  const ChartSpec spec{type, ColorMode::color, LabelMode::with_label, static_cast<int>(state.range(1))};
  const auto v = wave(512);
  for (auto _ : state) benchmark::DoNotOptimize(render(v, spec));
  state.SetLabel(to_string(type));
}
BENCHMARK(BM_Render)->ArgsProduct({{0, 1, 2, 3}, {64, 256}});

void BM_EncodePng(benchmark::State& state) {
  const auto img = render(wave(512), {ChartType::area, ColorMode::color, LabelMode::with_label, 256});
  for (auto _ : state) benchmark::DoNotOptimize(encode_png(img));
}
BENCHMARK(BM_EncodePng);

}  // namespace
