#include <benchmark/benchmark.h>

#include "vtb/encoders.hpp"
#include "vtb/ops.hpp"

using namespace vtb;
using namespace vtb::nn;

namespace {

Tensor filled(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  for (auto& v : t.span()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto res = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto x = constant(filled({8, 32, res, res}, rng));
  const auto w = constant(filled({64, 32, 3, 3}, rng));
  const auto b = constant(filled({64}, rng));
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto res = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  auto x = parameter(filled({8, 32, res, res}, rng));
  auto w = parameter(filled({64, 32, 3, 3}, rng));
  auto b = parameter(filled({64}, rng));
  const Tensor seed({8, 64, res, res}, 1.0f);
  for (auto _ : state) {
    backward(conv2d(x, w, b, 1, 1), seed);
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_EncoderForward(benchmark::State& state) {
  const auto kind = state.range(0) == 0 ? EncoderKind::shallow_cnn : EncoderKind::deep_cnn;
  const auto res = static_cast<std::size_t>(state.range(1));
  ParamStore store;
  Rng rng(3);
  auto enc = make_encoder({.kind = kind, .resolution = res}, store, "e", rng);
  const auto x = constant(filled({16, 3, res, res}, rng));
  enc->forward(x, {Mode::train, 0});
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(enc->forward(x, {Mode::eval, 0}));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_EncoderForward)->ArgsProduct({{0, 1}, {64, 128}})->Unit(benchmark::kMillisecond);

}  // namespace
