#include <doctest.h>

#include <cmath>

#include "vtb/encoders.hpp"
#include "vtb/fusion.hpp"

using namespace vtb;
using namespace vtb::nn;

namespace {

Tensor randn(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  for (auto& v : t.span()) v = static_cast<float>(rng.uniform());
  return t;
}

struct Built {
  ParamStore store;
  std::unique_ptr<Encoder> enc;
};

std::unique_ptr<Built> build(EncoderConfig cfg) {
  auto b = std::make_unique<Built>();
  Rng rng(11);
  b->enc = make_encoder(cfg, b->store, "e", rng);
  return b;
}

// Train once so batch-norm has running statistics, then compare eval passes.
void check_eval_determinism(Encoder& enc, const Var& x) {
  enc.forward(x, {Mode::train, 1});
  const auto a = enc.forward(x, {Mode::eval, 1}).value();
  const auto b = enc.forward(x, {Mode::eval, 2}).value();
  CHECK(a == b);
}

}  // namespace

TEST_CASE("image encoders: shapes, counts, determinism") {
  Rng rng(1);
  const auto x = constant(randn({2, 3, 64, 64}, rng));
  {
    auto b = build({.kind = EncoderKind::shallow_cnn, .resolution = 64});
    CHECK(b->enc->output_dim() == 64);
    CHECK(b->enc->forward(x, {Mode::train, 0}).shape() == Shape{2, 64});
    CHECK(b->store.parameter_count() == 286016);
    check_eval_determinism(*b->enc, x);
  }
  {
    auto b = build({.kind = EncoderKind::deep_cnn, .resolution = 64});
    CHECK(b->enc->output_dim() == 256);
    CHECK(b->enc->forward(x, {Mode::train, 0}).shape() == Shape{2, 256});
    CHECK(b->store.parameter_count() == 1049728);
    check_eval_determinism(*b->enc, x);
  }
  CHECK_THROWS_AS(build({.kind = EncoderKind::deep_cnn, .resolution = 48}), EncoderConfigError);
  auto b = build({.kind = EncoderKind::shallow_cnn, .resolution = 64});
  CHECK_THROWS_AS(b->enc->forward(constant(Tensor({1, 3, 32, 32})), {}), ShapeError);
}

TEST_CASE("numeric encoders: shapes and determinism") {
  Rng rng(2);
  const auto x = constant(randn({3, 29}, rng));
  for (auto kind : {EncoderKind::fcn, EncoderKind::transformer, EncoderKind::oscnn}) {
    auto b = build({.kind = kind, .length = 29, .output_dim = 40, .d_model = 16, .heads = 4, .layers = 1,
                    .oscnn_channels = 4});
    CAPTURE(to_string(kind));
    CHECK(b->enc->forward(x, {Mode::train, 0}).shape() == Shape{3, 40});
    check_eval_determinism(*b->enc, x);
  }
}

TEST_CASE("os-cnn kernel sizes are 1 and primes") {
  CHECK(oscnn_kernel_sizes(24) == std::vector<std::size_t>{1, 2, 3, 5, 7, 11, 13, 17, 19, 23});
  CHECK(oscnn_kernel_sizes(6) == std::vector<std::size_t>{1, 2, 3, 5});
  CHECK(oscnn_kernel_sizes(1) == std::vector<std::size_t>{1});
}

TEST_CASE("sinusoidal encoding values") {
  const auto pe = sinusoidal_encoding(4, 6);
  CHECK(pe[0 * 6 + 0] == doctest::Approx(0.0));
  CHECK(pe[0 * 6 + 1] == doctest::Approx(1.0));
  CHECK(pe[1 * 6 + 0] == doctest::Approx(std::sin(1.0)));
  CHECK(pe[2 * 6 + 3] == doctest::Approx(std::cos(2.0 / std::pow(10000.0, 2.0 / 6.0))));
}

TEST_CASE("attention weights are row-stochastic") {
  ParamStore store;
  Rng rng(3);
  MhsaLayer layer(8, 2, store, "m", rng);
  Tensor attn;
  const auto y = layer.forward(constant(randn({2, 5, 8}, rng)), &attn);
  CHECK(y.shape() == Shape{2, 5, 8});
  REQUIRE(attn.shape() == Shape{2, 2, 5, 5});
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) s += attn[r * 5 + c];
    CHECK(std::abs(s - 1.0) < 1e-5);
  }
}

TEST_CASE("concat fusion dimension") {
  Rng rng(4);
  const Var h[] = {constant(randn({2, 3}, rng)), constant(randn({2, 5}, rng))};
  const auto z = concat_fuse(h);
  CHECK(z.shape() == Shape{2, 8});
  CHECK(z.value()[3] == h[1].value()[0]);
}

TEST_CASE("weighted fusion: single branch gets weight one, equal scores split evenly") {
  Rng rng(5);
  const Var h1[] = {constant(randn({3, 4}, rng))};
  const Var w1[] = {constant(randn({1, 4}, rng))};
  const auto one = weighted_fuse(h1, w1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(one.alpha.value()[i] == doctest::Approx(1.0));
  CHECK(one.z.value() == h1[0].value());

  const Var h[] = {constant(Tensor({1, 2}, 1.0f)), constant(Tensor({1, 2}, 1.0f))};
  const Var w[] = {constant(Tensor({1, 2}, 0.5f)), constant(Tensor({1, 2}, 0.5f))};
  const auto even = weighted_fuse(h, w);
  CHECK(even.alpha.value()[0] == doctest::Approx(0.5));
  CHECK(even.alpha.value()[1] == doctest::Approx(0.5));
}

TEST_CASE("fusion module and classifier head") {
  Rng rng(6);
  ParamStore store;
  Fusion weighted({64, 256}, {FusionStrategy::weighted, 32}, store, "f", rng);
  CHECK(weighted.output_dim() == 32);
  Fusion cat({64, 256}, {FusionStrategy::concat, 32}, store, "g", rng);
  CHECK(cat.output_dim() == 320);
  const Var h[] = {constant(randn({3, 64}, rng)), constant(randn({3, 256}, rng))};
  Tensor alpha;
  const auto z = weighted.forward(h, &alpha);
  CHECK(z.shape() == Shape{3, 32});
  CHECK(alpha.shape() == Shape{3, 2});
  ClassifierHead head(32, 4, store, "h", rng);
  const auto p = head.classify(z, {Mode::eval, 0}).value();
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) s += p[r * 4 + c];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
  CHECK(parse_fusion("weighted") == FusionStrategy::weighted);
  CHECK_THROWS(parse_fusion("sum"));
}
