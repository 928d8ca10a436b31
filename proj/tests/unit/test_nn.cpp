#include <doctest.h>

#include <cmath>

#include "tmpdir.hpp"
#include "vtb/grad_check.hpp"
#include "vtb/ops.hpp"
#include "vtb/params.hpp"
#include "vtb/rng.hpp"

using namespace vtb;
using namespace vtb::nn;

namespace {

Tensor randn(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  for (auto& v : t.span()) v = static_cast<float>(rng.normal());
  return t;
}

// Plain nested loops, zero padding.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const auto n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor out({n, cout, oh, ow});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double s = b.empty() ? 0.0 : b[co];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - pad;
                const long ix = static_cast<long>(ox * stride + kx) - pad;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                s += x[((i * cin + ci) * h + iy) * wd + ix] * w[((co * cin + ci) * kh + ky) * kw + kx];
              }
          out[((i * cout + co) * oh + oy) * ow + ox] = static_cast<float>(s);
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches the direct loop") {
  Rng rng(1);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}, std::pair{2, 2}}) {
    const auto x = randn({2, 3, 9, 7}, rng);
    const auto w = randn({4, 3, 3, 3}, rng);
    const auto b = randn({4}, rng);
    const auto got = conv2d(constant(x), constant(w), constant(b), stride, pad).value();
    const auto want = conv_oracle(x, w, b, stride, pad);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-4));
  }
}

TEST_CASE("maxpool2 matches a window scan, floor on odd sizes") {
  Rng rng(2);
  const auto x = randn({2, 3, 7, 6}, rng);
  const auto y = maxpool2(constant(x)).value();
  REQUIRE(y.shape() == Shape{2, 3, 3, 3});
  for (std::size_t p = 0; p < 6; ++p)
    for (std::size_t oy = 0; oy < 3; ++oy)
      for (std::size_t ox = 0; ox < 3; ++ox) {
        float m = -1e30f;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, x[(p * 7 + 2 * oy + dy) * 6 + 2 * ox + dx]);
        CHECK(y[(p * 3 + oy) * 3 + ox] == m);
      }
}

TEST_CASE("softmax closed form and row sums") {
  const auto s = softmax(constant(Tensor({1, 2}, std::vector<float>{std::log(2.0f), 0.0f}))).value();
  CHECK(s[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  CHECK(s[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  Rng rng(3);
  auto big = randn({5, 7}, rng);
  for (auto& v : big.span()) v *= 200.0f;
  const auto p = softmax(constant(big)).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 7; ++c) sum += p[r * 7 + c];
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("dropout modes") {
  Rng rng(4);
  const auto x = constant(randn({4, 50}, rng));
  CHECK(dropout(x, 0.5f, 9, Mode::eval).value() == x.value());
  CHECK(dropout(x, 0.0f, 9, Mode::train).value() == x.value());
  const auto a = dropout(x, 0.5f, 9, Mode::train).value();
  CHECK(a == dropout(x, 0.5f, 9, Mode::train).value());
  CHECK(a != dropout(x, 0.5f, 10, Mode::train).value());
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0f) ++zeros;
    else CHECK(a[i] == doctest::Approx(2.0f * x.value()[i]));
  }
  CHECK(zeros > 60);
  CHECK(zeros < 140);
  CHECK_THROWS(dropout(x, 1.0f, 0, Mode::train));
}

TEST_CASE("cross entropy of uniform logits is log C") {
  const auto l = cross_entropy(constant(Tensor({2, 4}, 0.0f)), std::vector<int>{1, 3});
  CHECK(l.value()[0] == doctest::Approx(std::log(4.0)));
}

TEST_CASE("adam single step closed form") {
  ParamStore store;
  auto p = store.add_parameter("p", Tensor({1}, 1.0f));
  p.grad_buffer()[0] = 1.0f;
  AdamConfig cfg;
  cfg.weight_decay = 0.0f;
  store.adam_step(cfg);
  CHECK(p.value()[0] == doctest::Approx(1.0 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-7));
  CHECK(store.step_count() == 1);
}

TEST_CASE("adam five step trajectory against the reference formula") {
  for (bool decoupled : {false, true}) {
    ParamStore store;
    auto p = store.add_parameter("p", Tensor({3}, std::vector<float>{0.5f, -1.0f, 2.0f}));
    AdamConfig cfg;
    cfg.decoupled = decoupled;
    double x[3] = {0.5, -1.0, 2.0}, m[3] = {}, v[3] = {};
    for (int t = 1; t <= 5; ++t) {
      store.zero_grad();
      for (int i = 0; i < 3; ++i) {
        const double g = std::sin(t + i);
        p.grad_buffer()[i] = static_cast<float>(g);
        double ge = g;
        if (!decoupled) ge += cfg.weight_decay * x[i];
        else x[i] -= cfg.lr * cfg.weight_decay * x[i];
        m[i] = 0.9 * m[i] + 0.1 * ge;
        v[i] = 0.999 * v[i] + 0.001 * ge * ge;
        const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
        x[i] -= cfg.lr * mh / (std::sqrt(vh) + 1e-8);
      }
      store.adam_step(cfg);
    }
    for (int i = 0; i < 3; ++i) CHECK(std::abs(p.value()[i] - x[i]) / std::abs(x[i]) < 1e-6);
  }
}

TEST_CASE("adam with zero gradient and no decay leaves parameters") {
  ParamStore store;
  auto p = store.add_parameter("p", Tensor({2}, std::vector<float>{0.25f, -3.0f}));
  p.grad_buffer();
  AdamConfig cfg;
  cfg.weight_decay = 0.0f;
  store.adam_step(cfg);
  CHECK(p.value() == Tensor({2}, std::vector<float>{0.25f, -3.0f}));
}

TEST_CASE("batchnorm statistics") {
  auto st = BatchNormState::make(2);
  const auto g = constant(Tensor({2}, 1.0f)), b = constant(Tensor({2}, 0.0f));
  const auto x = constant(Tensor({2, 2, 1, 2}, std::vector<float>{1, 3, 10, 10, 5, 7, 20, 20}));
  CHECK_THROWS_AS(batchnorm(x, g, b, st, Mode::eval), BatchNormError);
  const auto y = batchnorm(x, g, b, st, Mode::train).value();
  // channel 0 holds {1,3,5,7}: mean 4, biased var 5
  CHECK(y[0] == doctest::Approx(-3.0 / std::sqrt(5.0 + 1e-5)).epsilon(1e-5));
  // first batch seeds the running statistics directly (unbiased variance)
  CHECK(st.running_mean.value()[0] == doctest::Approx(4.0));
  CHECK(st.running_var.value()[0] == doctest::Approx(20.0 / 3.0));
  const auto e = batchnorm(x, g, b, st, Mode::eval).value();
  CHECK(e[0] == doctest::Approx(-3.0 / std::sqrt(20.0 / 3.0 + 1e-5)).epsilon(1e-5));
}

TEST_CASE("layer gradients through the checker") {
  Rng rng(5);
  auto x = parameter(randn({2, 3, 6, 6}, rng));
  auto w = parameter(randn({4, 3, 3, 3}, rng));
  auto b = parameter(randn({4}, rng));
  GradCheckOptions o;
  o.seed = 1;
  auto fn = [&] { return conv2d(x, w, b, 1, 1); };
  const GradCheckResult parts[] = {grad_check(fn, x, o), grad_check(fn, w, o), grad_check(fn, b, o)};
  CHECK(combined_rel_error(parts) < 1e-3);
  auto fl = [&] { return layer_norm(x, constant(Tensor({6}, 1.0f)), constant(Tensor({6}, 0.5f))); };
  CHECK(grad_check(fl, x, o).rel_error < 1e-3);
}

TEST_CASE("checkpoint save and load") {
  TempDir dir("ckpt");
  Rng rng(6);
  ParamStore a;
  a.add_parameter("w", randn({3, 4}, rng));
  auto st = BatchNormState::make(3);
  a.add_batchnorm("bn", parameter(Tensor({3}, 1.0f)), parameter(Tensor({3}, 0.0f)), st);
  a.save(dir.path / "a.ckpt");

  ParamStore b;
  b.add_parameter("w", Tensor({3, 4}, 0.0f));
  auto st2 = BatchNormState::make(3);
  b.add_batchnorm("bn", parameter(Tensor({3}, 0.0f)), parameter(Tensor({3}, 0.0f)), st2);
  CHECK(a.content_hash() != b.content_hash());
  b.load(dir.path / "a.ckpt");
  CHECK(a.content_hash() == b.content_hash());

  ParamStore c;
  c.add_parameter("w", Tensor({4, 3}, 0.0f));
  CHECK_THROWS_AS(c.load(dir.path / "a.ckpt"), CheckpointError);
}

TEST_CASE("fan-in uniform bound") {
  Rng rng(7);
  const auto t = fan_in_uniform({100, 25}, 25, rng);
  float mx = 0;
  for (float v : t.span()) mx = std::max(mx, std::abs(v));
  CHECK(mx <= 0.2f);
  CHECK(mx > 0.19f);
}

TEST_CASE("uninitialised tensors have the requested shape") {
  const auto t = Tensor::uninit({3, 5});
  CHECK(t.size() == 15);
  CHECK(t.shape() == Shape{3, 5});
}
