#include "vtb/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "vtb/chart.hpp"
#include "vtb/encoders.hpp"
#include "vtb/fusion.hpp"
#include "vtb/grad_check.hpp"
#include "vtb/model.hpp"
#include "vtb/stats.hpp"

namespace vtb {

namespace {

using nn::Tensor;
using nn::Var;

SuiteResult suite(const std::string& name, const std::function<std::string()>& body) {
  try {
    const std::string failure = body();
    return {name, failure.empty(), failure.empty() ? "ok" : failure};
  } catch (const std::exception& e) {
    return {name, false, std::string("exception: ") + e.what()};
  }
}

std::string gradients() {
  std::ostringstream bad;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const auto& c : gradient_cases(seed)) {
      if (!c.passed()) bad << c.name << " seed " << seed << " err " << c.rel_error << "; ";
    }
  }
  return bad.str();
}

std::string rasterizer() {
  std::ostringstream bad;
  for (int res : {64, 128, 256}) {
    for (auto type : kAllChartTypes) {
      ChartSpec mono{type, ColorMode::mono, LabelMode::no_label, res};
      ChartSpec color = mono;
      color.color_mode = ColorMode::color;
      const std::vector<float> v{0.3f, -1.0f, 2.0f, 0.5f, 1.5f, -0.2f, 0.9f};
      const auto a = render(v, mono);
      const auto c = render(v, color);
      if (render(v, mono) != a) bad << "non-deterministic " << mono.tag() << "; ";
      for (int y = 0; y < res; ++y) {
        for (int x = 0; x < res; ++x) {
          if (a.is_white(x, y) != c.is_white(x, y)) {
            bad << "color/mono positions differ " << mono.tag() << "; ";
            y = res;
            break;
          }
        }
      }
    }
    const std::vector<float> flat(40, 5.0f);
    const auto img = render(flat, ChartSpec{ChartType::line, ColorMode::mono, LabelMode::no_label, res});
    const int mid = (res - 1) / 2;
    if (img.count_non_white() != static_cast<std::size_t>(res)) bad << "constant line pixel count at " << res << "; ";
    for (int x = 0; x < res; ++x) {
      if (img.is_white(x, mid)) bad << "constant line gap at " << res << "; ";
    }
  }
  const PlotRect r{0, 0, 127, 127};
  const std::vector<float> pos{1.0f, 2.0f}, neg{-1.0f, -2.0f};
  if (baseline_row(pos, r) != 127) bad << "positive baseline not at bottom; ";
  if (baseline_row(neg, r) != 0) bad << "negative baseline not at top; ";
  return bad.str();
}

std::string statistics() {
  std::ostringstream bad;
  // Exact Wilcoxon vs enumeration of all 2^n sign flips.
  Rng rng(11);
  for (int n = 1; n <= 10; ++n) {
    std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n), 0.0);
    for (auto& v : x) v = static_cast<double>(static_cast<int>(rng.below(7)) - 3) + 0.5 * static_cast<double>(rng.below(2));
    for (auto& v : x) {
      if (v == 0.0) v = 1.0;
    }
    const auto res = stats::wilcoxon_signed_rank(x, y, {.method = stats::WilcoxonMethod::exact});
    std::vector<double> absd;
    for (double v : x) absd.push_back(std::fabs(v));
    const auto ranks = stats::average_ranks(absd);
    std::size_t le = 0, ge = 0;
    const std::size_t total = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < total; ++mask) {
      double w = 0.0;
      for (int i = 0; i < n; ++i) {
        if (mask >> i & 1U) w += ranks[static_cast<std::size_t>(i)];
      }
      le += w <= res.w_plus + 1e-9;
      ge += w >= res.w_plus - 1e-9;
    }
    const double p = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
    if (std::fabs(p - res.p_value) > 1e-12) bad << "wilcoxon exact n=" << n << "; ";
  }
  // Cliff's delta vs all pairs.
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(5 + rng.below(10)), b(5 + rng.below(10));
    for (auto& v : a) v = static_cast<double>(rng.below(6));
    for (auto& v : b) v = static_cast<double>(rng.below(6));
    long s = 0;
    for (double ai : a) {
      for (double bj : b) s += (ai > bj) - (ai < bj);
    }
    const double want = static_cast<double>(s) / static_cast<double>(a.size() * b.size());
    if (std::fabs(stats::cliffs_delta(a, b).delta - want) > 1e-12) bad << "cliffs delta; ";
  }
  const std::vector<double> two{0.0, 1.0};
  if (std::fabs(stats::mean_ci95(two).half_width - 12.7062 * 0.5) > 1e-3) bad << "t quantile; ";
  return bad.str();
}

std::string fusion_simplex() {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(5);
    std::vector<Var> h, w;
    for (std::size_t i = 0; i < k; ++i) {
      Tensor t({3, 8});
      for (auto& v : t.span()) v = static_cast<float>(rng.normal() * 5.0);
      h.push_back(nn::constant(t));
      Tensor a({1, 8});
      for (auto& v : a.span()) v = static_cast<float>(rng.normal());
      w.push_back(nn::constant(a));
    }
    const auto r = nn::weighted_fuse(h, w);
    for (std::size_t i = 0; i < 3; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const float a = r.alpha.value()[i * k + j];
        if (a < 0.0f || a > 1.0f) return "alpha outside [0,1]";
        s += a;
      }
      if (std::fabs(s - 1.0) > 1e-6) return "alpha does not sum to 1";
    }
  }
  return {};
}

}  // namespace

namespace {

class GradCases {
 public:
  explicit GradCases(std::uint64_t seed) : seed_(seed), rng_(mix_seed(seed, 0x6AD)) {}

  Var param(nn::Shape s, double sd = 1.0) {
    Tensor t(std::move(s));
    for (auto& v : t.span()) v = static_cast<float>(rng_.normal() * sd);
    return nn::parameter(std::move(t));
  }

  // Max error over all targets; `max_coords` samples big tensors.
  void check(const std::string& name, bool stack, const std::function<Var()>& fn, std::vector<Var> targets,
             std::size_t max_coords = 0) {
    GradCase c{name, stack, 0.0, stack ? kStackGradTolerance : kLayerGradTolerance, 0, 0};
    std::vector<nn::GradCheckResult> parts;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      nn::GradCheckOptions o;
      o.seed = mix_seed(seed_, i);
      o.max_coords = max_coords;
      parts.push_back(nn::grad_check(fn, targets[i], o));
      c.checked += parts.back().checked;
      c.skipped += parts.back().skipped;
    }
    c.rel_error = nn::combined_rel_error(parts);
    out.push_back(c);
  }

  std::vector<GradCase> out;
  std::uint64_t seed_;
  Rng rng_;
};

std::vector<Var> trainable(const nn::ParamStore& store) { return store.parameters(); }

}  // namespace

std::vector<GradCase> gradient_cases(std::uint64_t seed) {
  GradCases g(seed);
  using nn::Mode;

  {
    Var a = g.param({2, 3, 4}), b = g.param({3, 4}), c = g.param({2, 3, 4});
    g.check("add", false, [&] { return nn::add(a, c); }, {a, c});
    g.check("add_broadcast", false, [&] { return nn::add(a, b); }, {a, b});
    g.check("scale", false, [&] { return nn::scale(a, -1.7f); }, {a});
    g.check("relu", false, [&] { return nn::relu(a); }, {a});
    g.check("reshape", false, [&] { return nn::reshape(a, {6, 4}); }, {a});
    g.check("permute_0213", false, [&] { return nn::permute_0213(nn::reshape(a, {2, 3, 2, 2})); }, {a});
    g.check("softmax_last", false, [&] { return nn::softmax(a, -1); }, {a});
    g.check("softmax_middle", false, [&] { return nn::softmax(a, 1); }, {a});
    g.check("mean_axis", false, [&] { return nn::mean_axis(a, 1); }, {a});
    const std::vector<Var> parts{a, c};
    g.check("concat", false, [&] { return nn::concat(parts, 2); }, {a, c});
    g.check("dropout", false, [&] { return nn::dropout(a, 0.3f, 99, Mode::train); }, {a});
    Var gm = g.param({4}), bt = g.param({4});
    g.check("layer_norm", false, [&] { return nn::layer_norm(a, gm, bt); }, {a, gm, bt});
    Tensor r(a.shape());
    for (auto& v : r.span()) v = static_cast<float>(g.rng_.uniform(-1, 1));
    g.check("weighted_sum", false, [&] { return nn::weighted_sum(a, r); }, {a});
  }
  {
    Var x = g.param({3, 5}), w = g.param({4, 5}), b = g.param({4});
    g.check("linear", false, [&] { return nn::linear(x, w, b); }, {x, w, b});
    g.check("linear_no_bias", false, [&] { return nn::linear(x, w, Var{}); }, {x, w});
    const std::vector<int> labels{0, 3, 1};
    g.check("cross_entropy", false, [&] { return nn::cross_entropy(x, labels); }, {x});
  }
  {
    Var a = g.param({2, 3, 4}), b = g.param({2, 4, 5}), bt = g.param({2, 5, 4});
    g.check("bmm", false, [&] { return nn::bmm(a, b); }, {a, b});
    g.check("bmm_trans_b", false, [&] { return nn::bmm(a, bt, true); }, {a, bt});
  }
  {
    Var x = g.param({2, 2, 5, 5}), w = g.param({3, 2, 3, 3}), b = g.param({3});
    g.check("conv2d", false, [&] { return nn::conv2d(x, w, b, 1, 1); }, {x, w, b});
    g.check("conv2d_stride2", false, [&] { return nn::conv2d(x, w, Var{}, 2, 0); }, {x, w});
    g.check("maxpool2", false, [&] { return nn::maxpool2(x); }, {x});
    Var gm = g.param({2}), bt = g.param({2});
    auto st = nn::BatchNormState::make(2);
    g.check("batchnorm_train", false, [&] { return nn::batchnorm(x, gm, bt, st, Mode::train); }, {x, gm, bt});
    g.check("batchnorm_eval", false, [&] { return nn::batchnorm(x, gm, bt, st, Mode::eval); }, {x, gm, bt});
  }
  {
    Var x = g.param({2, 3, 7}), w = g.param({2, 3, 4}), b = g.param({2});
    g.check("conv1d_same", false, [&] { return nn::conv1d_same(x, w, b); }, {x, w, b});
  }

  nn::ForwardContext train{Mode::train, mix_seed(seed, 7)};
  {
    nn::ParamStore store;
    Rng rng(seed);
    nn::EncoderConfig cfg{.kind = nn::EncoderKind::shallow_cnn, .resolution = 16};
    auto enc = nn::make_encoder(cfg, store, "cnn", rng);
    Var x = g.param({2, 3, 16, 16}, 0.5);
    auto targets = trainable(store);
    targets.push_back(x);
    g.check("shallow_cnn", true, [&] { return enc->forward(x, train); }, targets, 12);
  }
  {
    nn::ParamStore store;
    Rng rng(seed);
    nn::EncoderConfig cfg{.kind = nn::EncoderKind::deep_cnn, .resolution = 32};
    auto enc = nn::make_encoder(cfg, store, "cnn", rng);
    Var x = g.param({2, 3, 32, 32}, 0.5);
    auto targets = trainable(store);
    targets.push_back(x);
    g.check("deep_cnn", true, [&] { return enc->forward(x, train); }, targets, 6);
  }
  {
    nn::ParamStore store;
    Rng rng(seed);
    nn::EncoderConfig cfg{.kind = nn::EncoderKind::fcn, .length = 9, .output_dim = 6, .hidden = 8};
    auto enc = nn::make_encoder(cfg, store, "fcn", rng);
    Var x = g.param({3, 9});
    auto targets = trainable(store);
    targets.push_back(x);
    g.check("fcn", true, [&] { return enc->forward(x, train); }, targets, 16);
  }
  {
    nn::ParamStore store;
    Rng rng(seed);
    nn::MhsaLayer layer(8, 2, store, "mhsa", rng);
    Var x = g.param({2, 5, 8});
    auto targets = trainable(store);
    targets.push_back(x);
    g.check("mhsa_layer", true, [&] { return layer.forward(x); }, targets, 16);
  }
  {
    nn::ParamStore store;
    Rng rng(seed);
    nn::EncoderConfig cfg{
        .kind = nn::EncoderKind::transformer, .length = 6, .output_dim = 5, .d_model = 8, .heads = 2, .layers = 2};
    auto enc = nn::make_encoder(cfg, store, "tf", rng);
    Var x = g.param({2, 6});
    auto targets = trainable(store);
    targets.push_back(x);
    g.check("transformer", true, [&] { return enc->forward(x, train); }, targets, 12);
  }
  {
    nn::ParamStore store;
    Rng rng(seed);
    nn::EncoderConfig cfg{.kind = nn::EncoderKind::oscnn, .length = 8, .output_dim = 5, .oscnn_channels = 3,
                          .oscnn_max_kernel = 5};
    auto enc = nn::make_encoder(cfg, store, "os", rng);
    Var x = g.param({3, 8});
    auto targets = trainable(store);
    targets.push_back(x);
    g.check("oscnn", true, [&] { return enc->forward(x, train); }, targets, 12);
  }
  {
    Var h0 = g.param({3, 6}), h1 = g.param({3, 6}), h2 = g.param({3, 6});
    Var w0 = g.param({1, 6}), w1 = g.param({1, 6}), w2 = g.param({1, 6});
    const std::vector<Var> h{h0, h1, h2}, w{w0, w1, w2};
    g.check("weighted_fuse", true, [&] { return nn::weighted_fuse(h, w).z; }, {h0, h1, h2, w0, w1, w2});
    g.check("weighted_fuse_alpha", true, [&] { return nn::weighted_fuse(h, w).alpha; }, {h0, w1});
    g.check("concat_fuse", true, [&] { return nn::concat_fuse(h); }, {h0, h2});
  }
  for (auto strategy : {nn::FusionStrategy::concat, nn::FusionStrategy::weighted}) {
    nn::ParamStore store;
    Rng rng(seed);
    nn::Fusion fusion({4, 6}, {strategy, 5}, store, "fusion", rng);
    nn::ClassifierHead head(fusion.output_dim(), 3, store, "head", rng, 7, 0.5f, 7);
    Var a = g.param({3, 4}), b = g.param({3, 6});
    const std::vector<Var> h{a, b};
    auto targets = trainable(store);
    targets.push_back(a);
    targets.push_back(b);
    g.check(std::string("fusion_head_") + nn::to_string(strategy), true,
            [&] { return head.classify(fusion.forward(h), train); }, targets, 12);
  }
  {
    ModelConfig cfg;
    cfg.charts = {ChartSpec{ChartType::line, ColorMode::color, LabelMode::no_label, 16},
                  ChartSpec{ChartType::bar, ColorMode::mono, LabelMode::no_label, 16}};
    cfg.numeric = true;
    cfg.backbone = nn::EncoderKind::shallow_cnn;
    cfg.numeric_encoder = {.kind = nn::EncoderKind::fcn, .length = 10, .output_dim = 8, .hidden = 8};
    cfg.fusion = {nn::FusionStrategy::weighted, 8};
    cfg.num_classes = 3;
    cfg.length = 10;
    cfg.head_hidden = 8;
    MultiBranchClassifier model(cfg, seed);
    Batch batch;
    for (int k = 0; k < 2; ++k) {
      Tensor img({2, 3, 16, 16});
      for (auto& v : img.span()) v = static_cast<float>(g.rng_.uniform());
      batch.images.push_back(std::move(img));
    }
    batch.series = Tensor({2, 10});
    for (auto& v : batch.series.span()) v = static_cast<float>(g.rng_.normal());
    batch.labels = {0, 2};
    g.check("multibranch_classifier", true,
            [&] { return nn::cross_entropy(model.forward(batch, train).logits, batch.labels); },
            trainable(model.params()), 4);
  }
  return std::move(g.out);
}

std::vector<SuiteResult> run_selfcheck() {
  return {suite("gradients", gradients), suite("rasterizer", rasterizer), suite("statistics", statistics),
          suite("fusion_simplex", fusion_simplex)};
}

}  // namespace vtb
