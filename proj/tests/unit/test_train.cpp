#include <doctest.h>

#include <cmath>
#include <set>

#include "vtb/metrics.hpp"
#include "vtb/model.hpp"
#include "vtb/train.hpp"

using namespace vtb;

namespace {

// Logits ignore the input, so every sample gets the same prediction.
class ConstantClassifier final : public Classifier {
 public:
  explicit ConstantClassifier(int classes) {
    bias_ = store_.add_parameter("bias", nn::Tensor({static_cast<std::size_t>(classes)}, 0.0f));
    bias_.mutable_value()[0] = 1.0f;
  }
  ForwardOutput forward(const Batch& batch, const nn::ForwardContext&) override {
    const nn::Tensor zeros({batch.size(), bias_.value().size()}, 0.0f);
    return {nn::add(nn::constant(zeros), bias_), {}};
  }
  nn::ParamStore& params() override { return store_; }

 private:
  nn::ParamStore store_;
  nn::Var bias_;
};

SampleSet toy_split(std::size_t n, int classes) {
  SampleSet s;
  s.num_classes = classes;
  s.charts.resize(1);
  for (std::size_t i = 0; i < n; ++i) {
    s.labels.push_back(static_cast<int>(i % classes));
    s.series.push_back({static_cast<float>(i), 0.0f});
    s.charts[0].push_back(RasterImage(16, 16));
  }
  return s;
}

}  // namespace

TEST_CASE("accuracy and macro F1 by hand") {
  const std::vector<int> pred{1, 1, 0, 0}, truth{1, 0, 0, 1};
  CHECK(accuracy(pred, truth) == doctest::Approx(0.5));
  // both classes: precision 1/2, recall 1/2
  CHECK(macro_f1(pred, truth, 2) == doctest::Approx(0.5));
  const std::vector<int> p3{0, 0, 0}, t3{0, 0, 1};
  // class 0: P 2/3 R 1 F 0.8; class 1: 0; class 2 absent: 0
  CHECK(macro_f1(p3, t3, 3) == doctest::Approx(0.8 / 3));
}

TEST_CASE("binary AUC equals the pair-counting definition") {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      y.push_back(rng.uniform() < 0.4);
      s.push_back(std::floor(rng.uniform() * 8) + (y.back() ? 1.5 : 0.0));
    }
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < s.size(); ++j)
        if (y[i] && !y[j]) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    CHECK(binary_auc(s, y) == doctest::Approx(wins / pairs).epsilon(1e-12));
  }
  CHECK(binary_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}) == 0.5);
}

TEST_CASE("multiclass AUC is the mean one-vs-rest AUC") {
  const std::vector<float> probs{0.7f, 0.2f, 0.1f, 0.1f, 0.8f, 0.1f, 0.2f, 0.2f, 0.6f, 0.5f, 0.4f, 0.1f};
  const std::vector<int> truth{0, 1, 2, 1};
  double sum = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 4; ++i) {
      s.push_back(probs[i * 3 + c]);
      y.push_back(truth[i] == c);
    }
    sum += binary_auc(s, y);
  }
  CHECK(auc_score(probs, truth, 3) == doctest::Approx(sum / 3));
}

TEST_CASE("plateau scheduler halves after three flat epochs") {
  PlateauScheduler s(1e-3, 3, 0.5, 1e-5);
  CHECK(s.step(1.0) == 1e-3);
  CHECK(s.step(1.0) == 1e-3);
  CHECK(s.step(1.0) == 1e-3);
  CHECK(s.step(1.0) == doctest::Approx(5e-4));
  CHECK(s.step(0.5) == doctest::Approx(5e-4));
  for (int i = 0; i < 100; ++i) s.step(0.5);
  CHECK(s.lr() == doctest::Approx(1e-5));
}

TEST_CASE("early stopper counts strict improvements only") {
  EarlyStopper e(10);
  CHECK(e.update(1, 0.5));
  CHECK_FALSE(e.update(2, 0.5));
  CHECK_FALSE(e.should_stop(10));
  CHECK(e.should_stop(11));
  CHECK(e.update(3, 0.6));
  CHECK(e.best_epoch() == 3);
  CHECK_THROWS(EarlyStopper(0));
}

TEST_CASE("frozen validation accuracy stops at best epoch plus patience") {
  ConstantClassifier model(2);
  const auto tr = toy_split(10, 2), va = toy_split(6, 2);
  TrainConfig cfg;
  cfg.max_epochs = 100;
  const auto res = train(model, tr, va, cfg);
  CHECK(res.best_epoch == 1);
  CHECK(res.history.size() == 11);
  for (std::size_t i = 1; i < res.history.size(); ++i) CHECK(res.history[i].lr <= res.history[i - 1].lr);
}

TEST_CASE("epoch batches: seeded shuffle and trailing singleton merge") {
  const auto b = epoch_batches(65, 32, 3, 1);
  REQUIRE(b.size() == 2);
  CHECK(b[0].size() == 32);
  CHECK(b[1].size() == 33);
  std::set<std::size_t> all;
  for (const auto& x : b) all.insert(x.begin(), x.end());
  CHECK(all.size() == 65);
  CHECK(epoch_batches(65, 32, 3, 1) == b);
  CHECK(epoch_batches(65, 32, 3, 2) != b);
  CHECK(epoch_batches(1, 32, 0, 1).size() == 1);
}

TEST_CASE("overfits eight samples") {
  LabeledSeriesSet set;
  set.meta.length = 12;
  set.meta.num_classes = 2;
  Rng rng(4);
  for (int i = 0; i < 8; ++i) {
    TimeSeriesInstance inst;
    inst.label = i % 2;
    for (int t = 0; t < 12; ++t) {
      const double base = inst.label ? t : 12 - t;
      inst.values.push_back(static_cast<float>(base + rng.normal()));
    }
    set.instances.push_back(inst);
  }
  const std::vector<ChartSpec> charts{{ChartType::line, ColorMode::mono, LabelMode::no_label, 32}};
  const auto s = build_samples(set, charts);
  ModelConfig mc;
  mc.charts = charts;
  mc.backbone = nn::EncoderKind::shallow_cnn;
  mc.num_classes = 2;
  mc.length = 12;
  MultiBranchClassifier model(mc, 0);
  TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.weight_decay = 0.0;
  const auto res = train(model, s, s, cfg);
  CHECK(res.best_val_accuracy == 1.0);
  CHECK(evaluate(model, s).accuracy == 1.0);
}
