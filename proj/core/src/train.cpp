#include "vtb/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vtb {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (patience < 1 || plateau_patience < 1) throw std::invalid_argument("patience values must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw std::invalid_argument("plateau_factor must be in (0,1)");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"decoupled_weight_decay", c.decoupled_weight_decay},
       {"patience", c.patience},
       {"plateau_patience", c.plateau_patience},
       {"plateau_factor", c.plateau_factor},
       {"min_lr", c.min_lr},
       {"max_epochs", c.max_epochs},
       {"batch_size", c.batch_size},
       {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.decoupled_weight_decay = j.value("decoupled_weight_decay", c.decoupled_weight_decay);
  c.patience = j.value("patience", c.patience);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.min_lr = j.value("min_lr", c.min_lr);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const EpochStats& e) {
  j = {{"epoch", e.epoch},
       {"train_loss", e.train_loss},
       {"val_loss", e.val_loss},
       {"val_accuracy", e.val_accuracy},
       {"lr", e.lr}};
}

void from_json(const json& j, EpochStats& e) {
  e.epoch = j.at("epoch").get<int>();
  e.train_loss = j.at("train_loss").get<double>();
  e.val_loss = j.at("val_loss").get<double>();
  e.val_accuracy = j.at("val_accuracy").get<double>();
  e.lr = j.at("lr").get<double>();
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

bool EarlyStopper::update(int epoch, double score) {
  if (best_epoch_ == 0 || score > best_) {
    best_ = score;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

PlateauScheduler::PlateauScheduler(double lr, int patience, double factor, double min_lr)
    : lr_(lr), patience_(patience), factor_(factor), min_lr_(min_lr),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ = std::max(lr_ * factor_, min_lr_);
    bad_ = 0;
  }
  return lr_;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, int epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5EED0000ULL + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    out.emplace_back(idx.begin() + static_cast<long>(i), idx.begin() + static_cast<long>(std::min(n, i + batch_size)));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

EvalOutput evaluate_detailed(Classifier& model, const SampleSet& split, std::size_t batch_size) {
  if (split.size() == 0) throw std::invalid_argument("evaluate: empty split");
  const auto c = static_cast<std::size_t>(split.num_classes);
  EvalOutput out;
  out.probs.reserve(split.size() * c);
  double loss_sum = 0.0;
  const nn::ForwardContext ctx{nn::Mode::eval, 0};
  const nn::NoGradGuard no_grad;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < split.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(split.size(), start + batch_size); ++i) idx.push_back(i);
    const Batch b = make_batch(split, idx);
    const ForwardOutput f = model.forward(b, ctx);
    loss_sum += static_cast<double>(nn::cross_entropy(f.logits, b.labels).value()[0]) * static_cast<double>(b.size());
    const nn::Var p = nn::softmax(f.logits, -1);
    out.probs.insert(out.probs.end(), p.value().span().begin(), p.value().span().end());
    if (!f.alpha.empty()) {
      const std::size_t k = f.alpha.shape()[1];
      std::vector<double> mean(k, 0.0);
      for (std::size_t i = 0; i < b.size(); ++i) {
        for (std::size_t j = 0; j < k; ++j) mean[j] += f.alpha[i * k + j];
      }
      for (auto& m : mean) m /= static_cast<double>(b.size());
      out.alpha.push_back(std::move(mean));
    }
  }
  out.loss = loss_sum / static_cast<double>(split.size());
  out.metrics = compute_metrics(out.probs, split.labels, split.num_classes);
  return out;
}

Metrics evaluate(Classifier& model, const SampleSet& split, std::size_t batch_size) {
  return evaluate_detailed(model, split, batch_size).metrics;
}

TrainResult train(Classifier& model, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() < 2) throw std::invalid_argument("train: need at least 2 training samples");
  if (val_set.size() == 0) throw std::invalid_argument("train: empty validation split");

  nn::ParamStore& store = model.params();
  nn::AdamConfig adam;
  adam.weight_decay = static_cast<float>(cfg.weight_decay);
  adam.decoupled = cfg.decoupled_weight_decay;

  EarlyStopper stopper(cfg.patience);
  PlateauScheduler scheduler(cfg.lr, cfg.plateau_patience, cfg.plateau_factor, cfg.min_lr);
  TrainResult result;
  std::vector<nn::Tensor> best = store.snapshot();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double epoch_lr = scheduler.lr();
    adam.lr = static_cast<float>(epoch_lr);
    double loss_sum = 0.0;
    const auto batches = epoch_batches(train_set.size(), cfg.batch_size, cfg.seed, epoch);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch b = make_batch(train_set, batches[bi]);
      const nn::ForwardContext ctx{nn::Mode::train,
                                   mix_seed(cfg.seed, (static_cast<std::uint64_t>(epoch) << 20) + bi)};
      const nn::Var loss = nn::cross_entropy(model.forward(b, ctx).logits, b.labels);
      const float lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(bi),
                              result.history);
      }
      loss_sum += static_cast<double>(lv) * static_cast<double>(b.size());
      store.zero_grad();
      nn::backward(loss);
      store.adam_step(adam);
    }

    const EvalOutput val = evaluate_detailed(model, val_set);
    if (!std::isfinite(val.loss)) {
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch), result.history);
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(train_set.size()), val.loss,
                              val.metrics.accuracy, epoch_lr});
    if (stopper.update(epoch, val.metrics.accuracy)) best = store.snapshot();
    scheduler.step(val.loss);
    if (stopper.should_stop(epoch)) break;
  }
  store.zero_grad();
  store.restore(best);
  result.best_epoch = stopper.best_epoch();
  result.best_val_accuracy = stopper.best();
  return result;
}

}  // namespace vtb
