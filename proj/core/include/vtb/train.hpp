#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "vtb/metrics.hpp"
#include "vtb/model.hpp"

namespace vtb {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-2;
  bool decoupled_weight_decay = false;
  int patience = 10;          // epochs without a new best validation accuracy
  int plateau_patience = 3;   // epochs without a lower validation loss
  double plateau_factor = 0.5;
  double min_lr = 1e-5;
  int max_epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;  // rate used during this epoch
};

void to_json(nlohmann::json& j, const EpochStats& e);
void from_json(const nlohmann::json& j, EpochStats& e);

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::vector<EpochStats> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<EpochStats>& history() const { return history_; }

 private:
  std::vector<EpochStats> history_;
};

// Tracks the best validation accuracy; strict improvement resets the count.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);
  // Returns true when `score` is a new best.
  bool update(int epoch, double score);
  bool should_stop(int epoch) const { return best_epoch_ > 0 && epoch - best_epoch_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_ = 0.0;
};

// Multiplies the rate by `factor` once `patience` consecutive epochs pass
// without a strictly lower validation loss, then starts counting again.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int patience, double factor, double min_lr);
  // Feeds one epoch's validation loss; returns the rate for the next epoch.
  double step(double val_loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double min_lr_;
  double best_;
  int bad_ = 0;
};

// Minibatch index lists for one epoch: a seeded shuffle cut into batches of
// `batch_size`; a trailing batch of one sample joins the previous batch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, int epoch);

struct EvalOutput {
  Metrics metrics;
  double loss = 0.0;
  std::vector<float> probs;                 // [N,C]
  std::vector<std::vector<double>> alpha;   // mean fusion weights per batch
};

EvalOutput evaluate_detailed(Classifier& model, const SampleSet& split, std::size_t batch_size = 64);
Metrics evaluate(Classifier& model, const SampleSet& split, std::size_t batch_size = 64);

// Adam + early stopping on validation accuracy + plateau halving on
// validation loss. The best-validation-accuracy parameters are restored.
TrainResult train(Classifier& model, const SampleSet& train_set, const SampleSet& val_set,
                  const TrainConfig& cfg);

}  // namespace vtb
