#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace vtb {

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double auc = 0.0;
};

void to_json(nlohmann::json& j, const Metrics& m);
void from_json(const nlohmann::json& j, Metrics& m);

double accuracy(std::span<const int> pred, std::span<const int> truth);

// Unweighted mean of per-class F1 over classes 0..C-1; a class with no
// predictions and no true members contributes 0.
double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes);

// Mann-Whitney rank statistic with average ranks for ties. Returns 0.5 when
// one of the two groups is empty.
double binary_auc(std::span<const double> scores, std::span<const int> positive);

// C = 2: AUC of the class-1 score. C > 2: mean one-vs-rest AUC over the
// classes present in `truth`. `probs` is row-major [N,C].
double auc_score(std::span<const float> probs, std::span<const int> truth, int num_classes);

Metrics compute_metrics(std::span<const float> probs, std::span<const int> truth, int num_classes);

}  // namespace vtb
