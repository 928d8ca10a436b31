#include "vtb/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace vtb {

void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"auc", m.auc}};
}

void from_json(const nlohmann::json& j, Metrics& m) {
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.auc = j.at("auc").get<double>();
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size() || truth.empty()) throw std::invalid_argument("accuracy: bad sizes");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == truth[i];
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

double macro_f1(std::span<const int> pred, std::span<const int> truth, int num_classes) {
  if (pred.size() != truth.size() || truth.empty()) throw std::invalid_argument("macro_f1: bad sizes");
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    if (denom > 0) total += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return total / num_classes;
}

double binary_auc(std::span<const double> scores, std::span<const int> positive) {
  const std::size_t n = scores.size();
  if (positive.size() != n) throw std::invalid_argument("binary_auc: bad sizes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t npos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) rank_sum += avg;
    }
    i = j;
  }
  for (int p : positive) npos += p != 0;
  const std::size_t nneg = n - npos;
  if (npos == 0 || nneg == 0) return 0.5;
  const double np = static_cast<double>(npos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(nneg));
}

double auc_score(std::span<const float> probs, std::span<const int> truth, int num_classes) {
  const std::size_t n = truth.size();
  const auto c = static_cast<std::size_t>(num_classes);
  if (probs.size() != n * c) throw std::invalid_argument("auc_score: bad sizes");
  auto one_vs_rest = [&](std::size_t cls) {
    std::vector<double> s(n);
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = probs[i * c + cls];
      pos[i] = truth[i] == static_cast<int>(cls);
    }
    return binary_auc(s, pos);
  };
  if (c == 2) return one_vs_rest(1);
  double total = 0.0;
  int present = 0;
  for (std::size_t cls = 0; cls < c; ++cls) {
    if (std::find(truth.begin(), truth.end(), static_cast<int>(cls)) == truth.end()) continue;
    total += one_vs_rest(cls);
    ++present;
  }
  return present ? total / present : 0.5;
}

Metrics compute_metrics(std::span<const float> probs, std::span<const int> truth, int num_classes) {
  const std::size_t n = truth.size();
  const auto c = static_cast<std::size_t>(num_classes);
  std::vector<int> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* row = probs.data() + i * c;
    pred[i] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return {accuracy(pred, truth), macro_f1(pred, truth, num_classes), auc_score(probs, truth, num_classes)};
}

}  // namespace vtb
