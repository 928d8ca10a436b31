#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vtb::stats {

enum class WilcoxonMethod { automatic, exact, approx };
enum class ZeroMethod { wilcox, pratt };

struct WilcoxonOptions {
  WilcoxonMethod method = WilcoxonMethod::automatic;
  ZeroMethod zero_method = ZeroMethod::wilcox;
  bool continuity = true;
  std::size_t exact_max_n = 25;
};

struct WilcoxonResult {
  double w_plus = 0.0;   // sum of ranks of positive differences
  double w_minus = 0.0;
  double statistic = 0.0;  // min(w_plus, w_minus)
  double p_value = 1.0;    // two-sided
  std::size_t n = 0;       // nonzero differences
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

// Paired test on x - y. Ties in |d| get average ranks. The exact branch
// enumerates the null distribution of W+ over all 2^n sign assignments
// (by dynamic programming on doubled ranks); the approximation uses the
// tie-corrected variance and an optional continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& opts = {});

enum class EffectSize { negligible, small, medium, large };
const char* to_string(EffectSize e);

struct CliffsDelta {
  double delta = 0.0;
  EffectSize magnitude = EffectSize::negligible;
};

// (#{a_i > b_j} - #{a_i < b_j}) / (|a| |b|), in O((n + m) log(n + m)).
CliffsDelta cliffs_delta(std::span<const double> a, std::span<const double> b);
EffectSize effect_size_label(double delta);

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;
};

// Half-width t_{0.975, n-1} * s / sqrt(n); needs n >= 2.
MeanCi mean_ci95(std::span<const double> values);
double student_t_quantile(double p, double dof);

struct RankRow {
  std::string method;
  double average_rank = 0.0;
  double wins = 0.0;
};

struct RankTable {
  std::vector<RankRow> rows;                 // input method order
  std::vector<std::string> used_datasets;
  std::vector<std::string> excluded_datasets;  // had a missing cell
};

// acc[d][m] is the accuracy of method m on dataset d; std::nullopt marks a
// missing cell. Rank 1 is the highest accuracy, ties share the average rank
// and every tied leader is credited one win.
RankTable avg_rank_table(const std::vector<std::string>& datasets, const std::vector<std::string>& methods,
                         const std::vector<std::vector<std::optional<double>>>& acc);

// Average ranks (1-based) of `values`, ascending.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace vtb::stats
