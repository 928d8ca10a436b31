#include "vtb/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace vtb::stats {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

namespace {

double normal_two_sided(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

// P(W+ <= w) and P(W+ >= w) under the null, ranks given doubled (integers).
std::pair<double, double> exact_tails(const std::vector<long>& doubled, long observed) {
  const long total = std::accumulate(doubled.begin(), doubled.end(), 0L);
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long reach = 0;
  for (long r : doubled) {
    reach += r;
    for (long s = reach; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
  }
  const double all = std::ldexp(1.0, static_cast<int>(doubled.size()));
  double le = 0.0, ge = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s <= observed) le += count[static_cast<std::size_t>(s)];
    if (s >= observed) ge += count[static_cast<std::size_t>(s)];
  }
  return {le / all, ge / all};
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& opts) {
  if (x.size() != y.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  if (x.empty()) throw std::invalid_argument("wilcoxon: empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::invalid_argument("wilcoxon: non-finite value");
    const double di = x[i] - y[i];
    if (di != 0.0 || opts.zero_method == ZeroMethod::pratt) d.push_back(di);
  }
  WilcoxonResult res;
  const bool all_zero = std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    res.degenerate = true;
    res.p_value = 1.0;
    return res;
  }

  std::vector<double> absd(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::fabs(d[i]);
  const auto ranks = average_ranks(absd);
  std::vector<double> nz_ranks;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0) res.w_plus += ranks[i];
    if (d[i] < 0) res.w_minus += ranks[i];
    if (d[i] != 0) nz_ranks.push_back(ranks[i]);
  }
  res.n = nz_ranks.size();
  res.statistic = std::min(res.w_plus, res.w_minus);

  const bool exact = opts.method == WilcoxonMethod::exact ||
                     (opts.method == WilcoxonMethod::automatic && res.n <= opts.exact_max_n);
  if (exact) {
    if (res.n > 60) throw std::invalid_argument("wilcoxon: exact method limited to n <= 60");
    std::vector<long> doubled;
    for (double r : nz_ranks) doubled.push_back(std::lround(2.0 * r));
    const auto [le, ge] = exact_tails(doubled, std::lround(2.0 * res.w_plus));
    res.p_value = std::min(1.0, 2.0 * std::min(le, ge));
    res.exact = true;
    return res;
  }

  double mean = 0.0, var = 0.0;
  for (double r : nz_ranks) {
    mean += r / 2.0;
    var += r * r / 4.0;
  }
  double diff = std::fabs(res.w_plus - mean);
  if (opts.continuity) diff = std::max(0.0, diff - 0.5);
  res.p_value = std::min(1.0, normal_two_sided(diff / std::sqrt(var)));
  return res;
}

const char* to_string(EffectSize e) {
  switch (e) {
    case EffectSize::negligible: return "negligible";
    case EffectSize::small: return "small";
    case EffectSize::medium: return "medium";
    case EffectSize::large: return "large";
  }
  return "?";
}

EffectSize effect_size_label(double delta) {
  const double a = std::fabs(delta);
  if (a < 0.1) return EffectSize::negligible;
  if (a < 0.33) return EffectSize::small;
  if (a < 0.47) return EffectSize::medium;
  return EffectSize::large;
}

CliffsDelta cliffs_delta(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("cliffs_delta: empty sample");
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sb.begin(), sb.end());
  long long dominance = 0;
  for (double v : a) {
    const auto below = std::lower_bound(sb.begin(), sb.end(), v) - sb.begin();
    const auto above = sb.end() - std::upper_bound(sb.begin(), sb.end(), v);
    dominance += below - above;
  }
  const double delta = static_cast<double>(dominance) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  return {delta, effect_size_label(delta)};
}

double student_t_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

MeanCi mean_ci95(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("mean_ci95 needs at least 2 values");
  MeanCi r;
  r.n = n;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double sq = 0.0;
  for (double v : values) sq += (v - r.mean) * (v - r.mean);
  const double s = std::sqrt(sq / static_cast<double>(n - 1));
  r.half_width = student_t_quantile(0.975, static_cast<double>(n - 1)) * s / std::sqrt(static_cast<double>(n));
  return r;
}

RankTable avg_rank_table(const std::vector<std::string>& datasets, const std::vector<std::string>& methods,
                         const std::vector<std::vector<std::optional<double>>>& acc) {
  if (acc.size() != datasets.size()) throw std::invalid_argument("avg_rank_table: dataset count mismatch");
  const std::size_t m = methods.size();
  RankTable t;
  for (const auto& name : methods) t.rows.push_back({name, 0.0, 0.0});
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    if (acc[d].size() != m) throw std::invalid_argument("avg_rank_table: row width mismatch");
    if (std::any_of(acc[d].begin(), acc[d].end(), [](const auto& v) { return !v.has_value(); })) {
      t.excluded_datasets.push_back(datasets[d]);
      continue;
    }
    std::vector<double> neg(m);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      neg[k] = -*acc[d][k];
      best = std::max(best, *acc[d][k]);
    }
    const auto ranks = average_ranks(neg);
    for (std::size_t k = 0; k < m; ++k) {
      t.rows[k].average_rank += ranks[k];
      if (*acc[d][k] == best) t.rows[k].wins += 1.0;
    }
    t.used_datasets.push_back(datasets[d]);
  }
  if (!t.used_datasets.empty()) {
    for (auto& r : t.rows) r.average_rank /= static_cast<double>(t.used_datasets.size());
  }
  return t;
}

}  // namespace vtb::stats
