#include "vtb/grad_check.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "vtb/ops.hpp"
#include "vtb/rng.hpp"

namespace vtb::nn {

namespace {

struct Probe {
  double value;
  std::uint64_t branches;
};

Probe projected(const std::function<Var()>& fn, const Tensor& r) {
  BranchRecorder rec;
  const Var y = fn();
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += static_cast<double>(r[i]) * y.value()[i];
  return {s, rec.digest()};
}

}  // namespace

double combined_rel_error(std::span<const GradCheckResult> parts) {
  double d = 0.0, a = 0.0, n = 0.0;
  for (const auto& p : parts) {
    d += p.diff_sq;
    a += p.analytic_sq;
    n += p.numeric_sq;
  }
  const double norm = std::sqrt(std::max(a, n));
  return norm > 0.0 ? std::sqrt(d) / norm : 0.0;
}

GradCheckResult grad_check(const std::function<Var()>& fn, Var target, const GradCheckOptions& opts) {
  if (!target.requires_grad()) throw std::invalid_argument("grad_check target must require grad");
  Rng rng(opts.seed);

  const Var y0 = fn();
  Tensor r(y0.shape());
  for (auto& v : r.span()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  target.zero_grad();
  backward(weighted_sum(y0, r));
  const Tensor analytic = target.has_grad() ? target.grad() : Tensor(target.shape(), 0.0f);

  std::vector<std::size_t> coords(target.value().size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (opts.max_coords > 0 && opts.max_coords < coords.size()) {
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(opts.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  double amax = 0.0;
  for (float a : analytic.span()) amax = std::max(amax, static_cast<double>(std::fabs(a)));
  // Slopes below the float32 resolution of L over one step are not measurable.
  double mass = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) mass += std::fabs(static_cast<double>(r[i]) * y0.value()[i]);
  const double resolution = 16.0 * std::numeric_limits<float>::epsilon() * std::max(mass, 1.0) / opts.eps;
  const double floor = std::max({1e-3 * amax, resolution, 1e-6});

  GradCheckResult res;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  Tensor& x = target.mutable_value();
  for (const std::size_t i : coords) {
    const float orig = x[i];
    // f at orig + k*eps for k = -2..2; steps are the float values actually applied.
    std::array<double, 5> f{}, at{};
    std::array<std::uint64_t, 5> branches{};
    for (int k = -2; k <= 2; ++k) {
      const float moved = k == 0 ? orig : static_cast<float>(orig + k * opts.eps);
      x[i] = moved;
      const auto p = projected(fn, r);
      f[static_cast<std::size_t>(k + 2)] = p.value;
      branches[static_cast<std::size_t>(k + 2)] = p.branches;
      at[static_cast<std::size_t>(k + 2)] = moved;
    }
    x[i] = orig;
    if (std::adjacent_find(branches.begin(), branches.end(), std::not_equal_to<>()) != branches.end()) {
      ++res.skipped;
      continue;
    }

    std::array<double, 4> slope{};
    for (std::size_t k = 0; k < 4; ++k) slope[k] = (f[k + 1] - f[k]) / (at[k + 1] - at[k]);
    // Smooth curvature bends the slopes linearly; a kink shows up as a jump.
    const auto [lo, hi] = std::minmax_element(slope.begin(), slope.end());
    const double scale = std::max({std::fabs(*lo), std::fabs(*hi), floor});
    const double bend = std::max(std::fabs(slope[0] - 2 * slope[1] + slope[2]), std::fabs(slope[1] - 2 * slope[2] + slope[3]));
    if (bend > opts.kink_tolerance * scale) {
      ++res.skipped;
      continue;
    }
    const double h = (at[4] - at[0]) / 4.0;
    const double numeric = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
    res.max_coord_error = std::max(res.max_coord_error, std::fabs(a - numeric) / denom);
    diff2 += (a - numeric) * (a - numeric);
    a2 += a * a;
    n2 += numeric * numeric;
    ++res.checked;
  }
  res.diff_sq = diff2;
  res.analytic_sq = a2;
  res.numeric_sq = n2;
  const double norm = std::sqrt(std::max(a2, n2));
  if (res.checked > 0) res.rel_error = norm > 0.0 ? std::sqrt(diff2) / std::max(norm, floor) : 0.0;
  return res;
}

}  // namespace vtb::nn
