#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "vtb/autograd.hpp"

namespace vtb::nn {

struct GradCheckOptions {
  double eps = 1e-2;              // stencil step; float32 round-off dominates much below this
  std::uint64_t seed = 0;         // projection vector and coordinate sampling
  std::size_t max_coords = 0;     // 0 checks every coordinate
  double kink_tolerance = 0.02;   // slope jump treated as a kink
};

struct GradCheckResult {
  double rel_error = 0.0;        // ||a - n|| / max(||a||, ||n||) over the checked coordinates
  double max_coord_error = 0.0;  // worst single coordinate, for diagnostics
  double diff_sq = 0.0;          // sum (a - n)^2
  double analytic_sq = 0.0;
  double numeric_sq = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;       // coordinates within 2 eps of a kink
};

// Relative error of the concatenated gradient of several checks.
double combined_rel_error(std::span<const GradCheckResult> parts);

// Checks d/d(target) of L = sum(r * fn()) for a fixed random r against a
// five-point central difference. `fn` must rebuild the graph from `target`'s
// current value on every call. Coordinates whose stencil points took different
// ReLU/max-pool branches (see BranchRecorder), or whose segment slopes jump,
// are skipped.
GradCheckResult grad_check(const std::function<Var()>& fn, Var target,
                           const GradCheckOptions& opts = {});

}  // namespace vtb::nn
