#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vtb {

struct GradCase {
  std::string name;
  bool stack = false;  // whole encoder / fusion / classifier rather than one op
  double rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;

  bool passed() const { return checked > 0 && rel_error < tolerance; }
};

inline constexpr double kLayerGradTolerance = 1e-3;
inline constexpr double kStackGradTolerance = 5e-3;

// Every op and every module stack on tiny inputs, for one seed.
std::vector<GradCase> gradient_cases(std::uint64_t seed);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Gradient checks, rasterizer oracles and statistics oracles on small
// fixtures; finishes in a few seconds.
std::vector<SuiteResult> run_selfcheck();

}  // namespace vtb
