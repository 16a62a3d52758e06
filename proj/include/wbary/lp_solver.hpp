#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wbary/models.hpp"

namespace wbary {

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericFailure };

std::string_view to_string(SolveStatus s);

enum class PivotRule {
  /// Smallest eligible index with the textbook ratio test; cannot cycle.
  Bland,
  /// Most negative reduced cost over rotating column blocks with a two-pass
  /// ratio test, dropping to Bland after a run of degenerate pivots.
  Dantzig,
};

struct SolveOptions {
  std::uint64_t max_iters = 50'000'000;
  PivotRule pivot_rule = PivotRule::Bland;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  /// Final ‖Ax − b‖∞ accepted as optimal.
  double residual_tol = 1e-9;
  /// Updates between reinversions.
  std::size_t refactor_interval = 100;
  /// Consecutive degenerate pivots before Dantzig hands over to Bland.
  std::size_t degenerate_limit = 200;
  /// Progress lines on stderr every this many iterations; 0 disables.
  std::uint64_t log_every = 0;
};

struct LpSolution {
  SolveStatus status = SolveStatus::NumericFailure;
  double objective = 0.0;
  std::vector<double> values;
  /// Basic variables; artificial rows appear as num_vars + row.
  std::vector<std::uint64_t> basis;
  bool is_vertex = true;
  std::uint64_t iterations = 0;
  double residual = 0.0;
  std::string message;
};

LpSolution solve(const LpModel& m, const SolveOptions& opts = {});

/// ‖Ax − b‖∞ for the given values.
double primal_residual(const LpModel& m, const std::vector<double>& x);

}  // namespace wbary
