#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wbary/lp_solver.hpp"
#include "wbary/models.hpp"

namespace wbary {

inline constexpr double kDropThreshold = 1e-11;
inline constexpr double kVerifyTolerance = 1e-8;
inline constexpr double kSplitTolerance = 1e-9;

struct SupportMass {
  Point point;
  double mass = 0.0;
};

/// Mass y_ijk moved between support point j of the barycenter and point k of measure i.
struct TransportEntry {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  double mass = 0.0;
};

struct VerificationReport {
  double total_mass = 0.0;
  bool total_mass_ok = false;
  double marginal_error = 0.0;
  bool marginals_ok = false;
  double cost_recomputed = 0.0;
  double cost_error = 0.0;
  bool cost_ok = false;
  std::size_t support_size = 0;
  std::size_t sparsity_bound = 0;
  /// Advisory: guaranteed only for vertex solutions.
  bool sparse = false;
  /// Advisory: guaranteed only for vertex solutions of the exact formulations.
  bool non_mass_splitting = false;
  std::vector<std::string> splitting;
  double dropped_mass = 0.0;
  bool renormalized = false;

  bool passed() const { return total_mass_ok && marginals_ok && cost_ok; }
  std::vector<std::string> lines() const;
};

struct BarycenterSolution {
  std::vector<SupportMass> support;
  std::vector<TransportEntry> transport;
  double cost = 0.0;
  Formulation source = Formulation::General;
  VerificationReport verification;
};

/// Reads z, y and w variables back into a measure. w_h lands on the support
/// point of its combination: via `atlas` when given, otherwise by the mean
/// quantization rule. Throws std::invalid_argument for non-optimal solutions.
BarycenterSolution extract_barycenter(const LpSolution& sol, const LpModel& m, const Problem& p,
                                      const SupportAtlas* atlas = nullptr,
                                      double dedup_tol = kDefaultDedupTolerance);

VerificationReport verify_solution(const BarycenterSolution& b, const Problem& p);

/// Σ_i λ_i Σ ‖x_j − x_ik‖² y_ijk. Throws std::out_of_range for bad indices.
double total_cost(const BarycenterSolution& b, const Problem& p);

/// {"status", "objective", "support": [{"point", "mass"}], "transport": [[i, j, k, mass]]}
/// with 1-based indices.
void write_solution_json(std::ostream& out, const LpSolution& sol, const BarycenterSolution* b);

/// Fixed-format MPS. Names longer than a field push the rest of the line right.
void export_mps(const LpModel& m, std::ostream& sink);

std::string column_name(const VarRole& v);
std::string row_name(const RowRole& r);

}  // namespace wbary
