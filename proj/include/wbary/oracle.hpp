#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "wbary/measures.hpp"
#include "wbary/models.hpp"

namespace wbary::oracle {

class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Caps {
  std::size_t max_vars = 14;
  std::size_t max_constraints = 9;
};

enum class OracleStatus { Optimal, Infeasible };

struct OracleResult {
  OracleStatus status = OracleStatus::Infeasible;
  double value = 0.0;
  /// Column sets of every optimal basis found.
  std::vector<std::vector<std::size_t>> witnesses;
  std::uint64_t instance_hash = 0;
};

/// Minimum of cᵀx over all basic feasible solutions, found by trying every
/// column subset of size rank(A) with dense Gaussian elimination.
OracleResult basis_enumeration_solve(const LpModel& m, const Caps& caps = {});

/// Number of tuples in {1..K}^n summing to s, by exhaustive enumeration (K^n ≤ 10^7).
std::uint64_t dice_enumeration(long s, long K, long n);

/// Multiplicity of every weighted mean, keyed by its rounded coordinates.
struct DuplicateCensus {
  std::map<std::vector<long long>, std::uint64_t> counts;
  long double scale = 1.0L;
  std::vector<long double> unit;

  std::vector<long long> key_of(const Point& mean) const;
};

/// Enumerates every combination (at most 10^6) and counts coinciding means.
DuplicateCensus enumerate_duplicates(const Problem& p, double tol = 1e-9);

}  // namespace wbary::oracle
