#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "wbary/measures.hpp"
#include "wbary/support.hpp"

namespace wbary {

enum class Formulation { Original, Reduced, General, Hybrid, Transportation };

std::string_view to_string(Formulation f);
/// Throws std::invalid_argument for unknown names.
Formulation parse_formulation(std::string_view name);

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VarKind : std::uint8_t { Z, Y, W };

/// Z: jh = j. Y: (i, jh = j, k). W: jh = combination ordinal h.
/// All indices are 0-based; names in exported files add one.
struct VarRole {
  VarKind kind = VarKind::Z;
  std::uint32_t i = 0;
  std::uint32_t k = 0;
  std::uint32_t jh = 0;
};

enum class RowKind : std::uint8_t { Marginal, Balance };

/// Marginal: Σ ... = d_ik with index = k. Balance: Σ_k y_ijk − z_j = 0 with index = j.
struct RowRole {
  RowKind kind = RowKind::Marginal;
  std::uint32_t i = 0;
  std::uint32_t index = 0;
};

/// Compressed sparse columns with sorted row indices inside each column.
struct SparseColumns {
  std::vector<std::uint64_t> start{0};
  std::vector<std::uint32_t> row;
  std::vector<double> value;

  std::size_t cols() const { return start.size() - 1; }
  std::size_t nnz() const { return row.size(); }
  void reserve(std::size_t cols, std::size_t nnz);
  void push(std::uint32_t r, double v) {
    row.push_back(r);
    value.push_back(v);
  }
  void close_column() { start.push_back(row.size()); }
};

/// min cᵀx subject to Ax = b, x ≥ 0.
struct LpModel {
  Formulation formulation = Formulation::General;
  std::size_t num_rows = 0;
  SparseColumns matrix;
  std::vector<double> cost;
  std::vector<double> rhs;
  std::vector<VarRole> vars;
  std::vector<RowRole> rows;

  std::size_t num_vars() const { return cost.size(); }
  std::size_t num_constraints() const { return num_rows; }
  std::size_t nnz() const { return matrix.nnz(); }
};

/// Structural checks on a built model; returns human-readable problems.
std::vector<std::string> check_model(const LpModel& m);

double cost_fixed(const Combination& c, const Problem& p);

LpModel build_original(const SupportAtlas& atlas, const Problem& p);
LpModel build_reduced(const SupportAtlas& atlas, const Problem& p);
LpModel build_general(const Problem& p, std::uint64_t cap = kDefaultCombinationCap);
LpModel build_transportation(const Problem& p);
LpModel build_hybrid(const SupportAtlas& atlas, const HybridSplit& split, const Problem& p);

/// Formulation-level dispatch; `atlas` may be null for general and transportation.
LpModel build_model(Formulation f, const Problem& p, const SupportAtlas* atlas,
                    std::uint64_t cap = kDefaultCombinationCap);

enum class SizeRegime { GeneralPosition, FullGrid };

struct SizePrediction {
  std::uint64_t variables = 0;
  std::uint64_t constraints = 0;
  SizeRegime regime = SizeRegime::GeneralPosition;
  Formulation formulation = Formulation::Original;
};

/// Closed-form sizes. `p_or_K` is |P_i| for general position and K for full
/// grids; `d` is ignored for general position. Throws UnsupportedError for
/// pairs without a closed form and std::overflow_error past 64 bits.
SizePrediction predict_sizes(SizeRegime regime, Formulation f, std::uint64_t n, std::uint64_t p_or_K,
                             std::uint64_t d = 1);

/// Fraction of variables saved going from `from` to `to`: 1 − vars(to)/vars(from).
double variable_reduction(const SizePrediction& from, const SizePrediction& to);

}  // namespace wbary
