#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wbary {

/// Dense values with an explicit nonzero pattern. The pattern may list
/// entries that have since cancelled to zero.
struct SparseVector {
  std::vector<double> val;
  std::vector<std::uint32_t> idx;
  std::vector<char> in;

  SparseVector() = default;
  explicit SparseVector(std::size_t n) : val(n, 0.0), in(n, 0) {}

  std::size_t size() const { return val.size(); }
  void clear();
  void set(std::uint32_t i, double v) {
    if (!in[i]) {
      in[i] = 1;
      idx.push_back(i);
    }
    val[i] = v;
  }
  /// Marks every entry as part of the pattern.
  void densify();
};

struct ColumnView {
  std::span<const std::uint32_t> rows;
  std::span<const double> vals;
};

/// Product-form inverse of a square basis. Reinversion peels row and column
/// singletons so triangular bases produce no fill; the remaining bump is
/// pivoted on the largest magnitude. Every eta pivots on one row, and the
/// basic variable occupying that row is the one whose column produced it.
class BasisFactor {
 public:
  struct Outcome {
    /// Row each input column was pivoted on, or -1 when it was dropped.
    std::vector<std::int64_t> row_of;
    /// Rows left without a pivot; the caller must supply columns for them.
    std::vector<std::uint32_t> uncovered;
  };

  BasisFactor() = default;
  explicit BasisFactor(std::size_t m) : m_(m) {}

  std::size_t rows() const { return m_; }

  Outcome factor(std::span<const ColumnView> cols);

  /// x <- B⁻¹ x
  void ftran(SparseVector& x) const;
  /// y <- B⁻ᵀ y
  void btran(SparseVector& y) const;

  /// Replaces the basic column at row p; `alpha` is the FTRAN of the entering column.
  void update(const SparseVector& alpha, std::uint32_t p);

  std::size_t num_updates() const { return piv_row_.size() - base_etas_; }
  std::size_t eta_nnz() const { return row_.size(); }
  std::size_t base_nnz() const { return base_nnz_; }

 private:
  void clear();
  void push_eta(std::uint32_t r, double pivot, const SparseVector& col, bool skip_zero);
  void apply_forward(std::size_t t, std::vector<double>& x) const;
  double apply_backward(std::size_t t, const std::vector<double>& y) const;

  std::size_t m_ = 0;
  std::size_t base_etas_ = 0;
  std::size_t base_nnz_ = 0;
  std::vector<std::uint32_t> piv_row_;
  std::vector<double> piv_val_;
  std::vector<std::uint64_t> start_{0};
  std::vector<std::uint32_t> row_;
  std::vector<double> val_;
  // Etas pivoting on each row, and etas whose structure touches each row, ascending.
  std::vector<std::vector<std::uint32_t>> pivots_on_;
  std::vector<std::vector<std::uint32_t>> touching_;
};

}  // namespace wbary
