#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "wbary/key_index.hpp"
#include "wbary/measures.hpp"

namespace wbary {

using BigCount = boost::multiprecision::cpp_int;

inline constexpr std::uint64_t kDefaultCombinationCap = 100'000'000;
inline constexpr double kDefaultDedupTolerance = 1e-9;

class CombinationBlowup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One support point per measure. Indices are 0-based; the ordinal is the
/// position in lexicographic order of `indices` (0-based as well).
struct Combination {
  std::vector<std::uint32_t> indices;
  std::uint64_t ordinal = 0;
};

/// Π|P_i|, or CombinationBlowup when it exceeds `cap`.
std::uint64_t combination_total(const Problem& p, std::uint64_t cap = kDefaultCombinationCap);

/// Lexicographic odometer over S*. Holds one combination at a time.
class CombinationStream {
 public:
  explicit CombinationStream(const Problem& p, std::uint64_t cap = kDefaultCombinationCap);

  /// Advances to the next combination; false once the stream is exhausted.
  bool next();
  const Combination& current() const { return current_; }
  std::uint64_t total() const { return total_; }

  /// Index of the lowest measure whose choice changed in the last `next()`.
  std::size_t changed_from() const { return changed_from_; }

 private:
  std::vector<std::uint32_t> sizes_;
  Combination current_;
  std::uint64_t total_ = 0;
  bool started_ = false;
  std::size_t changed_from_ = 0;
};

std::vector<std::uint64_t> combination_strides(const Problem& p);
Combination combination_at(const Problem& p, std::uint64_t ordinal);

Point weighted_mean(const Combination& c, const Problem& p);

/// Maps weighted means onto integer keys. Two means are identified iff their
/// keys coincide. Coordinates are scaled by the common denominator of the
/// weights (n for uniform weights) and rounded to tol * span per axis.
class MeanQuantizer {
 public:
  MeanQuantizer() = default;
  MeanQuantizer(const Problem& p, double tol);

  std::size_t dim() const { return dim_; }
  /// Scaled contribution of support point (i, k) along axis l.
  double contribution(std::size_t i, std::size_t k, std::size_t l) const {
    return contrib_[offset_[i] + k][l];
  }
  void key_of(const Combination& c, std::span<std::int64_t> out) const;
  void key_of_point(const Point& x, std::span<std::int64_t> out) const;
  double scale() const { return scale_; }

 private:
  std::size_t dim_ = 0;
  double scale_ = 1.0;
  std::vector<double> quantum_;
  std::vector<std::size_t> offset_;
  std::vector<std::vector<double>> contrib_;
};

enum class Regime { Exact, Grid };

/// S with its incidence structure. Pair q enumerates (i, k) in order:
/// q = pair_offset[i] + k.
struct SupportAtlas {
  Regime regime = Regime::Exact;
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<Point> support_points;
  /// Integer identity of each support point, `dim` entries per point. Exact
  /// regime: quantized scaled mean. Grid regime: per-axis lattice sums.
  std::vector<std::int64_t> keys;
  std::vector<std::size_t> pair_offset;
  /// For every pair q, the sorted j reachable from it.
  std::vector<std::vector<std::uint32_t>> s_ik;
  /// For every j, the sorted pairs q contributing to it.
  std::vector<std::vector<std::uint32_t>> s_j;
  /// N_j, saturating at UINT64_MAX in the grid regime.
  std::vector<std::uint64_t> multiplicity;
  /// Fine grid containing S (grid regime only).
  std::optional<GridSpec> grid;
  /// Original lattice (grid regime only).
  std::optional<GridSpec> coarse_grid;
  MeanQuantizer quantizer;
  KeyIndex index;
  /// 1-based lattice cell of every pair, `dim` entries each (grid regime only).
  std::vector<long> pair_cells;
  std::uint64_t combinations = 0;

  std::size_t size() const { return support_points.size(); }
  std::size_t num_pairs() const { return pair_offset.back(); }
  std::size_t pair_index(std::size_t i, std::size_t k) const { return pair_offset[i] + k; }
  std::pair<std::size_t, std::size_t> pair_of(std::size_t q) const;

  /// j of the mean of `c`, if that mean is in the atlas.
  std::optional<std::uint32_t> locate(const Combination& c, const Problem& p) const;
};

SupportAtlas build_atlas_exact(const Problem& p, double dedup_tol = kDefaultDedupTolerance,
                               std::uint64_t cap = kDefaultCombinationCap);

/// Requires every support point on `g` and uniform weights.
SupportAtlas build_atlas_grid(const Problem& p, const GridSpec& g);

/// Number of n-tuples in {1..K}^n summing to s.
BigCount count_dice(long s, long K, long n);

/// N_j = Π_l F(s_l, K, n) for per-axis lattice sums s_l.
BigCount combination_count(std::span<const std::int64_t> lattice_sums, long K, long n);

struct HybridSplit {
  /// Combination ordinals given fixed-transport variables, ascending.
  std::vector<std::uint64_t> w_side;
  /// Support indices j given (y, z) variables, ascending.
  std::vector<std::uint32_t> y_side;
  /// Per-j variable budget that N_j was compared against.
  std::vector<std::uint64_t> threshold;
};

HybridSplit hybrid_split(const SupportAtlas& atlas, const Problem& p);

/// Split with every combination on one side; used for the degenerate hybrids.
HybridSplit all_w_split(const SupportAtlas& atlas, const Problem& p);
HybridSplit all_y_split(const SupportAtlas& atlas);

/// Best-effort detection of a common lattice carrying every support point.
std::optional<GridSpec> detect_grid(const Problem& p, double tol = 1e-9);

}  // namespace wbary
