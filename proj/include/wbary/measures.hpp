#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wbary {

using Point = std::vector<double>;

/// Tolerance on Σ masses and Σ weights for an accepted measure or problem.
inline constexpr double kMassTolerance = 1e-12;

/// Input sums further than this from 1 are rejected unless normalization is requested.
inline constexpr double kLoadMassTolerance = 1e-9;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WeightError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

struct DiscreteMeasure {
  std::vector<Point> points;
  std::vector<double> masses;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

/// Regular lattice {origin + step * (a - 1) : a in {1..side}^dim}.
struct GridSpec {
  std::size_t dim = 0;
  long side = 0;
  Point origin;
  double step = 1.0;

  /// 1-based lattice indices of `p`, or nullopt when `p` is off the lattice.
  std::optional<std::vector<long>> cell_of(const Point& p, double tol = 1e-9) const;
  Point point_at(std::span<const long> cell) const;
  std::size_t num_cells() const;
};

struct Problem {
  std::vector<DiscreteMeasure> measures;
  std::vector<double> weights;
  /// Present when the measures came from grid-csv input.
  std::optional<GridSpec> grid;

  std::size_t n() const { return measures.size(); }
  std::size_t dim() const { return measures.empty() ? 0 : measures.front().dim(); }
  std::size_t total_support() const;
  bool has_uniform_weights(double tol = kMassTolerance) const;
};

struct Violation {
  std::string invariant;
  std::string message;
  std::vector<std::size_t> indices;
};

std::vector<Violation> validate_measure(const DiscreteMeasure& m);
std::vector<Violation> validate_problem(const Problem& p);

/// Builds a problem and throws InvariantError listing every violation.
Problem make_problem(std::vector<DiscreteMeasure> measures, std::vector<double> weights);

std::vector<double> uniform_weights(std::size_t n);

enum class InputFormat { Json, GridCsv };

struct LoadOptions {
  /// Forces renormalization for formats that cannot declare it themselves.
  bool normalize = false;
};

/// JSON takes exactly one source; grid-csv takes one source per measure.
Problem load_problem(std::span<std::istream* const> sources, InputFormat format,
                     const LoadOptions& opts = {});
Problem load_problem(std::istream& source, InputFormat format, const LoadOptions& opts = {});

struct GridMeasure {
  DiscreteMeasure measure;
  GridSpec grid;
};

GridMeasure load_grid_csv_measure(std::istream& in, const LoadOptions& opts = {});

/// Inverse of the JSON loader; the lattice is written under "grid" when present.
void write_problem_json(std::ostream& out, const Problem& p);

std::string format_violations(const std::vector<Violation>& violations);

}  // namespace wbary
