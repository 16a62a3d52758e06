#include "wbary/measures.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace wbary {

namespace {

double sum_of(const std::vector<double>& v) {
  // Neumaier summation keeps the 1e-12 checks meaningful for long mass vectors.
  double sum = 0.0;
  double comp = 0.0;
  for (double x : v) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

// Masses inside the load tolerance band are rescaled so that the stricter
// validation tolerance holds afterwards.
void settle_masses(DiscreteMeasure& m, std::size_t which, bool normalize) {
  double total = sum_of(m.masses);
  if (!(total > 0.0)) throw InvariantError(fmt::format("measure {}: masses sum to {}", which, total));
  if (!normalize && std::abs(total - 1.0) > kLoadMassTolerance)
    throw InvariantError(fmt::format("measure {}: masses sum {} ≠ 1", which, total));
  if (total != 1.0)
    for (double& x : m.masses) x /= total;
}

void settle_weights(std::vector<double>& w) {
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!(w[i] > 0.0)) throw WeightError(fmt::format("weight {} is not positive ({})", i, w[i]));
  double total = sum_of(w);
  if (std::abs(total - 1.0) > kLoadMassTolerance)
    throw WeightError(fmt::format("weights sum {} ≠ 1", total));
  if (total != 1.0)
    for (double& x : w) x /= total;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

double parse_real(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("line {}: '{}' is not a number", line_no, s));
  }
}

long parse_integer(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("line {}: '{}' is not an integer", line_no, s));
  }
}

}  // namespace

std::optional<std::vector<long>> GridSpec::cell_of(const Point& p, double tol) const {
  if (p.size() != dim) return std::nullopt;
  std::vector<long> cell(dim);
  for (std::size_t l = 0; l < dim; ++l) {
    double a = (p[l] - origin[l]) / step;
    double r = std::round(a);
    if (std::abs(a - r) > tol) return std::nullopt;
    cell[l] = static_cast<long>(r) + 1;
    if (cell[l] < 1 || cell[l] > side) return std::nullopt;
  }
  return cell;
}

Point GridSpec::point_at(std::span<const long> cell) const {
  Point p(dim);
  for (std::size_t l = 0; l < dim; ++l) p[l] = origin[l] + step * static_cast<double>(cell[l] - 1);
  return p;
}

std::size_t GridSpec::num_cells() const {
  std::size_t c = 1;
  for (std::size_t l = 0; l < dim; ++l) c *= static_cast<std::size_t>(side);
  return c;
}

std::size_t Problem::total_support() const {
  std::size_t t = 0;
  for (const auto& m : measures) t += m.size();
  return t;
}

bool Problem::has_uniform_weights(double tol) const {
  const double u = 1.0 / static_cast<double>(weights.size());
  return std::all_of(weights.begin(), weights.end(), [&](double w) { return std::abs(w - u) <= tol; });
}

std::vector<Violation> validate_measure(const DiscreteMeasure& m) {
  std::vector<Violation> out;
  if (m.points.empty()) out.push_back({"nonempty", "measure has no support points", {}});
  if (m.points.size() != m.masses.size()) {
    out.push_back({"aligned", fmt::format("{} points but {} masses", m.points.size(), m.masses.size()), {}});
    return out;
  }
  const std::size_t d = m.dim();
  if (!m.points.empty() && d == 0) out.push_back({"dimension", "points have dimension 0", {0}});
  for (std::size_t k = 0; k < m.points.size(); ++k) {
    if (m.points[k].size() != d)
      out.push_back({"dimension", fmt::format("point {} has dimension {} (expected {})", k, m.points[k].size(), d), {k}});
    for (double c : m.points[k])
      if (!std::isfinite(c)) {
        out.push_back({"finite", fmt::format("point {} has a non-finite coordinate", k), {k}});
        break;
      }
  }
  for (std::size_t k = 0; k < m.masses.size(); ++k)
    if (!(m.masses[k] > 0.0)) out.push_back({"positive", fmt::format("mass {} is not positive ({})", k, m.masses[k]), {k}});
  if (!m.masses.empty()) {
    double total = sum_of(m.masses);
    if (std::abs(total - 1.0) > kMassTolerance)
      out.push_back({"normalized", fmt::format("masses sum {} ≠ 1", total), {}});
  }

  std::vector<std::size_t> order(m.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return m.points[a] < m.points[b]; });
  for (std::size_t r = 1; r < order.size(); ++r) {
    std::size_t a = order[r - 1], b = order[r];
    if (m.points[a] == m.points[b]) {
      auto [lo, hi] = std::minmax(a, b);
      out.push_back({"distinct", fmt::format("duplicate support point at indices {},{}", lo, hi), {lo, hi}});
    }
  }
  return out;
}

std::vector<Violation> validate_problem(const Problem& p) {
  std::vector<Violation> out;
  if (p.measures.size() < 2)
    out.push_back({"count", fmt::format("need at least 2 measures, got {}", p.measures.size()), {}});
  if (p.weights.size() != p.measures.size())
    out.push_back({"weights", fmt::format("{} weights for {} measures", p.weights.size(), p.measures.size()), {}});
  for (std::size_t i = 0; i < p.weights.size(); ++i)
    if (!(p.weights[i] > 0.0)) out.push_back({"weights", fmt::format("weight {} is not positive", i), {i}});
  if (!p.weights.empty() && std::abs(sum_of(p.weights) - 1.0) > kMassTolerance)
    out.push_back({"weights", fmt::format("weights sum {} ≠ 1", sum_of(p.weights)), {}});
  for (std::size_t i = 0; i < p.measures.size(); ++i) {
    for (auto v : validate_measure(p.measures[i])) {
      v.message = fmt::format("measure {}: {}", i, v.message);
      out.push_back(std::move(v));
    }
    if (p.measures[i].dim() != p.dim())
      out.push_back({"dimension", fmt::format("measure {} has dimension {} (expected {})", i, p.measures[i].dim(), p.dim()), {i}});
  }
  return out;
}

std::string format_violations(const std::vector<Violation>& violations) {
  std::string s;
  for (const auto& v : violations) {
    if (!s.empty()) s += "; ";
    s += v.message;
  }
  return s;
}

Problem make_problem(std::vector<DiscreteMeasure> measures, std::vector<double> weights) {
  Problem p{std::move(measures), std::move(weights), std::nullopt};
  auto violations = validate_problem(p);
  if (!violations.empty()) throw InvariantError(format_violations(violations));
  return p;
}

std::vector<double> uniform_weights(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_weights: n must be positive");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

namespace {

Problem load_json(std::istream& in, const LoadOptions& opts) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("malformed JSON: {}", e.what()));
  }
  if (!doc.is_object() || !doc.contains("measures") || !doc["measures"].is_array())
    throw ParseError("JSON problem needs a \"measures\" array");

  bool normalize = opts.normalize;
  if (doc.contains("normalize")) {
    if (!doc["normalize"].is_boolean()) throw ParseError("\"normalize\" must be a boolean");
    normalize = normalize || doc["normalize"].get<bool>();
  }

  std::vector<DiscreteMeasure> measures;
  try {
    for (const auto& jm : doc["measures"]) {
      if (!jm.is_object() || !jm.contains("points") || !jm.contains("masses"))
        throw ParseError("each measure needs \"points\" and \"masses\"");
      DiscreteMeasure m;
      m.points = jm["points"].get<std::vector<Point>>();
      m.masses = jm["masses"].get<std::vector<double>>();
      measures.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("malformed measure: {}", e.what()));
  }

  std::vector<double> weights;
  if (doc.contains("weights") && !doc["weights"].is_null()) {
    try {
      weights = doc["weights"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("malformed weights: {}", e.what()));
    }
    if (weights.size() != measures.size())
      throw WeightError(fmt::format("{} weights for {} measures", weights.size(), measures.size()));
    settle_weights(weights);
  } else {
    if (measures.empty()) throw WeightError("cannot default weights for zero measures");
    weights = uniform_weights(measures.size());
  }

  std::optional<GridSpec> grid;
  if (doc.contains("grid") && !doc["grid"].is_null()) {
    try {
      const auto& jg = doc["grid"];
      GridSpec g;
      g.side = jg.at("side").get<long>();
      g.origin = jg.at("origin").get<Point>();
      g.step = jg.at("step").get<double>();
      g.dim = g.origin.size();
      if (g.side < 1 || !(g.step > 0.0)) throw ParseError("grid needs side >= 1 and a positive step");
      grid = g;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("malformed grid: {}", e.what()));
    }
  }

  for (std::size_t i = 0; i < measures.size(); ++i) {
    auto& m = measures[i];
    if (m.points.size() != m.masses.size())
      throw InvariantError(fmt::format("measure {}: {} points but {} masses", i, m.points.size(), m.masses.size()));
    for (std::size_t k = 0; k < m.masses.size(); ++k)
      if (!(m.masses[k] > 0.0)) throw InvariantError(fmt::format("measure {}: mass {} is not positive", i, k));
    if (!measures.empty() && m.dim() != measures.front().dim())
      throw InvariantError(fmt::format("dimension mismatch: measure 0 has d={}, measure {} has d={}",
                                       measures.front().dim(), i, m.dim()));
    settle_masses(m, i, normalize);
  }
  Problem p = make_problem(std::move(measures), std::move(weights));
  if (grid) {
    if (grid->dim != p.dim()) throw InvariantError("grid dimension differs from the measures");
    for (std::size_t i = 0; i < p.n(); ++i)
      for (std::size_t k = 0; k < p.measures[i].size(); ++k)
        if (!grid->cell_of(p.measures[i].points[k]))
          throw InvariantError(fmt::format("measure {}: point {} is off the declared grid", i, k));
    p.grid = grid;
  }
  return p;
}

}  // namespace

GridMeasure load_grid_csv_measure(std::istream& in, const LoadOptions& opts) {
  std::string line;
  std::size_t line_no = 0;
  GridSpec grid;
  bool have_header = false;
  DiscreteMeasure m;
  std::vector<std::vector<long>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv(line);
    if (!have_header) {
      if (fields.size() < 4) throw ParseError(fmt::format("line {}: header must be K,d,origin...,step", line_no));
      grid.side = parse_integer(fields[0], line_no);
      long d = parse_integer(fields[1], line_no);
      if (grid.side < 1 || d < 1) throw ParseError(fmt::format("line {}: need K >= 1 and d >= 1", line_no));
      grid.dim = static_cast<std::size_t>(d);
      if (fields.size() != grid.dim + 3)
        throw ParseError(fmt::format("line {}: header has {} fields, expected {}", line_no, fields.size(), grid.dim + 3));
      for (std::size_t l = 0; l < grid.dim; ++l) grid.origin.push_back(parse_real(fields[2 + l], line_no));
      grid.step = parse_real(fields.back(), line_no);
      if (!(grid.step > 0.0)) throw ParseError(fmt::format("line {}: step must be positive", line_no));
      have_header = true;
      continue;
    }
    if (fields.size() != grid.dim + 1)
      throw ParseError(fmt::format("line {}: expected {} fields, got {}", line_no, grid.dim + 1, fields.size()));
    std::vector<long> cell(grid.dim);
    for (std::size_t l = 0; l < grid.dim; ++l) {
      cell[l] = parse_integer(fields[l], line_no);
      if (cell[l] < 1 || cell[l] > grid.side)
        throw ParseError(fmt::format("line {}: cell index {} outside 1..{}", line_no, cell[l], grid.side));
    }
    double mass = parse_real(fields.back(), line_no);
    if (mass < 0.0 || !std::isfinite(mass)) throw InvariantError(fmt::format("line {}: negative mass", line_no));
    if (mass == 0.0) continue;
    if (std::find(seen.begin(), seen.end(), cell) != seen.end())
      throw InvariantError(fmt::format("line {}: duplicate cell", line_no));
    seen.push_back(cell);
    m.points.push_back(grid.point_at(cell));
    m.masses.push_back(mass);
  }
  if (!have_header) throw ParseError("grid-csv input is empty");
  if (m.points.empty()) throw InvariantError("grid-csv measure has no nonzero cells");
  settle_masses(m, 0, opts.normalize);
  return {std::move(m), std::move(grid)};
}

Problem load_problem(std::span<std::istream* const> sources, InputFormat format, const LoadOptions& opts) {
  if (format == InputFormat::Json) {
    if (sources.size() != 1) throw ParseError("JSON input takes exactly one source");
    return load_json(*sources.front(), opts);
  }
  std::vector<DiscreteMeasure> measures;
  std::optional<GridSpec> grid;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto gm = load_grid_csv_measure(*sources[i], opts);
    if (grid && (grid->side != gm.grid.side || grid->dim != gm.grid.dim || grid->origin != gm.grid.origin ||
                 grid->step != gm.grid.step))
      throw InvariantError(fmt::format("grid-csv source {} declares a different grid", i));
    grid = gm.grid;
    measures.push_back(std::move(gm.measure));
  }
  if (measures.empty()) throw ParseError("no grid-csv sources");
  auto weights = uniform_weights(measures.size());
  Problem p = make_problem(std::move(measures), std::move(weights));
  p.grid = grid;
  return p;
}

Problem load_problem(std::istream& source, InputFormat format, const LoadOptions& opts) {
  std::istream* one[] = {&source};
  return load_problem(std::span<std::istream* const>(one), format, opts);
}

void write_problem_json(std::ostream& out, const Problem& p) {
  nlohmann::ordered_json doc;
  doc["weights"] = p.weights;
  doc["measures"] = nlohmann::ordered_json::array();
  for (const auto& m : p.measures) doc["measures"].push_back({{"points", m.points}, {"masses", m.masses}});
  if (p.grid) doc["grid"] = {{"side", p.grid->side}, {"origin", p.grid->origin}, {"step", p.grid->step}};
  out << doc.dump(2) << '\n';
}

}  // namespace wbary
