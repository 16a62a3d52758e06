#include "wbary/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace wbary {

namespace {

double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    double t = a[l] - b[l];
    s += t * t;
  }
  return s;
}

std::uint32_t narrow(std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw CombinationBlowup("index exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

// Marginal rows (i, k) come first, in pair order.
void add_marginal_rows(LpModel& m, const Problem& p) {
  for (std::size_t i = 0; i < p.n(); ++i)
    for (std::size_t k = 0; k < p.measures[i].size(); ++k) {
      m.rows.push_back({RowKind::Marginal, narrow(i), narrow(k)});
      m.rhs.push_back(p.measures[i].masses[k]);
    }
}

void add_balance_rows(LpModel& m, std::size_t n, std::span<const std::uint32_t> js) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::uint32_t j : js) {
      m.rows.push_back({RowKind::Balance, narrow(i), j});
      m.rhs.push_back(0.0);
    }
}

// Appends z_j for every j in `js` together with the y-block over the pairs
// selected by `pairs_of(j)`. Balance row (i, position of j) sits at
// `balance_base + i * js.size() + position`.
template <typename PairsOf>
void add_zy_block(LpModel& m, const SupportAtlas& atlas, const Problem& p, std::span<const std::uint32_t> js,
                  std::size_t balance_base, PairsOf&& pairs_of) {
  const std::size_t n = p.n(), J = js.size();
  for (std::size_t pos = 0; pos < J; ++pos) {
    for (std::size_t i = 0; i < n; ++i) m.matrix.push(narrow(balance_base + i * J + pos), -1.0);
    m.matrix.close_column();
    m.cost.push_back(0.0);
    m.vars.push_back({VarKind::Z, 0, 0, js[pos]});
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t pos = 0; pos < J; ++pos) {
      const std::uint32_t j = js[pos];
      const Point& xj = atlas.support_points[j];
      pairs_of(i, j, [&](std::size_t k) {
        m.matrix.push(narrow(atlas.pair_index(i, k)), 1.0);
        m.matrix.push(narrow(balance_base + i * J + pos), 1.0);
        m.matrix.close_column();
        m.cost.push_back(p.weights[i] * squared_distance(xj, p.measures[i].points[k]));
        m.vars.push_back({VarKind::Y, narrow(i), narrow(k), j});
      });
    }
}

// Calls f(k) for every k with (i, k) in s_j, ascending.
auto reduced_pairs(const SupportAtlas& atlas) {
  return [&atlas](std::size_t i, std::uint32_t j, auto&& f) {
    const auto& sj = atlas.s_j[j];
    const std::size_t lo = atlas.pair_offset[i], hi = atlas.pair_offset[i + 1];
    auto it = std::lower_bound(sj.begin(), sj.end(), static_cast<std::uint32_t>(lo));
    for (; it != sj.end() && *it < hi; ++it) f(*it - lo);
  };
}

void add_w_column(LpModel& m, const Combination& c, const Problem& p, const std::vector<std::size_t>& offset) {
  for (std::size_t i = 0; i < c.indices.size(); ++i) m.matrix.push(narrow(offset[i] + c.indices[i]), 1.0);
  m.matrix.close_column();
  m.cost.push_back(cost_fixed(c, p));
  m.vars.push_back({VarKind::W, 0, 0, narrow(c.ordinal)});
}

std::vector<std::size_t> offsets_of(const Problem& p) {
  std::vector<std::size_t> off(p.n() + 1, 0);
  for (std::size_t i = 0; i < p.n(); ++i) off[i + 1] = off[i] + p.measures[i].size();
  return off;
}

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("size exceeds 64 bits");
  return r;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("size exceeds 64 bits");
  return r;
}

std::uint64_t power(std::uint64_t b, std::uint64_t e) {
  std::uint64_t r = 1;
  for (std::uint64_t t = 0; t < e; ++t) r = mul(r, b);
  return r;
}

}  // namespace

std::string_view to_string(Formulation f) {
  switch (f) {
    case Formulation::Original: return "original";
    case Formulation::Reduced: return "reduced";
    case Formulation::General: return "general";
    case Formulation::Hybrid: return "hybrid";
    case Formulation::Transportation: return "transportation";
  }
  return "?";
}

Formulation parse_formulation(std::string_view name) {
  for (Formulation f : {Formulation::Original, Formulation::Reduced, Formulation::General, Formulation::Hybrid,
                        Formulation::Transportation})
    if (to_string(f) == name) return f;
  throw std::invalid_argument(fmt::format("unknown formulation '{}'", name));
}

void SparseColumns::reserve(std::size_t cols, std::size_t nnz) {
  start.reserve(cols + 1);
  row.reserve(nnz);
  value.reserve(nnz);
}

std::vector<std::string> check_model(const LpModel& m) {
  std::vector<std::string> issues;
  const std::size_t N = m.num_vars();
  if (m.matrix.cols() != N || m.vars.size() != N) issues.push_back("column count mismatch");
  if (m.rhs.size() != m.num_rows || m.rows.size() != m.num_rows) issues.push_back("row count mismatch");
  std::vector<char> used(m.num_rows, 0);
  for (std::size_t c = 0; c < m.matrix.cols() && c < N; ++c) {
    if (!(m.cost[c] >= 0.0) || !std::isfinite(m.cost[c])) issues.push_back(fmt::format("bad cost at column {}", c));
    for (std::uint64_t e = m.matrix.start[c]; e < m.matrix.start[c + 1]; ++e) {
      if (m.matrix.row[e] >= m.num_rows) {
        issues.push_back(fmt::format("row index out of range in column {}", c));
        continue;
      }
      if (e > m.matrix.start[c] && m.matrix.row[e] <= m.matrix.row[e - 1])
        issues.push_back(fmt::format("unsorted rows in column {}", c));
      used[m.matrix.row[e]] = 1;
    }
  }
  for (std::size_t r = 0; r < m.num_rows && r < m.rows.size(); ++r) {
    if (!used[r]) issues.push_back(fmt::format("empty row {}", r));
    if (!std::isfinite(m.rhs[r])) issues.push_back(fmt::format("non-finite rhs in row {}", r));
    if (m.rows[r].kind == RowKind::Marginal && !(m.rhs[r] > 0.0 && m.rhs[r] <= 1.0))
      issues.push_back(fmt::format("marginal rhs outside (0,1] in row {}", r));
  }
  return issues;
}

double cost_fixed(const Combination& c, const Problem& p) {
  Point mean = weighted_mean(c, p);
  double s = 0.0;
  for (std::size_t i = 0; i < p.n(); ++i)
    s += p.weights[i] * squared_distance(mean, p.measures[i].points[c.indices[i]]);
  return s;
}

LpModel build_original(const SupportAtlas& atlas, const Problem& p) {
  LpModel m;
  m.formulation = Formulation::Original;
  const std::size_t S = atlas.size();
  std::vector<std::uint32_t> all(S);
  for (std::size_t j = 0; j < S; ++j) all[j] = narrow(j);
  add_marginal_rows(m, p);
  const std::size_t base = m.rows.size();
  add_balance_rows(m, p.n(), all);
  m.num_rows = m.rows.size();
  std::size_t cols = mul(S, add(1, p.total_support()));
  m.matrix.reserve(cols, 2 * cols);
  add_zy_block(m, atlas, p, all, base, [&](std::size_t i, std::uint32_t, auto&& f) {
    for (std::size_t k = 0; k < p.measures[i].size(); ++k) f(k);
  });
  return m;
}

LpModel build_reduced(const SupportAtlas& atlas, const Problem& p) {
  LpModel m;
  m.formulation = Formulation::Reduced;
  const std::size_t S = atlas.size();
  std::vector<std::uint32_t> all(S);
  for (std::size_t j = 0; j < S; ++j) all[j] = narrow(j);
  add_marginal_rows(m, p);
  const std::size_t base = m.rows.size();
  add_balance_rows(m, p.n(), all);
  m.num_rows = m.rows.size();
  std::size_t ys = 0;
  for (const auto& sj : atlas.s_j) ys += sj.size();
  m.matrix.reserve(S + ys, S * p.n() + 2 * ys);
  add_zy_block(m, atlas, p, all, base, reduced_pairs(atlas));
  return m;
}

LpModel build_general(const Problem& p, std::uint64_t cap) {
  LpModel m;
  m.formulation = Formulation::General;
  add_marginal_rows(m, p);
  m.num_rows = m.rows.size();
  CombinationStream stream(p, cap);
  const auto offset = offsets_of(p);
  m.matrix.reserve(stream.total(), stream.total() * p.n());
  m.cost.reserve(stream.total());
  m.vars.reserve(stream.total());
  while (stream.next()) add_w_column(m, stream.current(), p, offset);
  return m;
}

LpModel build_transportation(const Problem& p) {
  if (p.n() != 2) throw UnsupportedError(fmt::format("transportation formulation requires n=2 (got n={})", p.n()));
  LpModel m;
  m.formulation = Formulation::Transportation;
  add_marginal_rows(m, p);
  m.num_rows = m.rows.size();
  const auto& P1 = p.measures[0];
  const auto& P2 = p.measures[1];
  const double lambda = p.weights[0];
  const double factor = lambda * (1.0 - lambda);
  m.matrix.reserve(P1.size() * P2.size(), 2 * P1.size() * P2.size());
  for (std::size_t k = 0; k < P1.size(); ++k)
    for (std::size_t l = 0; l < P2.size(); ++l) {
      m.matrix.push(narrow(k), 1.0);
      m.matrix.push(narrow(P1.size() + l), 1.0);
      m.matrix.close_column();
      m.cost.push_back(factor * squared_distance(P1.points[k], P2.points[l]));
      m.vars.push_back({VarKind::W, 0, 0, narrow(k * P2.size() + l)});
    }
  return m;
}

LpModel build_hybrid(const SupportAtlas& atlas, const HybridSplit& split, const Problem& p) {
  const std::size_t S = atlas.size();
  const std::uint64_t total = combination_total(p, std::numeric_limits<std::uint64_t>::max());
  if (split.threshold.size() != S) throw std::invalid_argument("inconsistent split: threshold size differs from |S|");
  std::vector<char> y_side(S, 0);
  for (std::size_t t = 0; t < split.y_side.size(); ++t) {
    std::uint32_t j = split.y_side[t];
    if (j >= S || (t > 0 && j <= split.y_side[t - 1]))
      throw std::invalid_argument("inconsistent split: y_side must be ascending indices into S");
    y_side[j] = 1;
  }
  for (std::size_t t = 0; t < split.w_side.size(); ++t) {
    std::uint64_t h = split.w_side[t];
    if (h >= total || (t > 0 && h <= split.w_side[t - 1]))
      throw std::invalid_argument("inconsistent split: w_side must be ascending ordinals into S*");
    auto j = atlas.locate(combination_at(p, h), p);
    if (!j) throw std::invalid_argument(fmt::format("inconsistent split: combination {} has no support point", h + 1));
    if (y_side[*j]) throw std::invalid_argument(fmt::format("inconsistent split: combination {} is on both sides", h + 1));
  }
  if (atlas.regime == Regime::Exact) {
    std::uint64_t covered = split.w_side.size();
    for (std::uint32_t j : split.y_side) covered += atlas.multiplicity[j];
    if (covered != total) throw std::invalid_argument("inconsistent split: combinations not covered exactly once");
  }

  LpModel m;
  m.formulation = Formulation::Hybrid;
  add_marginal_rows(m, p);
  const std::size_t base = m.rows.size();
  add_balance_rows(m, p.n(), split.y_side);
  m.num_rows = m.rows.size();
  add_zy_block(m, atlas, p, split.y_side, base, reduced_pairs(atlas));
  const auto offset = offsets_of(p);
  for (std::uint64_t h : split.w_side) add_w_column(m, combination_at(p, h), p, offset);
  return m;
}

LpModel build_model(Formulation f, const Problem& p, const SupportAtlas* atlas, std::uint64_t cap) {
  auto need_atlas = [&]() -> const SupportAtlas& {
    if (!atlas) throw std::invalid_argument(fmt::format("{} formulation needs a support atlas", to_string(f)));
    return *atlas;
  };
  switch (f) {
    case Formulation::Original: return build_original(need_atlas(), p);
    case Formulation::Reduced: return build_reduced(need_atlas(), p);
    case Formulation::General: return build_general(p, cap);
    case Formulation::Transportation: return build_transportation(p);
    case Formulation::Hybrid: {
      const auto& a = need_atlas();
      return build_hybrid(a, hybrid_split(a, p), p);
    }
  }
  throw std::invalid_argument("unknown formulation");
}

SizePrediction predict_sizes(SizeRegime regime, Formulation f, std::uint64_t n, std::uint64_t p_or_K,
                             std::uint64_t d) {
  SizePrediction s;
  s.regime = regime;
  s.formulation = f;
  if (n == 0 || p_or_K == 0) throw std::invalid_argument("n and p (or K) must be positive");
  if (regime == SizeRegime::GeneralPosition) {
    const std::uint64_t p = p_or_K;
    const std::uint64_t pn = power(p, n);
    const std::uint64_t np = mul(n, p);
    switch (f) {
      case Formulation::Original:
        s.variables = add(mul(n, mul(pn, p)), pn);
        s.constraints = add(mul(n, pn), np);
        return s;
      case Formulation::Reduced:
        s.variables = mul(add(1, n), pn);
        s.constraints = add(mul(n, pn), np);
        return s;
      case Formulation::General:
      case Formulation::Hybrid:
        s.variables = pn;
        s.constraints = np;
        return s;
      case Formulation::Transportation:
        if (n != 2) throw UnsupportedError("transportation formulation requires n=2");
        s.variables = pn;
        s.constraints = np;
        return s;
    }
  }
  if (d == 0) throw std::invalid_argument("d must be positive");
  const std::uint64_t K = p_or_K;
  const std::uint64_t cells = power(K, d);
  switch (f) {
    case Formulation::Original: {
      const std::uint64_t fine = power(add(mul(n, K) - n, 1), d);
      s.variables = mul(fine, add(1, mul(n, cells)));
      s.constraints = add(mul(n, cells), mul(n, fine));
      return s;
    }
    case Formulation::General:
      s.variables = power(cells, n);
      s.constraints = mul(n, cells);
      return s;
    default:
      throw UnsupportedError(
          fmt::format("no closed form for the {} formulation on full grids; build the model to count it", to_string(f)));
  }
}

double variable_reduction(const SizePrediction& from, const SizePrediction& to) {
  return 1.0 - static_cast<double>(to.variables) / static_cast<double>(from.variables);
}

}  // namespace wbary
