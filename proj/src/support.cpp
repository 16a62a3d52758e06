#include "wbary/support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace wbary {

namespace {

constexpr std::uint64_t kOrdinalLimit = std::numeric_limits<std::uint32_t>::max();

// Smallest D <= max_den with D * x within tol of an integer, or 0.
std::uint64_t denominator_of(double x, std::uint64_t max_den, double tol) {
  // Continued-fraction convergents.
  double v = x;
  std::uint64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  for (int it = 0; it < 64; ++it) {
    double a = std::floor(v);
    std::uint64_t ai = static_cast<std::uint64_t>(a);
    std::uint64_t p2 = ai * p1 + p0;
    std::uint64_t q2 = ai * q1 + q0;
    if (q2 > max_den) return 0;
    if (std::abs(static_cast<double>(p2) / static_cast<double>(q2) - x) <= tol) return q2;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    double frac = v - a;
    if (frac < 1e-15) return 0;
    v = 1.0 / frac;
  }
  return 0;
}

double common_scale(const Problem& p) {
  if (p.has_uniform_weights()) return static_cast<double>(p.n());
  std::uint64_t lcm = 1;
  for (double w : p.weights) {
    std::uint64_t d = denominator_of(w, 1'000'000, 1e-13);
    if (d == 0) return 1.0;
    lcm = std::lcm(lcm, d);
    if (lcm > 1'000'000'000ull) return 1.0;
  }
  return static_cast<double>(lcm);
}

std::uint64_t saturating(const BigCount& v) {
  if (v > BigCount(std::numeric_limits<std::uint64_t>::max())) return std::numeric_limits<std::uint64_t>::max();
  return v.convert_to<std::uint64_t>();
}

BigCount binomial(long a, long b) {
  if (a < 0 || b < 0 || a < b) return 0;
  b = std::min(b, a - b);
  BigCount r = 1;
  for (long t = 1; t <= b; ++t) {
    r *= (a - b + t);
    r /= t;
  }
  return r;
}

// Dense bit rows: one row of `words` 64-bit words per support point.
struct BitRows {
  std::size_t words = 0;
  std::vector<std::uint64_t> bits;

  void add_row() { bits.resize(bits.size() + words, 0); }
  void set(std::size_t row, std::size_t col) { bits[row * words + col / 64] |= (1ull << (col % 64)); }
  template <typename F>
  void for_each(std::size_t row, F&& f) const {
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t v = bits[row * words + w];
      while (v) {
        int b = __builtin_ctzll(v);
        f(w * 64 + static_cast<std::size_t>(b));
        v &= v - 1;
      }
    }
  }
};

void transpose_incidence(SupportAtlas& a) {
  a.s_ik.assign(a.num_pairs(), {});
  for (std::uint32_t j = 0; j < a.s_j.size(); ++j)
    for (std::uint32_t q : a.s_j[j]) a.s_ik[q].push_back(j);
}

std::vector<std::size_t> pair_offsets(const Problem& p) {
  std::vector<std::size_t> off(p.n() + 1, 0);
  for (std::size_t i = 0; i < p.n(); ++i) off[i + 1] = off[i] + p.measures[i].size();
  return off;
}

}  // namespace

std::uint64_t combination_total(const Problem& p, std::uint64_t cap) {
  cap = std::min(cap, kOrdinalLimit);
  std::uint64_t total = 1;
  for (const auto& m : p.measures) {
    std::uint64_t s = m.size();
    if (s != 0 && total > cap / s)
      throw CombinationBlowup(fmt::format("combination blowup: |S*| exceeds the cap of {}", cap));
    total *= s;
  }
  if (total > cap) throw CombinationBlowup(fmt::format("combination blowup: |S*| = {} exceeds the cap of {}", total, cap));
  return total;
}

CombinationStream::CombinationStream(const Problem& p, std::uint64_t cap) {
  total_ = combination_total(p, cap);
  for (const auto& m : p.measures) sizes_.push_back(static_cast<std::uint32_t>(m.size()));
  current_.indices.assign(sizes_.size(), 0);
}

bool CombinationStream::next() {
  if (!started_) {
    started_ = true;
    changed_from_ = 0;
    return total_ > 0;
  }
  for (std::size_t i = sizes_.size(); i-- > 0;) {
    if (++current_.indices[i] < sizes_[i]) {
      ++current_.ordinal;
      changed_from_ = i;
      return true;
    }
    current_.indices[i] = 0;
  }
  return false;
}

std::vector<std::uint64_t> combination_strides(const Problem& p) {
  std::vector<std::uint64_t> stride(p.n(), 1);
  for (std::size_t i = p.n(); i-- > 1;) stride[i - 1] = stride[i] * p.measures[i].size();
  return stride;
}

Combination combination_at(const Problem& p, std::uint64_t ordinal) {
  Combination c;
  c.ordinal = ordinal;
  c.indices.resize(p.n());
  for (std::size_t i = p.n(); i-- > 0;) {
    std::uint64_t s = p.measures[i].size();
    c.indices[i] = static_cast<std::uint32_t>(ordinal % s);
    ordinal /= s;
  }
  return c;
}

Point weighted_mean(const Combination& c, const Problem& p) {
  Point x(p.dim(), 0.0);
  for (std::size_t i = 0; i < p.n(); ++i) {
    const Point& xi = p.measures[i].points[c.indices[i]];
    for (std::size_t l = 0; l < x.size(); ++l) x[l] += p.weights[i] * xi[l];
  }
  return x;
}

MeanQuantizer::MeanQuantizer(const Problem& p, double tol) : dim_(p.dim()) {
  scale_ = common_scale(p);
  quantum_.assign(dim_, 1.0);
  for (std::size_t l = 0; l < dim_; ++l) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& m : p.measures)
      for (const auto& x : m.points) {
        lo = std::min(lo, x[l]);
        hi = std::max(hi, x[l]);
      }
    double span = hi - lo;
    if (!(span > 0.0)) span = 1.0;
    // Power-of-two quantum: lattice data stays exactly representable after scaling.
    quantum_[l] = std::exp2(std::floor(std::log2(tol * span)));
  }
  const bool integral = scale_ != 1.0 || p.has_uniform_weights();
  offset_ = pair_offsets(p);
  contrib_.resize(offset_.back());
  for (std::size_t i = 0; i < p.n(); ++i) {
    double w = scale_ * p.weights[i];
    if (integral) w = std::round(w);
    for (std::size_t k = 0; k < p.measures[i].size(); ++k) {
      auto& c = contrib_[offset_[i] + k];
      c.resize(dim_);
      for (std::size_t l = 0; l < dim_; ++l) c[l] = w * p.measures[i].points[k][l] / quantum_[l];
    }
  }
}

void MeanQuantizer::key_of(const Combination& c, std::span<std::int64_t> out) const {
  for (std::size_t l = 0; l < dim_; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.indices.size(); ++i) s += contrib_[offset_[i] + c.indices[i]][l];
    out[l] = std::llround(s);
  }
}

void MeanQuantizer::key_of_point(const Point& x, std::span<std::int64_t> out) const {
  for (std::size_t l = 0; l < dim_; ++l) out[l] = std::llround(scale_ * x[l] / quantum_[l]);
}

std::pair<std::size_t, std::size_t> SupportAtlas::pair_of(std::size_t q) const {
  auto it = std::upper_bound(pair_offset.begin(), pair_offset.end(), q);
  std::size_t i = static_cast<std::size_t>(it - pair_offset.begin()) - 1;
  return {i, q - pair_offset[i]};
}

std::optional<std::uint32_t> SupportAtlas::locate(const Combination& c, const Problem& p) const {
  std::vector<std::int64_t> key(dim);
  if (regime == Regime::Grid) {
    for (std::size_t l = 0; l < dim; ++l) {
      key[l] = 0;
      for (std::size_t i = 0; i < p.n(); ++i) key[l] += pair_cells[pair_index(i, c.indices[i]) * dim + l];
    }
    // Fine-grid points are laid out lexicographically in the lattice sums.
    const std::int64_t side = grid->side;
    std::int64_t j = 0;
    for (std::size_t l = 0; l < dim; ++l) {
      std::int64_t off = key[l] - static_cast<std::int64_t>(n);
      if (off < 0 || off >= side) return std::nullopt;
      j = j * side + off;
    }
    return static_cast<std::uint32_t>(j);
  }
  quantizer.key_of(c, key);
  std::int64_t j = index.find(key, keys);
  if (j < 0) return std::nullopt;
  return static_cast<std::uint32_t>(j);
}

SupportAtlas build_atlas_exact(const Problem& p, double dedup_tol, std::uint64_t cap) {
  SupportAtlas a;
  a.regime = Regime::Exact;
  a.n = p.n();
  a.dim = p.dim();
  a.pair_offset = pair_offsets(p);
  a.quantizer = MeanQuantizer(p, dedup_tol);
  a.index = KeyIndex(a.dim);

  CombinationStream stream(p, cap);
  a.combinations = stream.total();

  const std::size_t n = a.n, d = a.dim;
  BitRows pairs{(a.num_pairs() + 63) / 64, {}};
  std::vector<std::int64_t> keys;
  std::vector<Point> points;
  std::vector<std::uint64_t> mult;
  // partial[i * d + l]: scaled sum over measures < i
  std::vector<double> partial((n + 1) * d, 0.0);
  std::vector<std::int64_t> key(d);

  while (stream.next()) {
    const Combination& c = stream.current();
    for (std::size_t i = stream.changed_from(); i < n; ++i)
      for (std::size_t l = 0; l < d; ++l)
        partial[(i + 1) * d + l] = partial[i * d + l] + a.quantizer.contribution(i, c.indices[i], l);
    for (std::size_t l = 0; l < d; ++l) key[l] = std::llround(partial[n * d + l]);

    std::int64_t j = a.index.find(key, keys);
    if (j < 0) {
      j = static_cast<std::int64_t>(points.size());
      keys.insert(keys.end(), key.begin(), key.end());
      a.index.insert(static_cast<std::uint32_t>(j), keys);
      points.push_back(weighted_mean(c, p));
      mult.push_back(0);
      pairs.add_row();
    }
    ++mult[j];
    for (std::size_t i = 0; i < n; ++i) pairs.set(static_cast<std::size_t>(j), a.pair_offset[i] + c.indices[i]);
  }

  // Canonical order: lexicographic in the keys.
  std::vector<std::uint32_t> order(points.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
    return std::lexicographical_compare(keys.begin() + x * d, keys.begin() + (x + 1) * d, keys.begin() + y * d,
                                        keys.begin() + (y + 1) * d);
  });
  a.support_points.reserve(order.size());
  a.keys.reserve(keys.size());
  a.s_j.resize(order.size());
  a.multiplicity.reserve(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    std::uint32_t old = order[j];
    a.support_points.push_back(std::move(points[old]));
    a.keys.insert(a.keys.end(), keys.begin() + old * d, keys.begin() + (old + 1) * d);
    a.multiplicity.push_back(mult[old]);
    pairs.for_each(old, [&](std::size_t q) { a.s_j[j].push_back(static_cast<std::uint32_t>(q)); });
  }
  a.index.rebuild(a.support_points.size(), a.keys);
  transpose_incidence(a);
  return a;
}

SupportAtlas build_atlas_grid(const Problem& p, const GridSpec& g) {
  if (!p.has_uniform_weights()) throw InvariantError("grid regime requires uniform weights");
  if (p.dim() != g.dim) throw InvariantError("grid dimension does not match the problem");
  const std::size_t n = p.n(), d = g.dim;
  const long K = g.side;

  SupportAtlas a;
  a.regime = Regime::Grid;
  a.n = n;
  a.dim = d;
  a.pair_offset = pair_offsets(p);
  a.coarse_grid = g;
  a.pair_cells.resize(a.num_pairs() * d);

  // cell -> k lookup per measure, cells linearized lexicographically
  const std::size_t cells = g.num_cells();
  std::vector<std::vector<std::int32_t>> at(n, std::vector<std::int32_t>(cells, -1));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < p.measures[i].size(); ++k) {
      auto cell = g.cell_of(p.measures[i].points[k]);
      if (!cell) throw InvariantError(fmt::format("off-lattice point: measure {}, point {}", i, k));
      std::size_t lin = 0;
      for (std::size_t l = 0; l < d; ++l) {
        lin = lin * static_cast<std::size_t>(K) + static_cast<std::size_t>((*cell)[l] - 1);
        a.pair_cells[a.pair_index(i, k) * d + l] = (*cell)[l];
      }
      at[i][lin] = static_cast<std::int32_t>(k);
    }

  const long nn = static_cast<long>(n);
  const long side = nn * K - nn + 1;
  std::uint64_t count = 1;
  for (std::size_t l = 0; l < d; ++l) {
    count *= static_cast<std::uint64_t>(side);
    if (count > kOrdinalLimit) throw CombinationBlowup("combination blowup: fine grid too large");
  }
  a.grid = GridSpec{d, side, g.origin, g.step / static_cast<double>(n)};

  std::vector<BigCount> dice(static_cast<std::size_t>(nn * K + 1));
  for (long s = nn; s <= nn * K; ++s) dice[static_cast<std::size_t>(s)] = count_dice(s, K, nn);

  a.support_points.resize(count);
  a.keys.resize(count * d);
  a.s_j.resize(count);
  a.multiplicity.resize(count);

  std::vector<long> sums(d, nn), lo(d), hi(d), box(d);
  for (std::uint64_t j = 0; j < count; ++j) {
    Point x(d);
    BigCount nj = 1;
    for (std::size_t l = 0; l < d; ++l) {
      x[l] = g.origin[l] + g.step * (static_cast<double>(sums[l]) / static_cast<double>(n) - 1.0);
      a.keys[j * d + l] = sums[l];
      nj *= dice[static_cast<std::size_t>(sums[l])];
      // feasible own coordinate: the other n-1 measures must cover the rest
      lo[l] = std::max(1L, sums[l] - (nn - 1) * K);
      hi[l] = std::min(K, sums[l] - (nn - 1));
    }
    a.support_points[j] = std::move(x);
    a.multiplicity[j] = saturating(nj);

    auto& sj = a.s_j[j];
    bool empty_box = false;
    for (std::size_t l = 0; l < d; ++l) empty_box = empty_box || lo[l] > hi[l];
    if (!empty_box) {
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t first = sj.size();
        box = lo;
        for (;;) {
          std::size_t lin = 0;
          for (std::size_t l = 0; l < d; ++l) lin = lin * static_cast<std::size_t>(K) + static_cast<std::size_t>(box[l] - 1);
          if (at[i][lin] >= 0) sj.push_back(static_cast<std::uint32_t>(a.pair_index(i, static_cast<std::size_t>(at[i][lin]))));
          std::size_t l = d;
          while (l-- > 0) {
            if (++box[l] <= hi[l]) break;
            box[l] = lo[l];
          }
          if (l == static_cast<std::size_t>(-1)) break;
        }
        std::sort(sj.begin() + static_cast<std::ptrdiff_t>(first), sj.end());
      }
    }

    for (std::size_t l = d; l-- > 0;) {
      if (++sums[l] <= nn * K) break;
      sums[l] = nn;
    }
  }
  a.combinations = 1;
  for (const auto& m : p.measures) a.combinations *= m.size();
  transpose_incidence(a);
  return a;
}

BigCount count_dice(long s, long K, long n) {
  if (K < 1 || n < 1 || s < n || s > n * K) return 0;
  BigCount total = 0;
  for (long m = 0; m <= n; ++m) {
    BigCount term = binomial(n, m) * binomial(s - m * K - 1, n - 1);
    if (m % 2 == 0)
      total += term;
    else
      total -= term;
  }
  return total;
}

BigCount combination_count(std::span<const std::int64_t> lattice_sums, long K, long n) {
  BigCount r = 1;
  for (std::int64_t s : lattice_sums) r *= count_dice(static_cast<long>(s), K, n);
  return r;
}

namespace {

std::uint64_t point_budget(const SupportAtlas& a, std::size_t j) {
  if (a.regime == Regime::Grid) {
    std::uint64_t cells = 1;
    for (std::size_t l = 0; l < a.dim; ++l) cells *= static_cast<std::uint64_t>(a.coarse_grid->side);
    return a.n * cells + 1;
  }
  return a.s_j[j].size() + 1;
}

// Combinations of actual support points whose lattice sums equal those of j.
void grid_combinations_of(const SupportAtlas& a, const std::vector<std::uint64_t>& stride, std::uint32_t j,
                          std::vector<std::uint64_t>& out) {
  const std::size_t n = a.n, d = a.dim;
  const long K = a.coarse_grid->side;
  std::vector<std::vector<std::uint32_t>> by_measure(n);
  for (std::uint32_t q : a.s_j[j]) by_measure[a.pair_of(q).first].push_back(q);
  std::vector<long> remaining(a.keys.begin() + j * d, a.keys.begin() + (j + 1) * d);

  auto recurse = [&](auto&& self, std::size_t i, std::uint64_t ordinal) -> void {
    if (i == n) {
      out.push_back(ordinal);
      return;
    }
    const long left = static_cast<long>(n - i - 1);
    for (std::uint32_t q : by_measure[i]) {
      bool ok = true;
      for (std::size_t l = 0; l < d && ok; ++l) {
        long r = remaining[l] - a.pair_cells[q * d + l];
        ok = r >= left && r <= left * K;
      }
      if (!ok) continue;
      for (std::size_t l = 0; l < d; ++l) remaining[l] -= a.pair_cells[q * d + l];
      self(self, i + 1, ordinal + (q - a.pair_offset[i]) * stride[i]);
      for (std::size_t l = 0; l < d; ++l) remaining[l] += a.pair_cells[q * d + l];
    }
  };
  recurse(recurse, 0, 0);
}

}  // namespace

HybridSplit hybrid_split(const SupportAtlas& atlas, const Problem& p) {
  HybridSplit split;
  const std::size_t S = atlas.size();
  split.threshold.resize(S);
  std::vector<char> y(S, 0);
  for (std::size_t j = 0; j < S; ++j) {
    split.threshold[j] = point_budget(atlas, j);
    if (atlas.multiplicity[j] > split.threshold[j]) {
      y[j] = 1;
      split.y_side.push_back(static_cast<std::uint32_t>(j));
    }
  }

  if (atlas.regime == Regime::Grid) {
    auto stride = combination_strides(p);
    for (std::uint32_t j = 0; j < S; ++j)
      if (!y[j]) grid_combinations_of(atlas, stride, j, split.w_side);
    std::sort(split.w_side.begin(), split.w_side.end());
    return split;
  }

  CombinationStream stream(p, std::numeric_limits<std::uint64_t>::max());
  const std::size_t n = p.n(), d = p.dim();
  std::vector<double> partial((n + 1) * d, 0.0);
  std::vector<std::int64_t> key(d);
  while (stream.next()) {
    const Combination& c = stream.current();
    for (std::size_t i = stream.changed_from(); i < n; ++i)
      for (std::size_t l = 0; l < d; ++l)
        partial[(i + 1) * d + l] = partial[i * d + l] + atlas.quantizer.contribution(i, c.indices[i], l);
    for (std::size_t l = 0; l < d; ++l) key[l] = std::llround(partial[n * d + l]);
    std::int64_t j = atlas.index.find(key, atlas.keys);
    if (j < 0) throw std::logic_error("combination mean missing from the atlas");
    if (!y[static_cast<std::size_t>(j)]) split.w_side.push_back(c.ordinal);
  }
  return split;
}

HybridSplit all_w_split(const SupportAtlas& atlas, const Problem& p) {
  HybridSplit split;
  std::uint64_t total = combination_total(p, std::numeric_limits<std::uint64_t>::max());
  split.w_side.resize(total);
  std::iota(split.w_side.begin(), split.w_side.end(), std::uint64_t{0});
  split.threshold.assign(atlas.size(), 0);
  return split;
}

HybridSplit all_y_split(const SupportAtlas& atlas) {
  HybridSplit split;
  split.y_side.resize(atlas.size());
  std::iota(split.y_side.begin(), split.y_side.end(), 0u);
  split.threshold.assign(atlas.size(), 0);
  return split;
}

std::optional<GridSpec> detect_grid(const Problem& p, double tol) {
  const std::size_t d = p.dim();
  if (d == 0) return std::nullopt;
  Point lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& m : p.measures)
    for (const auto& x : m.points)
      for (std::size_t l = 0; l < d; ++l) {
        lo[l] = std::min(lo[l], x[l]);
        hi[l] = std::max(hi[l], x[l]);
      }
  double span = 0.0;
  for (std::size_t l = 0; l < d; ++l) span = std::max(span, hi[l] - lo[l]);
  if (!(span > 0.0)) return GridSpec{d, 1, lo, 1.0};
  const double eps = tol * span;

  auto real_gcd = [&](double a, double b) {
    if (a < b) std::swap(a, b);
    while (b > eps) {
      double r = std::fmod(a, b);
      if (b - r <= eps) r = 0.0;
      a = b;
      b = r;
    }
    return a;
  };
  double step = 0.0;
  for (const auto& m : p.measures)
    for (const auto& x : m.points)
      for (std::size_t l = 0; l < d; ++l) {
        double v = x[l] - lo[l];
        if (v > eps) step = step == 0.0 ? v : real_gcd(step, v);
      }
  if (!(step > eps)) return std::nullopt;

  long side = 1;
  for (std::size_t l = 0; l < d; ++l) {
    double cells = (hi[l] - lo[l]) / step;
    if (cells > 1e6) return std::nullopt;
    side = std::max(side, static_cast<long>(std::llround(cells)) + 1);
  }
  GridSpec g{d, side, lo, step};
  for (const auto& m : p.measures)
    for (const auto& x : m.points)
      if (!g.cell_of(x, 1e-6)) return std::nullopt;
  return g;
}

}  // namespace wbary
