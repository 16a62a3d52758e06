#include "wbary/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include <fmt/format.h>

namespace wbary::oracle {

namespace {

using Dense = std::vector<std::vector<double>>;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t t = 0; t < len; ++t) {
    h ^= p[t];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t hash_model(const LpModel& m) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = fnv1a(h, m.cost.data(), m.cost.size() * sizeof(double));
  h = fnv1a(h, m.rhs.data(), m.rhs.size() * sizeof(double));
  h = fnv1a(h, m.matrix.row.data(), m.matrix.row.size() * sizeof(std::uint32_t));
  h = fnv1a(h, m.matrix.value.data(), m.matrix.value.size() * sizeof(double));
  return h;
}

// Solves the square system in place by Gaussian elimination with partial
// pivoting. Returns false when a pivot falls below 1e-10.
bool gauss_solve(Dense a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-10) return false;
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  return true;
}

}  // namespace

OracleResult basis_enumeration_solve(const LpModel& m, const Caps& caps) {
  const std::size_t M = m.num_rows, N = m.num_vars();
  if (N > caps.max_vars || M > caps.max_constraints)
    throw CapExceeded(fmt::format("basis enumeration capped at {} variables and {} constraints (model has {} and {})",
                                  caps.max_vars, caps.max_constraints, N, M));
  OracleResult res;
  res.instance_hash = hash_model(m);

  Dense A(M, std::vector<double>(N, 0.0));
  for (std::size_t c = 0; c < N; ++c)
    for (std::uint64_t e = m.matrix.start[c]; e < m.matrix.start[c + 1]; ++e) A[m.matrix.row[e]][c] = m.matrix.value[e];

  // Independent rows via incremental elimination of the augmented rows.
  std::vector<std::size_t> rows;
  Dense echelon;
  std::vector<std::size_t> lead;
  for (std::size_t r = 0; r < M; ++r) {
    std::vector<double> v = A[r];
    v.push_back(m.rhs[r]);
    for (std::size_t t = 0; t < echelon.size(); ++t) {
      double f = v[lead[t]] / echelon[t][lead[t]];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= N; ++c) v[c] -= f * echelon[t][c];
    }
    std::size_t best = N;
    for (std::size_t c = 0; c < N; ++c)
      if (std::abs(v[c]) > 1e-10 && (best == N || std::abs(v[c]) > std::abs(v[best]))) best = c;
    if (best == N) {
      if (std::abs(v[N]) > 1e-10) return res;  // inconsistent equations
      continue;
    }
    rows.push_back(r);
    echelon.push_back(std::move(v));
    lead.push_back(best);
  }

  const std::size_t rank = rows.size();
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> subset(rank);
  std::vector<double> x;

  auto evaluate = [&] {
    Dense sq(rank, std::vector<double>(rank));
    std::vector<double> rhs(rank);
    for (std::size_t a = 0; a < rank; ++a) {
      for (std::size_t b = 0; b < rank; ++b) sq[a][b] = A[rows[a]][subset[b]];
      rhs[a] = m.rhs[rows[a]];
    }
    if (!gauss_solve(sq, rhs, x)) return;
    for (double v : x)
      if (v < -1e-12) return;
    for (std::size_t r = 0; r < M; ++r) {
      double s = 0.0;
      for (std::size_t b = 0; b < rank; ++b) s += A[r][subset[b]] * x[b];
      if (std::abs(s - m.rhs[r]) > 1e-9) return;
    }
    double value = 0.0;
    for (std::size_t b = 0; b < rank; ++b) value += m.cost[subset[b]] * std::max(0.0, x[b]);
    if (value < best_value - 1e-12) {
      best_value = value;
      res.witnesses.clear();
    }
    if (value <= best_value + 1e-12) res.witnesses.push_back(subset);
  };

  // Lexicographic walk over all rank-subsets of the columns.
  if (rank <= N) {
    for (std::size_t t = 0; t < rank; ++t) subset[t] = t;
    for (;;) {
      evaluate();
      std::size_t t = rank;
      while (t > 0 && subset[t - 1] == N - rank + t - 1) --t;
      if (t == 0) break;
      ++subset[t - 1];
      for (std::size_t u = t; u < rank; ++u) subset[u] = subset[u - 1] + 1;
    }
  }

  if (best_value < std::numeric_limits<double>::infinity()) {
    res.status = OracleStatus::Optimal;
    res.value = best_value;
  }
  return res;
}

std::uint64_t dice_enumeration(long s, long K, long n) {
  if (K < 1 || n < 1) return 0;
  double space = std::pow(static_cast<double>(K), static_cast<double>(n));
  if (space > 1e7) throw CapExceeded(fmt::format("dice enumeration capped at 10^7 tuples (K^n = {:.3g})", space));
  std::vector<long> dice(static_cast<std::size_t>(n), 1);
  std::uint64_t hits = 0;
  for (;;) {
    long sum = 0;
    for (long v : dice) sum += v;
    hits += sum == s;
    std::size_t t = dice.size();
    while (t > 0 && dice[t - 1] == K) dice[--t] = 1;
    if (t == 0) break;
    ++dice[t - 1];
  }
  return hits;
}

std::vector<long long> DuplicateCensus::key_of(const Point& mean) const {
  std::vector<long long> key(mean.size());
  for (std::size_t l = 0; l < mean.size(); ++l) key[l] = std::llround(scale * mean[l] / unit[l]);
  return key;
}

DuplicateCensus enumerate_duplicates(const Problem& p, double tol) {
  const std::size_t n = p.n(), d = p.dim();
  long double total = 1.0L;
  for (const auto& m : p.measures) total *= static_cast<long double>(m.size());
  if (total > 1e6L) throw CapExceeded("duplicate enumeration capped at 10^6 combinations");

  DuplicateCensus census;
  bool uniform = true;
  for (double w : p.weights) uniform = uniform && std::abs(w - 1.0 / static_cast<double>(n)) <= 1e-12;
  census.scale = uniform ? static_cast<long double>(n) : 1.0L;
  census.unit.assign(d, 1.0L);
  for (std::size_t l = 0; l < d; ++l) {
    long double lo = std::numeric_limits<long double>::max(), hi = -lo;
    for (const auto& m : p.measures)
      for (const auto& x : m.points) {
        lo = std::min<long double>(lo, x[l]);
        hi = std::max<long double>(hi, x[l]);
      }
    long double span = hi > lo ? hi - lo : 1.0L;
    census.unit[l] = static_cast<long double>(tol) * span;
  }

  std::vector<std::size_t> pick(n, 0);
  std::vector<long long> key(d);
  for (;;) {
    for (std::size_t l = 0; l < d; ++l) {
      long double s = 0.0L;
      for (std::size_t i = 0; i < n; ++i)
        s += static_cast<long double>(p.weights[i]) * p.measures[i].points[pick[i]][l];
      key[l] = std::llround(census.scale * s / census.unit[l]);
    }
    ++census.counts[key];
    std::size_t t = n;
    while (t > 0 && pick[t - 1] + 1 == p.measures[t - 1].size()) pick[--t] = 0;
    if (t == 0) break;
    ++pick[t - 1];
  }
  return census;
}

}  // namespace wbary::oracle
