#include "wbary/basis_factor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

namespace wbary {

namespace {

constexpr double kDropTolerance = 1e-14;
constexpr double kBumpPivotTolerance = 1e-9;

// Past this fill fraction the heap bookkeeping costs more than a plain sweep.
bool too_dense(std::size_t nnz, std::size_t m) { return nnz * 10 > m; }

}  // namespace

void SparseVector::clear() {
  for (std::uint32_t i : idx) {
    val[i] = 0.0;
    in[i] = 0;
  }
  idx.clear();
}

void SparseVector::densify() {
  for (std::uint32_t i = 0; i < val.size(); ++i)
    if (!in[i]) {
      in[i] = 1;
      idx.push_back(i);
    }
}

void BasisFactor::clear() {
  piv_row_.clear();
  piv_val_.clear();
  start_.assign(1, 0);
  row_.clear();
  val_.clear();
  pivots_on_.assign(m_, {});
  touching_.assign(m_, {});
  base_etas_ = 0;
  base_nnz_ = 0;
}

void BasisFactor::push_eta(std::uint32_t r, double pivot, const SparseVector& col, bool skip_zero) {
  const auto t = static_cast<std::uint32_t>(piv_row_.size());
  piv_row_.push_back(r);
  piv_val_.push_back(pivot);
  pivots_on_[r].push_back(t);
  touching_[r].push_back(t);
  for (std::uint32_t i : col.idx) {
    if (i == r) continue;
    double v = col.val[i];
    if (skip_zero && std::abs(v) <= kDropTolerance) continue;
    row_.push_back(i);
    val_.push_back(v);
    touching_[i].push_back(t);
  }
  start_.push_back(row_.size());
}

BasisFactor::Outcome BasisFactor::factor(std::span<const ColumnView> cols) {
  clear();
  const std::size_t nc = cols.size();
  Outcome out;
  out.row_of.assign(nc, -1);

  // Row-wise pattern of the basis.
  std::vector<std::uint32_t> row_start(m_ + 1, 0);
  for (const auto& c : cols)
    for (std::uint32_t r : c.rows) ++row_start[r + 1];
  for (std::size_t r = 0; r < m_; ++r) row_start[r + 1] += row_start[r];
  std::vector<std::uint32_t> row_cols(row_start[m_]);
  {
    std::vector<std::uint32_t> fill(row_start.begin(), row_start.end() - 1);
    for (std::uint32_t c = 0; c < nc; ++c)
      for (std::uint32_t r : cols[c].rows) row_cols[fill[r]++] = c;
  }

  std::vector<char> row_active(m_, 1), col_active(nc, 1);
  std::vector<std::uint32_t> count(m_);
  for (std::size_t r = 0; r < m_; ++r) count[r] = row_start[r + 1] - row_start[r];

  auto entry = [&](std::uint32_t c, std::uint32_t r) {
    const auto& col = cols[c];
    auto it = std::lower_bound(col.rows.begin(), col.rows.end(), r);
    return col.vals[static_cast<std::size_t>(it - col.rows.begin())];
  };

  // Row singletons: lower triangular part, factored first without fill.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> lower;
  std::vector<std::uint32_t> queue;
  for (std::uint32_t r = 0; r < m_; ++r)
    if (count[r] == 1) queue.push_back(r);
  while (!queue.empty()) {
    std::uint32_t r = queue.back();
    queue.pop_back();
    if (!row_active[r] || count[r] != 1) continue;
    std::uint32_t c = 0;
    bool found = false;
    for (std::uint32_t e = row_start[r]; e < row_start[r + 1] && !found; ++e)
      if (col_active[row_cols[e]]) {
        c = row_cols[e];
        found = true;
      }
    if (!found) continue;
    lower.emplace_back(r, c);
    row_active[r] = 0;
    col_active[c] = 0;
    for (std::uint32_t i : cols[c].rows)
      if (row_active[i] && --count[i] == 1) queue.push_back(i);
  }

  // Column singletons of what remains: upper triangular part, factored last.
  std::vector<std::uint32_t> ccount(nc, 0);
  for (std::uint32_t c = 0; c < nc; ++c)
    if (col_active[c])
      for (std::uint32_t r : cols[c].rows) ccount[c] += row_active[r];
  std::vector<std::pair<std::uint32_t, std::uint32_t>> upper;
  for (std::uint32_t c = 0; c < nc; ++c)
    if (col_active[c] && ccount[c] == 1) queue.push_back(c);
  while (!queue.empty()) {
    std::uint32_t c = queue.back();
    queue.pop_back();
    if (!col_active[c] || ccount[c] != 1) continue;
    std::uint32_t r = 0;
    for (std::uint32_t i : cols[c].rows)
      if (row_active[i]) r = i;
    upper.emplace_back(r, c);
    row_active[r] = 0;
    col_active[c] = 0;
    for (std::uint32_t e = row_start[r]; e < row_start[r + 1]; ++e) {
      std::uint32_t c2 = row_cols[e];
      if (col_active[c2] && --ccount[c2] == 1) queue.push_back(c2);
    }
  }

  SparseVector work(m_);
  auto load = [&](std::uint32_t c) {
    work.clear();
    for (std::size_t e = 0; e < cols[c].rows.size(); ++e) work.set(cols[c].rows[e], cols[c].vals[e]);
  };

  for (auto [r, c] : lower) {
    load(c);
    push_eta(r, entry(c, r), work, false);
    out.row_of[c] = r;
  }

  std::vector<std::uint32_t> bump;
  for (std::uint32_t c = 0; c < nc; ++c)
    if (col_active[c]) bump.push_back(c);
  std::stable_sort(bump.begin(), bump.end(), [&](std::uint32_t a, std::uint32_t b) { return ccount[a] < ccount[b]; });
  for (std::uint32_t c : bump) {
    load(c);
    ftran(work);
    std::uint32_t best = 0;
    double best_abs = 0.0;
    for (std::uint32_t i : work.idx)
      if (row_active[i] && std::abs(work.val[i]) > best_abs) {
        best_abs = std::abs(work.val[i]);
        best = i;
      }
    if (best_abs <= kBumpPivotTolerance) continue;
    push_eta(best, work.val[best], work, true);
    row_active[best] = 0;
    out.row_of[c] = best;
  }

  for (auto it = upper.rbegin(); it != upper.rend(); ++it) {
    auto [r, c] = *it;
    load(c);
    push_eta(r, entry(c, r), work, false);
    out.row_of[c] = r;
  }

  std::vector<char> covered(m_, 0);
  for (std::uint32_t r : piv_row_) covered[r] = 1;
  for (std::uint32_t r = 0; r < m_; ++r)
    if (!covered[r]) out.uncovered.push_back(r);

  base_etas_ = piv_row_.size();
  base_nnz_ = row_.size();
  return out;
}

void BasisFactor::apply_forward(std::size_t t, std::vector<double>& x) const {
  const std::uint32_t r = piv_row_[t];
  double xr = x[r];
  if (xr == 0.0) return;
  xr /= piv_val_[t];
  x[r] = xr;
  for (std::uint64_t e = start_[t]; e < start_[t + 1]; ++e) x[row_[e]] -= val_[e] * xr;
}

double BasisFactor::apply_backward(std::size_t t, const std::vector<double>& y) const {
  double s = y[piv_row_[t]];
  for (std::uint64_t e = start_[t]; e < start_[t + 1]; ++e) s -= val_[e] * y[row_[e]];
  return s / piv_val_[t];
}

void BasisFactor::ftran(SparseVector& x) const {
  const std::size_t T = piv_row_.size();
  auto sweep = [&](std::size_t from) {
    for (std::size_t t = from; t < T; ++t) {
      const std::uint32_t r = piv_row_[t];
      if (x.val[r] == 0.0) continue;
      for (std::uint64_t e = start_[t]; e < start_[t + 1]; ++e)
        if (!x.in[row_[e]]) {
          x.in[row_[e]] = 1;
          x.idx.push_back(row_[e]);
        }
      apply_forward(t, x.val);
    }
  };
  if (too_dense(x.idx.size(), m_)) return sweep(0);

  // Etas in ascending order, visiting only those whose pivot row can be nonzero.
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> heap;
  auto schedule = [&](std::uint32_t row, std::int64_t after) {
    const auto& list = pivots_on_[row];
    auto it = std::upper_bound(list.begin(), list.end(), after,
                               [](std::int64_t a, std::uint32_t b) { return a < static_cast<std::int64_t>(b); });
    if (it != list.end()) heap.push(*it);
  };
  for (std::uint32_t i : x.idx) schedule(i, -1);
  while (!heap.empty()) {
    const std::uint32_t t = heap.top();
    heap.pop();
    const std::uint32_t r = piv_row_[t];
    if (x.val[r] != 0.0) {
      for (std::uint64_t e = start_[t]; e < start_[t + 1]; ++e) {
        const std::uint32_t i = row_[e];
        if (!x.in[i]) {
          x.in[i] = 1;
          x.idx.push_back(i);
          schedule(i, t);
        }
      }
      apply_forward(t, x.val);
    }
    schedule(r, t);
    if (too_dense(x.idx.size(), m_)) return sweep(t + 1);
  }
}

void BasisFactor::btran(SparseVector& y) const {
  const std::size_t T = piv_row_.size();
  auto sweep = [&](std::size_t below) {
    for (std::size_t t = below; t-- > 0;) {
      const std::uint32_t r = piv_row_[t];
      double v = apply_backward(t, y.val);
      if (v != 0.0 && !y.in[r]) {
        y.in[r] = 1;
        y.idx.push_back(r);
      }
      y.val[r] = v;
    }
  };
  if (too_dense(y.idx.size(), m_)) return sweep(T);

  // Etas in descending order, keyed by the row that scheduled them.
  std::priority_queue<std::pair<std::uint32_t, std::uint32_t>> heap;
  auto schedule = [&](std::uint32_t row, std::uint64_t below) {
    const auto& list = touching_[row];
    auto it = std::lower_bound(list.begin(), list.end(), below,
                               [](std::uint32_t a, std::uint64_t b) { return a < b; });
    if (it != list.begin()) heap.emplace(*std::prev(it), row);
  };
  for (std::uint32_t i : y.idx) schedule(i, T);
  std::int64_t last = -1;
  while (!heap.empty()) {
    auto [t, row] = heap.top();
    heap.pop();
    if (static_cast<std::int64_t>(t) != last) {
      last = t;
      const std::uint32_t r = piv_row_[t];
      double v = apply_backward(t, y.val);
      if (v != 0.0 && !y.in[r]) {
        y.in[r] = 1;
        y.idx.push_back(r);
        schedule(r, t);
      }
      y.val[r] = v;
    }
    schedule(row, t);
    if (too_dense(y.idx.size(), m_)) return sweep(t);
  }
}

void BasisFactor::update(const SparseVector& alpha, std::uint32_t p) { push_eta(p, alpha.val[p], alpha, true); }

}  // namespace wbary
