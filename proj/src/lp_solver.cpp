#include "wbary/lp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "wbary/basis_factor.hpp"

namespace wbary {

namespace {

constexpr double kPivotTolerance = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

class Simplex {
 public:
  Simplex(const LpModel& model, const SolveOptions& opts)
      : m_(model), opt_(opts), M_(model.num_rows), N_(model.num_vars()), factor_(model.num_rows),
        alpha_(model.num_rows), rho_(model.num_rows) {
    sign_.resize(M_);
    for (std::size_t r = 0; r < M_; ++r) sign_[r] = model.rhs[r] < 0.0 ? -1.0 : 1.0;
    art_rows_.resize(M_);
    std::iota(art_rows_.begin(), art_rows_.end(), 0u);
    basic_.resize(M_);
    for (std::size_t r = 0; r < M_; ++r) basic_[r] = N_ + r;
    is_basic_.assign(N_ + M_, 0);
    for (std::size_t r = 0; r < M_; ++r) is_basic_[N_ + r] = 1;
    xb_.assign(M_, 0.0);
    y_.assign(M_, 0.0);
    block_ = std::clamp<std::size_t>(N_ / 32, 2000, 50000);
  }

  LpSolution run();

 private:
  bool artificial(std::uint64_t v) const { return v >= N_; }
  double cost(std::uint64_t v) const {
    if (phase_ == 1) return artificial(v) ? 1.0 : 0.0;
    return artificial(v) ? 0.0 : m_.cost[v];
  }
  double upper(std::uint64_t v) const { return (phase_ == 2 && artificial(v)) ? 0.0 : kInf; }
  ColumnView column(std::uint64_t v) const {
    if (artificial(v)) {
      const std::size_t r = v - N_;
      return {std::span<const std::uint32_t>(&art_rows_[r], 1), std::span<const double>(&sign_[r], 1)};
    }
    const auto& A = m_.matrix;
    const std::size_t b = A.start[v], e = A.start[v + 1];
    return {std::span<const std::uint32_t>(A.row.data() + b, e - b), std::span<const double>(A.value.data() + b, e - b)};
  }
  double reduced_cost(std::size_t j) const {
    const auto& A = m_.matrix;
    double d = cost(j);
    for (std::uint64_t e = A.start[j]; e < A.start[j + 1]; ++e) d -= y_[A.row[e]] * A.value[e];
    return d;
  }

  bool refactor();
  void recompute_duals();
  std::int64_t price_bland() const;
  std::int64_t price_dantzig();
  std::int64_t ratio_bland(double& theta) const;
  std::int64_t ratio_harris(double& theta) const;
  double artificial_infeasibility() const;
  LpSolution finish(SolveStatus status, std::string message);

  const LpModel& m_;
  SolveOptions opt_;
  std::size_t M_, N_;
  BasisFactor factor_;
  std::vector<double> sign_;
  std::vector<std::uint32_t> art_rows_;
  std::vector<std::uint64_t> basic_;
  std::vector<char> is_basic_;
  std::vector<double> xb_;
  std::vector<double> y_;
  SparseVector alpha_, rho_;
  int phase_ = 1;
  std::uint64_t iters_ = 0;
  std::size_t cursor_ = 0;
  std::size_t block_ = 0;
};

bool Simplex::refactor() {
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::vector<ColumnView> views(M_);
    for (std::size_t r = 0; r < M_; ++r) views[r] = column(basic_[r]);
    auto out = factor_.factor(views);
    std::vector<std::uint64_t> next(M_, std::numeric_limits<std::uint64_t>::max());
    for (std::size_t c = 0; c < M_; ++c) {
      if (out.row_of[c] >= 0)
        next[static_cast<std::size_t>(out.row_of[c])] = basic_[c];
      else
        is_basic_[basic_[c]] = 0;
    }
    for (std::uint32_t r : out.uncovered) {
      next[r] = N_ + r;
      is_basic_[N_ + r] = 1;
    }
    basic_ = std::move(next);
    if (out.uncovered.empty()) break;
    if (attempt == 3) return false;
  }

  SparseVector x(M_);
  for (std::uint32_t r = 0; r < M_; ++r)
    if (m_.rhs[r] != 0.0) x.set(r, m_.rhs[r]);
  factor_.ftran(x);
  std::fill(xb_.begin(), xb_.end(), 0.0);
  for (std::uint32_t r : x.idx) xb_[r] = x.val[r];
  recompute_duals();
  return true;
}

void Simplex::recompute_duals() {
  SparseVector c(M_);
  for (std::uint32_t r = 0; r < M_; ++r) {
    double v = cost(basic_[r]);
    if (v != 0.0) c.set(r, v);
  }
  factor_.btran(c);
  std::fill(y_.begin(), y_.end(), 0.0);
  for (std::uint32_t r : c.idx) y_[r] = c.val[r];
}

std::int64_t Simplex::price_bland() const {
  for (std::size_t j = 0; j < N_; ++j)
    if (!is_basic_[j] && reduced_cost(j) < -opt_.optimality_tol) return static_cast<std::int64_t>(j);
  return -1;
}

std::int64_t Simplex::price_dantzig() {
  std::int64_t best = -1;
  double best_d = -opt_.optimality_tol;
  std::size_t scanned = 0;
  while (scanned < N_) {
    const std::size_t len = std::min(block_, N_ - scanned);
    for (std::size_t t = 0; t < len; ++t) {
      std::size_t j = cursor_ + t;
      if (j >= N_) j -= N_;
      if (is_basic_[j]) continue;
      double d = reduced_cost(j);
      if (d < best_d) {
        best_d = d;
        best = static_cast<std::int64_t>(j);
      }
    }
    scanned += len;
    cursor_ += len;
    if (cursor_ >= N_) cursor_ -= N_;
    if (best >= 0) break;
  }
  return best;
}

std::int64_t Simplex::ratio_bland(double& theta) const {
  std::int64_t best = -1;
  std::uint64_t best_var = 0;
  theta = kInf;
  for (std::uint32_t r : alpha_.idx) {
    const double a = alpha_.val[r];
    double ratio;
    if (a > kPivotTolerance)
      ratio = std::max(0.0, xb_[r]) / a;
    else if (a < -kPivotTolerance && upper(basic_[r]) < kInf)
      ratio = std::max(0.0, upper(basic_[r]) - xb_[r]) / -a;
    else
      continue;
    if (best < 0 || ratio < theta - 1e-12) {
      theta = ratio;
      best = r;
      best_var = basic_[r];
    } else if (ratio <= theta + 1e-12 && basic_[r] < best_var) {
      theta = std::min(theta, ratio);
      best = r;
      best_var = basic_[r];
    }
  }
  return best;
}

std::int64_t Simplex::ratio_harris(double& theta) const {
  const double delta = opt_.feasibility_tol;
  double bound = kInf;
  for (std::uint32_t r : alpha_.idx) {
    const double a = alpha_.val[r];
    if (a > kPivotTolerance)
      bound = std::min(bound, (xb_[r] + delta) / a);
    else if (a < -kPivotTolerance && upper(basic_[r]) < kInf)
      bound = std::min(bound, (upper(basic_[r]) - xb_[r] + delta) / -a);
  }
  if (bound == kInf) return -1;
  std::int64_t best = -1;
  double best_abs = 0.0;
  for (std::uint32_t r : alpha_.idx) {
    const double a = alpha_.val[r];
    double ratio;
    if (a > kPivotTolerance)
      ratio = xb_[r] / a;
    else if (a < -kPivotTolerance && upper(basic_[r]) < kInf)
      ratio = (upper(basic_[r]) - xb_[r]) / -a;
    else
      continue;
    if (ratio <= bound && std::abs(a) > best_abs) {
      best_abs = std::abs(a);
      best = r;
      theta = std::max(0.0, ratio);
    }
  }
  return best;
}

double Simplex::artificial_infeasibility() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < M_; ++r)
    if (artificial(basic_[r])) worst = std::max(worst, std::abs(xb_[r]));
  return worst;
}

LpSolution Simplex::finish(SolveStatus status, std::string message) {
  LpSolution s;
  s.status = status;
  s.iterations = iters_;
  s.message = std::move(message);
  s.values.assign(N_, 0.0);
  for (std::size_t r = 0; r < M_; ++r) {
    s.basis.push_back(basic_[r]);
    if (!artificial(basic_[r])) s.values[basic_[r]] = std::max(0.0, xb_[r]);
  }
  std::sort(s.basis.begin(), s.basis.end());
  s.objective = 0.0;
  for (std::size_t j = 0; j < N_; ++j)
    if (s.values[j] != 0.0) s.objective += m_.cost[j] * s.values[j];
  s.residual = primal_residual(m_, s.values);
  if (s.status == SolveStatus::Optimal && !(s.residual <= opt_.residual_tol)) {
    s.status = SolveStatus::NumericFailure;
    s.message = fmt::format("primal residual {:.3g} exceeds {:.3g}", s.residual, opt_.residual_tol);
  }
  return s;
}

LpSolution Simplex::run() {
  if (M_ == 0) return finish(SolveStatus::Optimal, "");
  if (!refactor()) return finish(SolveStatus::NumericFailure, "singular basis could not be repaired");

  std::size_t degenerate_run = 0;
  bool fresh = true;
  for (;;) {
    if (iters_ >= opt_.max_iters)
      return finish(SolveStatus::IterationLimit, fmt::format("stopped after {} iterations", iters_));
    if (factor_.num_updates() >= opt_.refactor_interval) {
      if (!refactor()) return finish(SolveStatus::NumericFailure, "singular basis could not be repaired");
      fresh = true;
      if (phase_ == 2 && artificial_infeasibility() > 100 * opt_.feasibility_tol) {
        phase_ = 1;
        recompute_duals();
      }
    }

    const bool bland = opt_.pivot_rule == PivotRule::Bland || degenerate_run >= opt_.degenerate_limit;
    std::int64_t q = bland ? price_bland() : price_dantzig();
    if (q < 0 && !fresh) {
      if (!refactor()) return finish(SolveStatus::NumericFailure, "singular basis could not be repaired");
      fresh = true;
      continue;
    }
    if (q < 0) {
      if (phase_ == 2) return finish(SolveStatus::Optimal, "");
      if (artificial_infeasibility() > opt_.feasibility_tol)
        return finish(SolveStatus::Infeasible, "no nonnegative solution satisfies the constraints");
      phase_ = 2;
      recompute_duals();
      degenerate_run = 0;
      continue;
    }

    const double dq = reduced_cost(static_cast<std::size_t>(q));
    alpha_.clear();
    const ColumnView col = column(static_cast<std::uint64_t>(q));
    for (std::size_t e = 0; e < col.rows.size(); ++e) alpha_.set(col.rows[e], col.vals[e]);
    factor_.ftran(alpha_);

    double theta = 0.0;
    const std::int64_t p = bland ? ratio_bland(theta) : ratio_harris(theta);
    if (p < 0) {
      if (phase_ == 2) return finish(SolveStatus::Unbounded, "objective decreases without bound");
      return finish(SolveStatus::NumericFailure, "no leaving variable in phase 1");
    }
    const auto pr = static_cast<std::uint32_t>(p);

    rho_.clear();
    rho_.set(pr, 1.0);
    factor_.btran(rho_);

    for (std::uint32_t r : alpha_.idx) xb_[r] -= theta * alpha_.val[r];
    xb_[pr] = theta;
    const double step = dq / alpha_.val[pr];
    for (std::uint32_t r : rho_.idx) y_[r] += step * rho_.val[r];

    is_basic_[basic_[pr]] = 0;
    is_basic_[static_cast<std::size_t>(q)] = 1;
    basic_[pr] = static_cast<std::uint64_t>(q);
    factor_.update(alpha_, pr);
    fresh = false;
    ++iters_;
    degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;

    if (opt_.log_every && iters_ % opt_.log_every == 0) {
      double obj = 0.0;
      for (std::size_t r = 0; r < M_; ++r) obj += cost(basic_[r]) * xb_[r];
      std::fprintf(stderr, "iter %llu phase %d obj %.12g etas %zu/%zu\n", static_cast<unsigned long long>(iters_),
                   phase_, obj, factor_.eta_nnz(), factor_.base_nnz());
    }
  }
}

}  // namespace

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::NumericFailure: return "numeric-failure";
  }
  return "?";
}

double primal_residual(const LpModel& m, const std::vector<double>& x) {
  std::vector<double> r(m.rhs.begin(), m.rhs.end());
  const auto& A = m.matrix;
  for (std::size_t j = 0; j < m.num_vars(); ++j) {
    if (x[j] == 0.0) continue;
    for (std::uint64_t e = A.start[j]; e < A.start[j + 1]; ++e) r[A.row[e]] -= A.value[e] * x[j];
  }
  double worst = 0.0;
  for (double v : r) worst = std::max(worst, std::abs(v));
  return worst;
}

LpSolution solve(const LpModel& m, const SolveOptions& opts) { return Simplex(m, opts).run(); }

}  // namespace wbary
