#include "wbary/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

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

}  // namespace

std::vector<std::string> VerificationReport::lines() const {
  auto mark = [](bool ok) { return ok ? "ok" : "FAILED"; };
  std::vector<std::string> out;
  out.push_back(fmt::format("total mass        {:.12g} ({})", total_mass, mark(total_mass_ok)));
  out.push_back(fmt::format("marginal error    {:.3g} ({})", marginal_error, mark(marginals_ok)));
  out.push_back(fmt::format("cost recomputed   {:.12g}, error {:.3g} ({})", cost_recomputed, cost_error, mark(cost_ok)));
  out.push_back(fmt::format("support size      {} of bound {} ({})", support_size, sparsity_bound,
                            sparse ? "ok" : "exceeded, advisory"));
  out.push_back(fmt::format("mass splitting    {}", non_mass_splitting ? "none" : "present, advisory"));
  for (const auto& s : splitting) out.push_back("  " + s);
  if (renormalized) out.push_back(fmt::format("dropped mass      {:.3g}, renormalized", dropped_mass));
  return out;
}

BarycenterSolution extract_barycenter(const LpSolution& sol, const LpModel& m, const Problem& p,
                                      const SupportAtlas* atlas, double dedup_tol) {
  if (sol.status != SolveStatus::Optimal)
    throw std::invalid_argument(fmt::format("cannot extract a barycenter from a {} solution", to_string(sol.status)));
  if (sol.values.size() != m.num_vars() || m.vars.size() != m.num_vars())
    throw std::invalid_argument("solution does not match the model's variable metadata");

  std::optional<MeanQuantizer> quantizer;
  if (!atlas) quantizer.emplace(p, dedup_tol);

  std::map<std::vector<std::int64_t>, std::size_t> slot_of;
  std::vector<SupportMass> slots;
  auto slot = [&](std::vector<std::int64_t> key, auto&& point_fn) {
    auto [it, fresh] = slot_of.try_emplace(std::move(key), slots.size());
    if (fresh) slots.push_back({point_fn(), 0.0});
    return it->second;
  };
  auto atlas_slot = [&](std::uint32_t j) {
    if (!atlas) throw std::invalid_argument("z and y variables need the support atlas");
    return slot({static_cast<std::int64_t>(j)}, [&] { return atlas->support_points[j]; });
  };

  std::map<std::tuple<std::uint32_t, std::size_t, std::uint32_t>, double> moved;
  std::vector<std::int64_t> key(p.dim());
  for (std::size_t v = 0; v < m.num_vars(); ++v) {
    const double x = sol.values[v];
    if (x <= 0.0) continue;
    const VarRole& role = m.vars[v];
    switch (role.kind) {
      case VarKind::Z: slots[atlas_slot(role.jh)].mass += x; break;
      case VarKind::Y: moved[{role.i, atlas_slot(role.jh), role.k}] += x; break;
      case VarKind::W: {
        const Combination c = combination_at(p, role.jh);
        std::size_t s;
        if (atlas) {
          auto j = atlas->locate(c, p);
          if (!j) throw std::invalid_argument(fmt::format("combination {} has no support point", role.jh + 1));
          s = atlas_slot(*j);
        } else {
          quantizer->key_of(c, key);
          s = slot(key, [&] { return weighted_mean(c, p); });
        }
        slots[s].mass += x;
        for (std::uint32_t i = 0; i < c.indices.size(); ++i) moved[{i, s, c.indices[i]}] += x;
        break;
      }
    }
  }

  BarycenterSolution b;
  b.source = m.formulation;
  b.cost = sol.objective;

  std::vector<std::size_t> order;
  double dropped = 0.0, kept = 0.0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].mass < kDropThreshold) {
      dropped += slots[s].mass;
    } else {
      order.push_back(s);
      kept += slots[s].mass;
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return slots[a].point < slots[c].point; });
  std::vector<std::int64_t> out_index(slots.size(), -1);
  for (std::size_t t = 0; t < order.size(); ++t) {
    out_index[order[t]] = static_cast<std::int64_t>(t);
    SupportMass sm = slots[order[t]];
    if (dropped > 0.0 && kept > 0.0) sm.mass /= kept;
    b.support.push_back(std::move(sm));
  }
  for (const auto& [where, mass] : moved) {
    auto [i, s, k] = where;
    if (mass < kDropThreshold || out_index[s] < 0) continue;
    b.transport.push_back({i, static_cast<std::uint32_t>(out_index[s]), k, mass});
  }
  std::sort(b.transport.begin(), b.transport.end(), [](const TransportEntry& a, const TransportEntry& c) {
    return std::tie(a.i, a.j, a.k) < std::tie(c.i, c.j, c.k);
  });

  b.verification = verify_solution(b, p);
  b.verification.dropped_mass = dropped;
  b.verification.renormalized = dropped > 0.0;
  return b;
}

VerificationReport verify_solution(const BarycenterSolution& b, const Problem& p) {
  VerificationReport r;
  r.total_mass = 0.0;
  for (const auto& s : b.support) r.total_mass += s.mass;
  r.total_mass_ok = std::abs(r.total_mass - 1.0) <= kVerifyTolerance;

  std::vector<std::vector<double>> marginal(p.n());
  for (std::size_t i = 0; i < p.n(); ++i) marginal[i].assign(p.measures[i].size(), 0.0);
  std::vector<std::vector<double>> outflow(p.n(), std::vector<double>(b.support.size(), 0.0));
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> targets;
  bool indices_ok = true;
  for (const auto& t : b.transport) {
    if (t.i >= p.n() || t.k >= p.measures[t.i].size() || t.j >= b.support.size()) {
      indices_ok = false;
      continue;
    }
    marginal[t.i][t.k] += t.mass;
    outflow[t.i][t.j] += t.mass;
    if (t.mass > kSplitTolerance) targets[{t.j, t.i}].push_back(t.k);
  }
  r.marginal_error = indices_ok ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.n(); ++i) {
    for (std::size_t k = 0; k < p.measures[i].size(); ++k)
      r.marginal_error = std::max(r.marginal_error, std::abs(marginal[i][k] - p.measures[i].masses[k]));
    for (std::size_t j = 0; j < b.support.size(); ++j)
      r.marginal_error = std::max(r.marginal_error, std::abs(outflow[i][j] - b.support[j].mass));
  }
  r.marginals_ok = r.marginal_error <= kVerifyTolerance;

  if (indices_ok) {
    r.cost_recomputed = total_cost(b, p);
    r.cost_error = std::abs(r.cost_recomputed - b.cost);
    r.cost_ok = r.cost_error <= kVerifyTolerance;
  }

  r.support_size = b.support.size();
  r.sparsity_bound = p.total_support() - p.n() + 1;
  r.sparse = r.support_size <= r.sparsity_bound;

  r.non_mass_splitting = true;
  for (const auto& [where, ks] : targets) {
    if (ks.size() <= 1) continue;
    r.non_mass_splitting = false;
    std::string list;
    for (std::uint32_t k : ks) list += fmt::format("{}{}", list.empty() ? "" : ",", k + 1);
    r.splitting.push_back(
        fmt::format("support point {} sends mass to points {} of measure {}", where.first + 1, list, where.second + 1));
  }
  return r;
}

double total_cost(const BarycenterSolution& b, const Problem& p) {
  double s = 0.0;
  for (const auto& t : b.transport) {
    if (t.i >= p.n() || t.k >= p.measures[t.i].size() || t.j >= b.support.size())
      throw std::out_of_range(fmt::format("transport entry ({}, {}, {}) out of range", t.i + 1, t.j + 1, t.k + 1));
    s += p.weights[t.i] * squared_distance(b.support[t.j].point, p.measures[t.i].points[t.k]) * t.mass;
  }
  return s;
}

void write_solution_json(std::ostream& out, const LpSolution& sol, const BarycenterSolution* b) {
  nlohmann::ordered_json j;
  j["status"] = std::string(to_string(sol.status));
  j["objective"] = sol.objective;
  j["support"] = nlohmann::ordered_json::array();
  j["transport"] = nlohmann::ordered_json::array();
  if (b) {
    for (const auto& s : b->support) j["support"].push_back({{"point", s.point}, {"mass", s.mass}});
    for (const auto& t : b->transport) j["transport"].push_back({t.i + 1, t.j + 1, t.k + 1, t.mass});
  }
  out << j.dump(2) << '\n';
}

std::string column_name(const VarRole& v) {
  switch (v.kind) {
    case VarKind::Z: return fmt::format("z{}", v.jh + 1);
    case VarKind::Y: return fmt::format("y{}_{}_{}", v.i + 1, v.jh + 1, v.k + 1);
    case VarKind::W: return fmt::format("w{}", std::uint64_t{v.jh} + 1);
  }
  return "?";
}

std::string row_name(const RowRole& r) {
  return fmt::format("{}{}_{}", r.kind == RowKind::Marginal ? 'm' : 'b', r.i + 1, r.index + 1);
}

namespace {

// Fixed-format field starts (1-based): 2, 5, 15, 25, 40, 50.
void field(std::string& line, std::size_t column, std::string_view text) {
  if (line.size() < column - 1)
    line.append(column - 1 - line.size(), ' ');
  else if (!line.empty())
    line.push_back(' ');
  line.append(text);
}

std::string number(double v) { return fmt::format("{}", v); }

}  // namespace

void export_mps(const LpModel& m, std::ostream& sink) {
  std::vector<std::string> rows(m.num_rows);
  for (std::size_t r = 0; r < m.num_rows; ++r) rows[r] = row_name(m.rows[r]);

  std::string line;
  auto emit = [&] {
    sink << line << '\n';
    line.clear();
  };
  line = "NAME";
  field(line, 15, to_string(m.formulation));
  emit();
  sink << "ROWS\n";
  line.clear();
  field(line, 2, "N");
  field(line, 5, "COST");
  emit();
  for (const auto& name : rows) {
    field(line, 2, "E");
    field(line, 5, name);
    emit();
  }

  sink << "COLUMNS\n";
  for (std::size_t c = 0; c < m.num_vars(); ++c) {
    const std::string name = column_name(m.vars[c]);
    std::vector<std::pair<std::string_view, double>> entries;
    if (m.cost[c] != 0.0) entries.emplace_back("COST", m.cost[c]);
    for (std::uint64_t e = m.matrix.start[c]; e < m.matrix.start[c + 1]; ++e)
      entries.emplace_back(rows[m.matrix.row[e]], m.matrix.value[e]);
    for (std::size_t e = 0; e < entries.size(); e += 2) {
      field(line, 5, name);
      field(line, 15, entries[e].first);
      field(line, 25, number(entries[e].second));
      if (e + 1 < entries.size()) {
        field(line, 40, entries[e + 1].first);
        field(line, 50, number(entries[e + 1].second));
      }
      emit();
    }
  }

  sink << "RHS\n";
  std::vector<std::size_t> nonzero;
  for (std::size_t r = 0; r < m.num_rows; ++r)
    if (m.rhs[r] != 0.0) nonzero.push_back(r);
  for (std::size_t e = 0; e < nonzero.size(); e += 2) {
    field(line, 5, "RHS");
    field(line, 15, rows[nonzero[e]]);
    field(line, 25, number(m.rhs[nonzero[e]]));
    if (e + 1 < nonzero.size()) {
      field(line, 40, rows[nonzero[e + 1]]);
      field(line, 50, number(m.rhs[nonzero[e + 1]]));
    }
    emit();
  }
  sink << "ENDATA\n";
  if (!sink) throw std::runtime_error("failed writing MPS output");
}

}  // namespace wbary
