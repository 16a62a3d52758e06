#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "wbary/barycenter.hpp"
#include "wbary/generators.hpp"

using namespace wbary;

namespace {

// P_1 = {[0]:1}, P_2 = {[0]:.5, [2]:.5}
Problem one_two() {
  return make_problem({{{{0.0}}, {1.0}}, {{{0.0}, {2.0}}, {0.5, 0.5}}}, uniform_weights(2));
}

LpSolution optimal_with(std::vector<double> values, double objective) {
  LpSolution s;
  s.status = SolveStatus::Optimal;
  s.values = std::move(values);
  s.objective = objective;
  return s;
}

struct ParsedMps {
  std::map<std::string, char> rows;
  std::map<std::string, std::map<std::string, double>> columns;
  std::map<std::string, double> rhs;
};

// Whitespace-split reader, deliberately ignorant of the fixed column layout.
ParsedMps parse_mps(std::istream& in) {
  ParsedMps out;
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] != ' ') {
      std::istringstream h(line);
      h >> section;
      continue;
    }
    std::istringstream f(line);
    if (section == "ROWS") {
      std::string type, name;
      f >> type >> name;
      out.rows[name] = type[0];
    } else if (section == "COLUMNS" || section == "RHS") {
      std::string owner, name;
      double v;
      f >> owner;
      while (f >> name >> v) {
        if (section == "COLUMNS")
          out.columns[owner][name] = v;
        else
          out.rhs[name] = v;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("w solution is folded back onto the barycenter") {
  auto p = one_two();
  auto m = build_general(p);
  auto b = extract_barycenter(optimal_with({0.5, 0.5}, 0.5), m, p);
  REQUIRE(b.support.size() == 2);
  CHECK(b.support[0].point == Point{0.0});
  CHECK(b.support[0].mass == doctest::Approx(0.5));
  CHECK(b.support[1].point == Point{1.0});
  CHECK(b.support[1].mass == doctest::Approx(0.5));
  CHECK(total_cost(b, p) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.verification.passed());
  CHECK(b.verification.non_mass_splitting);
  CHECK(b.transport.size() == 4);
}

TEST_CASE("reduced and general solutions extract to the same measure") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto p = generate_grid(3, 3, 1, 0.8, seed);
    auto atlas = build_atlas_exact(p);
    auto red = build_reduced(atlas, p);
    auto gen = build_general(p);
    auto a = extract_barycenter(solve(red), red, p, &atlas);
    auto b = extract_barycenter(solve(gen), gen, p, &atlas);
    CHECK(a.cost == doctest::Approx(b.cost).epsilon(1e-10));
    CHECK(a.verification.passed());
    CHECK(b.verification.passed());
    CHECK(a.verification.sparse);
    CHECK(b.verification.sparse);
  }
}

TEST_CASE("identical measures yield themselves") {
  DiscreteMeasure m{{{0.0, 0.0}, {1.0, 3.0}, {2.0, 1.0}}, {0.2, 0.3, 0.5}};
  auto p = make_problem({m, m, m}, uniform_weights(3));
  auto model = build_general(p);
  auto b = extract_barycenter(solve(model), model, p);
  REQUIRE(b.support.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(b.support[j].point == m.points[j]);
    CHECK(b.support[j].mass == doctest::Approx(m.masses[j]).epsilon(1e-12));
  }
  CHECK(std::abs(b.cost) <= 1e-12);
}

TEST_CASE("one against two points respects the sparsity bound") {
  auto p = one_two();
  auto m = build_general(p);
  auto b = extract_barycenter(solve(m), m, p);
  CHECK(b.verification.sparsity_bound == 2);
  CHECK(b.support.size() <= 2);
}

TEST_CASE("a split transport is flagged") {
  auto p = one_two();
  BarycenterSolution b;
  b.support = {{{1.0}, 1.0}};
  b.transport = {{0, 0, 0, 1.0}, {1, 0, 0, 0.5}, {1, 0, 1, 0.5}};
  b.cost = total_cost(b, p);
  auto r = verify_solution(b, p);
  CHECK(r.passed());
  CHECK_FALSE(r.non_mass_splitting);
  REQUIRE(r.splitting.size() == 1);
  CHECK(r.splitting[0] == "support point 1 sends mass to points 1,2 of measure 2");
}

TEST_CASE("verification catches broken measures") {
  auto p = one_two();
  BarycenterSolution b;
  b.support = {{{1.0}, 0.9}};
  b.transport = {{0, 0, 0, 0.9}, {1, 0, 0, 0.45}, {1, 0, 1, 0.45}};
  b.cost = total_cost(b, p);
  auto r = verify_solution(b, p);
  CHECK_FALSE(r.total_mass_ok);
  CHECK_FALSE(r.marginals_ok);
  CHECK(r.cost_ok);
  b.cost += 1e-6;
  CHECK_FALSE(verify_solution(b, p).cost_ok);
}

TEST_CASE("total cost edge cases") {
  auto p = make_problem({{{{0.0}}, {1.0}}, {{{1.0}}, {1.0}}}, uniform_weights(2));
  BarycenterSolution empty;
  empty.support = {{{0.5}, 1.0}};
  CHECK(total_cost(empty, p) == 0.0);
  BarycenterSolution forced = empty;
  forced.transport = {{0, 0, 0, 1.0}, {1, 0, 0, 1.0}};
  CHECK(total_cost(forced, p) == 0.25);
  forced.transport.push_back({2, 0, 0, 1.0});
  CHECK_THROWS_AS(total_cost(forced, p), std::out_of_range);
  forced.transport.back() = {0, 0, 3, 1.0};
  CHECK_THROWS_AS(total_cost(forced, p), std::out_of_range);
}

TEST_CASE("extraction refuses non-optimal solutions") {
  auto p = one_two();
  auto m = build_general(p);
  LpSolution s;
  s.status = SolveStatus::Infeasible;
  s.values = {0.0, 0.0};
  CHECK_THROWS_AS(extract_barycenter(s, m, p), std::invalid_argument);
  CHECK_THROWS_AS(extract_barycenter(optimal_with({1.0}, 0.0), m, p), std::invalid_argument);
}

TEST_CASE("dust is dropped and the rest renormalized") {
  auto p = one_two();
  auto m = build_general(p);
  auto b = extract_barycenter(optimal_with({0.5 + 1e-12, 0.5 - 1e-12}, 0.5), m, p);
  CHECK(b.support.size() == 2);
  auto c = extract_barycenter(optimal_with({1.0 - 5e-12, 5e-12}, 0.0), m, p);
  CHECK(c.support.size() == 1);
  CHECK(c.verification.renormalized);
  CHECK(c.support[0].mass == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("solution json uses one-based indices") {
  auto p = one_two();
  auto m = build_general(p);
  auto sol = optimal_with({0.5, 0.5}, 0.5);
  auto b = extract_barycenter(sol, m, p);
  std::ostringstream out;
  write_solution_json(out, sol, &b);
  auto j = nlohmann::json::parse(out.str());
  CHECK(j["status"] == "optimal");
  CHECK(j["objective"] == 0.5);
  CHECK(j["support"].size() == 2);
  CHECK(j["support"][1]["point"] == nlohmann::json::array({1.0}));
  CHECK(j["transport"][0] == nlohmann::json::array({1, 1, 1, 0.5}));

  std::ostringstream bare;
  LpSolution failed;
  failed.status = SolveStatus::Infeasible;
  write_solution_json(bare, failed, nullptr);
  CHECK(nlohmann::json::parse(bare.str())["support"].empty());
}

TEST_CASE("names are one-based and unpadded") {
  CHECK(column_name({VarKind::Z, 0, 0, 1233}) == "z1234");
  CHECK(column_name({VarKind::Y, 1, 4, 0}) == "y2_1_5");
  CHECK(column_name({VarKind::W, 0, 0, 9}) == "w10");
  CHECK(row_name({RowKind::Marginal, 0, 2}) == "m1_3");
  CHECK(row_name({RowKind::Balance, 2, 6}) == "b3_7");
}

TEST_CASE("one variable, one row model matches the golden file") {
  LpModel m;
  m.formulation = Formulation::General;
  m.num_rows = 1;
  m.rows = {{RowKind::Marginal, 0, 0}};
  m.rhs = {1.0};
  m.cost = {0.25};
  m.vars = {{VarKind::W, 0, 0, 0}};
  m.matrix.push(0, 1.0);
  m.matrix.close_column();
  std::ostringstream out;
  export_mps(m, out);
  std::ifstream f(WBARY_TEST_DATA "/one_by_one.mps");
  REQUIRE(f.good());
  std::stringstream golden;
  golden << f.rdbuf();
  CHECK(out.str() == golden.str());
}

TEST_CASE("transportation model reads back from MPS") {
  auto p = generate_general(2, 2, 2, 5);
  auto m = build_transportation(p);
  std::stringstream s;
  export_mps(m, s);
  auto back = parse_mps(s);
  std::size_t equalities = 0;
  for (const auto& [name, type] : back.rows) equalities += type == 'E';
  CHECK(equalities == 4);
  CHECK(back.rows.at("COST") == 'N');
  CHECK(back.columns.size() == 4);
  std::size_t nz = 0;
  for (const auto& [name, entries] : back.columns) nz += entries.size() - entries.count("COST");
  CHECK(nz == m.nnz());
  for (std::size_t c = 0; c < m.num_vars(); ++c) {
    const auto& col = back.columns.at(column_name(m.vars[c]));
    CHECK(col.at("COST") == m.cost[c]);
  }
  for (std::size_t r = 0; r < m.num_rows; ++r) CHECK(back.rhs.at(row_name(m.rows[r])) == m.rhs[r]);
}

TEST_CASE("wide names push fields right instead of truncating") {
  auto p = generate_grid(2, 4, 2, 1.0, 1);
  auto atlas = build_atlas_grid(p, *p.grid);
  auto m = build_original(atlas, p);
  std::stringstream s;
  export_mps(m, s);
  auto back = parse_mps(s);
  CHECK(back.columns.size() == m.num_vars());
  CHECK(back.rows.size() == m.num_rows + 1);
  std::size_t nz = 0;
  for (const auto& [name, entries] : back.columns) nz += entries.size() - entries.count("COST");
  CHECK(nz == m.nnz());
}
