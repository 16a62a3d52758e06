#include <doctest.h>

#include <numeric>

#include "wbary/generators.hpp"
#include "wbary/oracle.hpp"
#include "wbary/support.hpp"

using namespace wbary;

namespace {

LpModel tiny(const std::vector<std::vector<double>>& A, const std::vector<double>& b, const std::vector<double>& c) {
  LpModel m;
  m.num_rows = b.size();
  m.rhs = b;
  m.cost = c;
  for (std::size_t r = 0; r < b.size(); ++r) m.rows.push_back({RowKind::Marginal, 0, static_cast<std::uint32_t>(r)});
  for (std::size_t j = 0; j < c.size(); ++j) {
    for (std::size_t r = 0; r < b.size(); ++r)
      if (A[r][j] != 0.0) m.matrix.push(static_cast<std::uint32_t>(r), A[r][j]);
    m.matrix.close_column();
    m.vars.push_back({VarKind::W, 0, 0, static_cast<std::uint32_t>(j)});
  }
  return m;
}

}  // namespace

TEST_CASE("basis enumeration on a hand-solved program") {
  // min x + 2y + 3z s.t. x + y + z = 1, y + z = 0.5 -> x = 0.5, y = 0.5, value 1.5
  auto m = tiny({{1, 1, 1}, {0, 1, 1}}, {1.0, 0.5}, {1.0, 2.0, 3.0});
  auto r = oracle::basis_enumeration_solve(m);
  REQUIRE(r.status == oracle::OracleStatus::Optimal);
  CHECK(r.value == doctest::Approx(1.5).epsilon(1e-14));
  REQUIRE(r.witnesses.size() == 1);
  CHECK(r.witnesses[0] == std::vector<std::size_t>{0, 1});
}

TEST_CASE("ties keep every optimal basis") {
  auto m = tiny({{1, 1}}, {1.0}, {1.0, 1.0});
  auto r = oracle::basis_enumeration_solve(m);
  CHECK(r.value == doctest::Approx(1.0));
  CHECK(r.witnesses.size() == 2);
}

TEST_CASE("rank-deficient rows are tolerated") {
  auto m = tiny({{1, 1}, {2, 2}}, {1.0, 2.0}, {3.0, 1.0});
  auto r = oracle::basis_enumeration_solve(m);
  REQUIRE(r.status == oracle::OracleStatus::Optimal);
  CHECK(r.value == doctest::Approx(1.0));
}

TEST_CASE("inconsistent and sign-infeasible systems") {
  CHECK(oracle::basis_enumeration_solve(tiny({{1, 1}, {1, 1}}, {1.0, 2.0}, {1, 1})).status ==
        oracle::OracleStatus::Infeasible);
  CHECK(oracle::basis_enumeration_solve(tiny({{1, 1}}, {-1.0}, {1, 1})).status == oracle::OracleStatus::Infeasible);
}

TEST_CASE("oracle caps") {
  auto p = generate_general(3, 3, 1, 1);
  auto m = build_general(p);
  CHECK_THROWS_AS(oracle::basis_enumeration_solve(m), oracle::CapExceeded);
  CHECK_NOTHROW(oracle::basis_enumeration_solve(m, {27, 9}));
}

TEST_CASE("the two-point general model costs a quarter") {
  auto p = make_problem({{{{0.0}}, {1.0}}, {{{1.0}}, {1.0}}}, uniform_weights(2));
  auto r = oracle::basis_enumeration_solve(build_general(p));
  CHECK(r.value == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("instance hash is stable and sensitive") {
  auto p = generate_general(2, 2, 1, 3);
  auto a = build_general(p);
  auto b = a;
  CHECK(oracle::basis_enumeration_solve(a).instance_hash == oracle::basis_enumeration_solve(b).instance_hash);
  b.cost[0] += 1e-3;
  CHECK(oracle::basis_enumeration_solve(a).instance_hash != oracle::basis_enumeration_solve(b).instance_hash);
}

TEST_CASE("dice enumeration") {
  CHECK(oracle::dice_enumeration(10, 4, 4) == 44);
  CHECK(oracle::dice_enumeration(7, 6, 2) == 6);
  CHECK(oracle::dice_enumeration(3, 6, 2) == 2);
  CHECK(oracle::dice_enumeration(1, 6, 2) == 0);
  std::uint64_t total = 0;
  for (long s = 3; s <= 18; ++s) total += oracle::dice_enumeration(s, 6, 3);
  CHECK(total == 216);
}

TEST_CASE("duplicate census of two two-point measures") {
  DiscreteMeasure m{{{0.0}, {2.0}}, {0.5, 0.5}};
  auto p = make_problem({m, m}, uniform_weights(2));
  auto census = oracle::enumerate_duplicates(p);
  REQUIRE(census.counts.size() == 3);
  std::vector<std::uint64_t> counts;
  for (const auto& [key, c] : census.counts) counts.push_back(c);
  CHECK(counts == std::vector<std::uint64_t>{1, 2, 1});
}

TEST_CASE("census agrees with the exact atlas") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto p = generate_grid(3, 3, 2, 0.7, seed);
    auto census = oracle::enumerate_duplicates(p);
    auto atlas = build_atlas_exact(p);
    REQUIRE(census.counts.size() == atlas.size());
    for (std::size_t j = 0; j < atlas.size(); ++j) {
      auto it = census.counts.find(census.key_of(atlas.support_points[j]));
      REQUIRE(it != census.counts.end());
      CHECK(it->second == atlas.multiplicity[j]);
    }
  }
}
