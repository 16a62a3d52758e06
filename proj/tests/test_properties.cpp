#include <doctest.h>

#include <cmath>

#include "wbary/barycenter.hpp"
#include "wbary/generators.hpp"
#include "wbary/oracle.hpp"

using namespace wbary;

namespace {

struct Outcome {
  double objective;
  BarycenterSolution barycenter;
};

Outcome run(const LpModel& m, const Problem& p, const SupportAtlas* atlas) {
  SolveOptions opts;
  opts.pivot_rule = PivotRule::Dantzig;
  auto sol = solve(m, opts);
  REQUIRE(sol.status == SolveStatus::Optimal);
  return {sol.objective, extract_barycenter(sol, m, p, atlas)};
}

void check_all_formulations(const Problem& p, const SupportAtlas& atlas) {
  auto orig = run(build_original(atlas, p), p, &atlas);
  auto red = run(build_reduced(atlas, p), p, &atlas);
  auto gen = run(build_general(p), p, &atlas);
  auto hyb = run(build_hybrid(atlas, hybrid_split(atlas, p), p), p, &atlas);
  CHECK(std::abs(orig.objective - red.objective) <= 1e-8);
  CHECK(std::abs(orig.objective - gen.objective) <= 1e-8);
  CHECK(std::abs(orig.objective - hyb.objective) <= 1e-8);
  if (p.n() == 2) CHECK(std::abs(orig.objective - run(build_transportation(p), p, nullptr).objective) <= 1e-8);
  for (const auto* o : {&orig, &red, &gen, &hyb}) {
    const auto& v = o->barycenter.verification;
    CHECK(v.passed());
    CHECK(v.sparse);
  }
  for (const auto* o : {&orig, &red, &hyb}) CHECK(o->barycenter.verification.non_mass_splitting);
}

}  // namespace

TEST_CASE("all formulations agree on general-position instances") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    std::size_t n = 2 + seed % 2, pp = 2 + seed % 3;
    CAPTURE(seed);
    auto p = generate_general(n, pp, 1 + seed % 2, seed);
    check_all_formulations(p, build_atlas_exact(p));
  }
}

TEST_CASE("all formulations agree on sparse and full grids") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    CAPTURE(seed);
    auto sparse = generate_grid(3, 3, 2, 0.5, seed);
    check_all_formulations(sparse, build_atlas_exact(sparse));
  }
  auto full = generate_grid(2, 4, 2, 1.0, 3);
  check_all_formulations(full, build_atlas_grid(full, *full.grid));
}

TEST_CASE("simplex agrees with basis enumeration on in-cap models") {
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto p = generate_grid(2, 2, 1, 0.8, seed);
    auto atlas = build_atlas_exact(p);
    for (const auto& m : {build_general(p), build_reduced(atlas, p), build_original(atlas, p)}) {
      if (m.num_vars() > 14 || m.num_constraints() > 9) continue;
      auto ref = oracle::basis_enumeration_solve(m);
      REQUIRE(ref.status == oracle::OracleStatus::Optimal);
      for (auto rule : {PivotRule::Bland, PivotRule::Dantzig}) {
        SolveOptions opts;
        opts.pivot_rule = rule;
        auto sol = solve(m, opts);
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(std::abs(sol.objective - ref.value) <= 1e-9);
      }
      ++checked;
    }
  }
  CHECK(checked >= 40);
}

TEST_CASE("mixed instance: hybrid is smaller and equally good") {
  auto p = generate_mixed(3, 3, 2, 5);
  auto atlas = build_atlas_exact(p);
  auto split = hybrid_split(atlas, p);
  auto h = build_hybrid(atlas, split, p);
  auto r = build_reduced(atlas, p);
  auto g = build_general(p);
  CHECK(h.num_vars() < r.num_vars());
  CHECK(h.num_vars() < g.num_vars());
  auto oh = run(h, p, &atlas), orr = run(r, p, &atlas), og = run(g, p, &atlas);
  CHECK(std::abs(oh.objective - orr.objective) <= 1e-8);
  CHECK(std::abs(oh.objective - og.objective) <= 1e-8);
}
