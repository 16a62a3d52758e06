#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wbary/measures.hpp"

using namespace wbary;

namespace {

bool mentions(const std::vector<Violation>& vs, const std::string& text) {
  for (const auto& v : vs)
    if (v.message.find(text) != std::string::npos) return true;
  return false;
}

Problem load_string(const std::string& s) {
  std::istringstream in(s);
  return load_problem(in, InputFormat::Json);
}

}  // namespace

TEST_CASE("valid measure has an empty report") {
  CHECK(validate_measure({{{0.0}, {2.0}}, {0.5, 0.5}}).empty());
}

TEST_CASE("mass sum violation names the sum") {
  auto vs = validate_measure({{{0.0}, {2.0}}, {0.5, 0.6}});
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].invariant == "normalized");
  CHECK(vs[0].message == "masses sum 1.1 ≠ 1");
}

TEST_CASE("duplicate points are reported with both indices") {
  auto vs = validate_measure({{{0.0}, {0.0}}, {0.5, 0.5}});
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].message == "duplicate support point at indices 0,1");
  CHECK(vs[0].indices == std::vector<std::size_t>{0, 1});
}

TEST_CASE("each invariant is caught by mutating a valid fixture") {
  const DiscreteMeasure good{{{0.0, 1.0}, {2.0, 3.0}, {4.0, 5.0}}, {0.25, 0.25, 0.5}};
  REQUIRE(validate_measure(good).empty());

  auto m = good;
  m.masses[1] = -0.25;
  m.masses[2] = 1.0;
  CHECK(mentions(validate_measure(m), "mass 1 is not positive"));

  m = good;
  m.masses[0] = 0.0;
  m.masses[2] = 0.75;
  CHECK(mentions(validate_measure(m), "mass 0 is not positive"));

  m = good;
  m.masses[2] = 0.5 + 1e-11;
  CHECK(mentions(validate_measure(m), "≠ 1"));

  m = good;
  m.masses[2] = 0.5 + 1e-13;
  CHECK(validate_measure(m).empty());

  m = good;
  m.points[1] = {2.0};
  CHECK(mentions(validate_measure(m), "dimension"));

  m = good;
  m.points[2] = m.points[0];
  CHECK(mentions(validate_measure(m), "duplicate support point at indices 0,2"));
}

TEST_CASE("uniform weights") {
  CHECK(uniform_weights(4) == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(uniform_weights(1) == std::vector<double>{1.0});
  auto w = uniform_weights(3);
  CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-15);
  CHECK_THROWS_AS(uniform_weights(0), std::invalid_argument);
}

TEST_CASE("json with omitted weights defaults to uniform") {
  auto p = load_string(R"({"measures": [{"points": [[0]], "masses": [1]}, {"points": [[1],[2]], "masses": [0.5,0.5]}]})");
  CHECK(p.n() == 2);
  CHECK(p.weights == std::vector<double>{0.5, 0.5});
  CHECK(p.dim() == 1);
}

TEST_CASE("json dimension mismatch is an invariant error") {
  CHECK_THROWS_WITH_AS(
      load_string(R"({"measures": [{"points": [[0,0]], "masses": [1]}, {"points": [[1,2,3]], "masses": [1]}]})"),
      doctest::Contains("dimension mismatch"), InvariantError);
}

TEST_CASE("json rejects malformed input and bad masses") {
  CHECK_THROWS_AS(load_string("{"), ParseError);
  CHECK_THROWS_AS(load_string(R"({"measures": 3})"), ParseError);
  CHECK_THROWS_AS(load_string(R"({"measures": [{"points": [[0]], "masses": [0]}, {"points": [[1]], "masses": [1]}]})"),
                  InvariantError);
  CHECK_THROWS_AS(
      load_string(R"({"measures": [{"points": [[0],[1]], "masses": [0.5,0.6]}, {"points": [[1]], "masses": [1]}]})"),
      InvariantError);
  CHECK_THROWS_AS(load_string(R"({"weights": [0.5], "measures": [{"points": [[0]], "masses": [1]}, {"points": [[1]], "masses": [1]}]})"),
                  WeightError);
}

TEST_CASE("json normalization is opt-in") {
  auto p = load_string(
      R"({"normalize": true, "measures": [{"points": [[0],[1]], "masses": [1,3]}, {"points": [[1]], "masses": [2]}]})");
  CHECK(p.measures[0].masses == std::vector<double>{0.25, 0.75});
  CHECK(p.measures[1].masses == std::vector<double>{1.0});
}

TEST_CASE("sums within the load band are accepted and tightened") {
  auto p = load_string(
      R"({"measures": [{"points": [[0],[1]], "masses": [0.3333333333, 0.6666666667]}, {"points": [[1]], "masses": [1]}]})");
  CHECK(std::abs(p.measures[0].masses[0] + p.measures[0].masses[1] - 1.0) <= 1e-12);
}

TEST_CASE("loading is deterministic") {
  const std::string s =
      R"({"measures": [{"points": [[0.1,2],[3,4]], "masses": [0.2,0.8]}, {"points": [[1,1]], "masses": [1]}]})";
  auto a = load_string(s);
  auto b = load_string(s);
  CHECK(a.measures[0].points == b.measures[0].points);
  CHECK(a.measures[0].masses == b.measures[0].masses);
}

TEST_CASE("grid csv keeps nonzero cells") {
  std::ifstream f(WBARY_TEST_DATA "/raster16.csv");
  REQUIRE(f.good());
  auto gm = load_grid_csv_measure(f);
  CHECK(gm.measure.size() == 3);
  CHECK(gm.measure.dim() == 2);
  CHECK(gm.grid.side == 16);
  CHECK(gm.measure.points[0] == Point{0.0, 0.0});
  CHECK(gm.measure.points[2] == Point{15.0, 15.0});
}

TEST_CASE("grid csv problems carry the lattice") {
  std::ifstream a(WBARY_TEST_DATA "/raster16.csv"), b(WBARY_TEST_DATA "/raster16.csv");
  std::istream* srcs[] = {&a, &b};
  auto p = load_problem(srcs, InputFormat::GridCsv);
  REQUIRE(p.grid.has_value());
  CHECK(p.grid->side == 16);
  CHECK(p.weights == std::vector<double>{0.5, 0.5});
}

TEST_CASE("grid csv errors") {
  auto load = [](const std::string& s) {
    std::istringstream in(s);
    return load_grid_csv_measure(in);
  };
  CHECK_THROWS_AS(load(""), ParseError);
  CHECK_THROWS_AS(load("4,2,0,0\n"), ParseError);
  CHECK_THROWS_AS(load("4,2,0,0,1\n5,1,1\n"), ParseError);
  CHECK_THROWS_AS(load("4,2,0,0,1\n1,1,x\n"), ParseError);
  CHECK_THROWS_AS(load("4,2,0,0,1\n1,1,-1\n2,2,2\n"), InvariantError);
  CHECK_THROWS_AS(load("4,2,0,0,1\n1,1,0.5\n1,1,0.5\n"), InvariantError);
  CHECK_THROWS_AS(load("4,2,0,0,1\n1,1,0\n"), InvariantError);
}

TEST_CASE("grid cell lookup") {
  GridSpec g{2, 4, {1.0, -1.0}, 0.5};
  CHECK(g.cell_of({1.0, -1.0}) == std::vector<long>{1, 1});
  CHECK(g.cell_of({2.5, 0.5}) == std::vector<long>{4, 4});
  CHECK_FALSE(g.cell_of({1.25, -1.0}));
  CHECK_FALSE(g.cell_of({3.0, -1.0}));
  long cell[] = {2, 3};
  CHECK(g.point_at(cell) == Point{1.5, 0.0});
  CHECK(g.num_cells() == 16);
}

TEST_CASE("problem invariants") {
  DiscreteMeasure m{{{0.0}}, {1.0}};
  CHECK_THROWS_AS(make_problem({m}, {1.0}), InvariantError);
  CHECK_THROWS_AS(make_problem({m, m}, {0.5, 0.6}), InvariantError);
  CHECK_THROWS_AS(make_problem({m, m}, {1.0, 0.0}), InvariantError);
  CHECK_NOTHROW(make_problem({m, m}, {0.25, 0.75}));
}

TEST_CASE("problem json round-trips with its lattice") {
  Problem p = make_problem({{{{0.0, 1.0}, {2.0, 1.0}}, {0.25, 0.75}}, {{{1.0, 1.0}}, {1.0}}}, {0.4, 0.6});
  p.grid = GridSpec{2, 3, {0.0, 1.0}, 1.0};
  std::stringstream s;
  write_problem_json(s, p);
  auto q = load_problem(s, InputFormat::Json);
  CHECK(q.weights == p.weights);
  CHECK(q.measures[0].points == p.measures[0].points);
  CHECK(q.measures[0].masses == p.measures[0].masses);
  REQUIRE(q.grid.has_value());
  CHECK(q.grid->side == 3);
  CHECK(q.grid->origin == Point{0.0, 1.0});

  CHECK_THROWS_AS(
      load_string(
          R"({"grid": {"side": 2, "origin": [0], "step": 1}, "measures": [{"points": [[0.5]], "masses": [1]}, {"points": [[1]], "masses": [1]}]})"),
      InvariantError);
}
