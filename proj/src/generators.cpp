#include "wbary/generators.hpp"

#include <random>

namespace wbary {

namespace {

std::vector<double> random_masses(std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> m(count);
  double total = 0.0;
  for (double& v : m) total += (v = u(rng));
  for (double& v : m) v /= total;
  return m;
}

}  // namespace

Problem generate_general(std::size_t n, std::size_t p, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DiscreteMeasure> ms(n);
  for (auto& m : ms) {
    m.points.assign(p, Point(d));
    for (auto& x : m.points)
      for (double& c : x) c = u(rng);
    m.masses = random_masses(p, rng);
  }
  return make_problem(std::move(ms), uniform_weights(n));
}

Problem generate_grid(std::size_t n, std::size_t K, std::size_t d, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  GridSpec g{d, static_cast<long>(K), Point(d, 0.0), 1.0};
  const std::size_t cells = g.num_cells();
  std::vector<DiscreteMeasure> ms(n);
  std::vector<long> cell(d);
  for (auto& m : ms) {
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < cells; ++c)
      if (density >= 1.0 || keep(rng)) chosen.push_back(c);
    if (chosen.empty()) chosen.push_back(std::uniform_int_distribution<std::size_t>(0, cells - 1)(rng));
    for (std::size_t c : chosen) {
      std::size_t rest = c;
      for (std::size_t l = d; l-- > 0;) {
        cell[l] = static_cast<long>(rest % K) + 1;
        rest /= K;
      }
      m.points.push_back(g.point_at(cell));
    }
    m.masses = random_masses(chosen.size(), rng);
  }
  Problem p = make_problem(std::move(ms), uniform_weights(n));
  p.grid = g;
  return p;
}

Problem generate_mixed(std::size_t n, std::size_t K, std::size_t extra, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Far enough from the lattice that no mean of extra points lands back on it.
  std::uniform_real_distribution<double> away(static_cast<double>(K) + 1.0, 2.0 * static_cast<double>(K) + 1.0);
  std::vector<DiscreteMeasure> ms(n);
  for (auto& m : ms) {
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = 0; b < K; ++b) m.points.push_back({static_cast<double>(a), static_cast<double>(b)});
    for (std::size_t e = 0; e < extra; ++e) m.points.push_back({away(rng), away(rng)});
    m.masses = random_masses(m.points.size(), rng);
  }
  return make_problem(std::move(ms), uniform_weights(n));
}

}  // namespace wbary
