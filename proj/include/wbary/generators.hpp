#pragma once

#include <cstdint>

#include "wbary/measures.hpp"

namespace wbary {

/// n measures of p random points in [0,1)^d with random masses; uniform weights.
Problem generate_general(std::size_t n, std::size_t p, std::size_t d, std::uint64_t seed);

/// n measures on the K^d unit lattice starting at the origin. Each cell is
/// kept with probability `density` (at least one per measure); density 1
/// gives full grids. Uniform weights; the lattice is attached as metadata.
Problem generate_grid(std::size_t n, std::size_t K, std::size_t d, double density, std::uint64_t seed);

/// n measures sharing the full K×K unit lattice, each with `extra` further
/// points in general position outside it. Random masses, uniform weights.
Problem generate_mixed(std::size_t n, std::size_t K, std::size_t extra, std::uint64_t seed);

}  // namespace wbary
