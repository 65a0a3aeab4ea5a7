#pragma once

#include <cstdint>
#include <random>

#include "crl/types.hpp"

namespace crl {

using Rng = std::mt19937_64;

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x);

// Child seed for (parent, index). Used for per-graph and per-stream seeds so
// that every stream is reproducible on its own.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

Rng make_rng(std::uint64_t seed);

double standard_normal(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
// Unif(±[lo, hi])
double signed_uniform(Rng& rng, double lo, double hi);

Mat standard_normal_matrix(int rows, int cols, Rng& rng);
Vec random_unit_vector(int n, Rng& rng);
Permutation random_permutation(int n, Rng& rng);

}  // namespace crl
