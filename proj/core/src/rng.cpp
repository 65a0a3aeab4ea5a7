#include "crl/rng.hpp"

#include <algorithm>
#include <numeric>

namespace crl {

Permutation identity_permutation(int n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

Permutation inverse_permutation(const Permutation& p) {
  Permutation inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
  return inv;
}

bool is_permutation(const Permutation& p, int n) {
  if (static_cast<int>(p.size()) != n) return false;
  std::vector<bool> seen(n, false);
  for (int v : p) {
    if (v < 0 || v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

double signed_uniform(Rng& rng, double lo, double hi) {
  double mag = uniform(rng, lo, hi);
  std::bernoulli_distribution coin(0.5);
  return coin(rng) ? mag : -mag;
}

Mat standard_normal_matrix(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat m(rows, cols);
  // fill row by row so results do not depend on storage order
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

Vec random_unit_vector(int n, Rng& rng) {
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = standard_normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

Permutation random_permutation(int n, Rng& rng) {
  Permutation p = identity_permutation(n);
  // Fisher-Yates with an explicit uniform draw; std::shuffle is not
  // specified identically across standard libraries
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(p[i], p[pick(rng)]);
  }
  return p;
}

}  // namespace crl
