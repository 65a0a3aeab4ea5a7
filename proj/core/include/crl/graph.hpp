#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "crl/rng.hpp"
#include "crl/types.hpp"

namespace crl {

// Directed acyclic graph over nodes 0..n-1.
// Convention: adjacency(i, j) == true iff j is a parent of i (edge j -> i).
class Dag {
 public:
  Dag() = default;
  explicit Dag(int n);
  // edges as (from, to) pairs
  Dag(int n, const std::vector<std::pair<int, int>>& edges);

  // Throws std::invalid_argument on self-loops or cycles.
  static Dag from_adjacency(const BoolMat& adjacency);

  int size() const { return n_; }
  const BoolMat& adjacency() const { return adj_; }
  bool has_edge(int from, int to) const { return adj_(to, from); }
  int edge_count() const;
  std::vector<std::pair<int, int>> edges() const;

  std::vector<int> parents(int i) const;
  std::vector<int> children(int i) const;
  std::vector<int> ancestors(int i) const;
  std::vector<int> descendants(int i) const;

  // Deterministic topological order (smallest available index first).
  std::vector<int> topological_order() const;

  bool operator==(const Dag& other) const { return n_ == other.n_ && adj_ == other.adj_; }
  bool operator!=(const Dag& other) const { return !(*this == other); }

 private:
  int n_ = 0;
  BoolMat adj_;
};

bool is_acyclic(const BoolMat& adjacency);
bool is_causal_order(const Dag& g, const std::vector<int>& order);

// Node i of g becomes node perm[i] of the result.
Dag relabel(const Dag& g, const Permutation& perm);

Dag sample_erdos_renyi(int n, double density, Rng& rng);

Dag transitive_closure(const Dag& g);
Dag transitive_reduction(const Dag& g);

struct SurroundedSets {
  std::vector<std::vector<int>> sur;  // sur[i], ascending
  std::vector<int> surrounded;        // nodes with nonempty sur
};
SurroundedSets surrounded_sets(const Dag& g);

struct RelationMatrices {
  BoolMat pa;   // (i,j) iff j in Pa(i) or j == i
  BoolMat an;   // (i,j) iff j in An(i) or j == i
  BoolMat sur;  // (i,j) iff Ch(i)+{i} subset of Ch(j)+{j}, or i == j
};
RelationMatrices relation_matrices(const Dag& g);

// Returns perm with g1 == relabel(g2, perm) if the graphs are isomorphic.
// Exhaustive backtracking with degree pruning; throws std::length_error for n > 10.
std::optional<Permutation> isomorphic_under_permutation(const Dag& g1, const Dag& g2);

inline constexpr int kMaxIsomorphismNodes = 10;

// raw_parents(m, j): j was estimated as a parent of m (cycles allowed).
// Nodes are sorted by their ancestor counts under the raw relation (ties by
// index) and edge j -> m is kept only if j precedes m.
Dag orient_by_ancestor_counts(const BoolMat& raw_parents);

}  // namespace crl
