#include <gtest/gtest.h>

#include <algorithm>
#include <stdexcept>

#include "crl/graph.hpp"
#include "crl/rng.hpp"

namespace crl {
namespace {

Dag chain(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return Dag(n, e);
}

TEST(Dag, EdgeConventionIsChildRowParentColumn) {
  Dag g(3, {{0, 2}, {1, 2}});
  EXPECT_TRUE(g.adjacency()(2, 0));
  EXPECT_TRUE(g.has_edge(0, 2));
  EXPECT_FALSE(g.has_edge(2, 0));
  EXPECT_EQ(g.parents(2), (std::vector<int>{0, 1}));
  EXPECT_EQ(g.children(0), (std::vector<int>{2}));
  EXPECT_EQ(g.edge_count(), 2);
}

TEST(Dag, RejectsCyclesAndSelfLoops) {
  BoolMat a = BoolMat::Constant(3, 3, false);
  a(1, 0) = a(2, 1) = a(0, 2) = true;
  EXPECT_THROW(Dag::from_adjacency(a), std::invalid_argument);
  BoolMat s = BoolMat::Constant(2, 2, false);
  s(1, 1) = true;
  EXPECT_THROW(Dag::from_adjacency(s), std::invalid_argument);
}

TEST(Dag, AncestorsAndDescendantsOfChain) {
  Dag g = chain(4);
  EXPECT_EQ(g.ancestors(3), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(g.descendants(1), (std::vector<int>{2, 3}));
  EXPECT_TRUE(g.ancestors(0).empty());
}

TEST(Dag, TopologicalOrderIsCausal) {
  Dag g(5, {{4, 0}, {3, 1}, {0, 2}, {1, 2}});
  std::vector<int> order = g.topological_order();
  EXPECT_TRUE(is_causal_order(g, order));
  EXPECT_EQ(order, (std::vector<int>{3, 1, 4, 0, 2}));
}

TEST(TransitiveClosure, ChainGainsAllForwardEdges) {
  Dag tc = transitive_closure(chain(4));
  EXPECT_EQ(tc.edge_count(), 6);
  EXPECT_TRUE(tc.has_edge(0, 3));
  EXPECT_EQ(transitive_reduction(tc), chain(4));
}

TEST(TransitiveClosure, DiamondReductionDropsShortcut) {
  Dag g(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}});
  Dag r = transitive_reduction(g);
  EXPECT_FALSE(r.has_edge(0, 3));
  EXPECT_EQ(r.edge_count(), 4);
}

TEST(Relabel, MovesNodesToTheirImages) {
  Dag g(3, {{0, 1}});
  Dag r = relabel(g, {2, 0, 1});
  EXPECT_TRUE(r.has_edge(2, 0));
  EXPECT_EQ(r.edge_count(), 1);
}

TEST(ErdosRenyi, IdentityIsACausalOrder) {
  Rng rng = make_rng(11);
  for (int t = 0; t < 50; ++t) {
    Dag g = sample_erdos_renyi(7, 0.5, rng);
    EXPECT_TRUE(is_causal_order(g, identity_permutation(7)));
  }
}

TEST(ErdosRenyi, EdgeFrequencyMatchesDensity) {
  // each of the n(n-1)/2 forward pairs is an edge with probability density
  Rng rng = make_rng(3);
  const int n = 6, trials = 4000;
  const double p = 0.3;
  double edges = 0.0;
  for (int t = 0; t < trials; ++t) edges += sample_erdos_renyi(n, p, rng).edge_count();
  const double pairs = n * (n - 1) / 2.0;
  const double mean = edges / trials;
  const double sd = std::sqrt(pairs * p * (1 - p) / trials);
  EXPECT_NEAR(mean, pairs * p, 5.0 * sd);
}

TEST(ErdosRenyi, ExtremeDensities) {
  Rng rng = make_rng(5);
  EXPECT_EQ(sample_erdos_renyi(5, 0.0, rng).edge_count(), 0);
  EXPECT_EQ(sample_erdos_renyi(5, 1.0, rng).edge_count(), 10);
  EXPECT_THROW(sample_erdos_renyi(5, 1.5, rng), std::invalid_argument);
}

TEST(SurroundedSets, HandWorkedTriangle) {
  // 0 -> 1 -> 2 and 0 -> 2: Ch(1)={2} is inside Ch(0)={1,2}; the leaf 2 is
  // surrounded by both parents.
  Dag g(3, {{0, 1}, {1, 2}, {0, 2}});
  SurroundedSets s = surrounded_sets(g);
  EXPECT_EQ(s.sur[0], std::vector<int>{});
  EXPECT_EQ(s.sur[1], std::vector<int>{0});
  EXPECT_EQ(s.sur[2], (std::vector<int>{0, 1}));
  EXPECT_EQ(s.surrounded, (std::vector<int>{1, 2}));
}

TEST(SurroundedSets, ParentWithOtherChildDoesNotSurround) {
  // 0 -> 1, 1 -> 2, 0 -> 3: Ch(1)={2} is not inside Ch(0)={1,3}
  Dag g(4, {{0, 1}, {1, 2}, {0, 3}});
  SurroundedSets s = surrounded_sets(g);
  EXPECT_TRUE(s.sur[1].empty());
  EXPECT_EQ(s.sur[2], std::vector<int>{1});
}

TEST(RelationMatrices, DiagonalAlwaysSet) {
  Dag g = chain(3);
  RelationMatrices r = relation_matrices(g);
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(r.pa(i, i));
    EXPECT_TRUE(r.an(i, i));
    EXPECT_TRUE(r.sur(i, i));
  }
  EXPECT_TRUE(r.an(2, 0));
  EXPECT_FALSE(r.pa(2, 0));
}

TEST(Isomorphism, RecoversRandomRelabeling) {
  Rng rng = make_rng(17);
  for (int t = 0; t < 20; ++t) {
    Dag g = sample_erdos_renyi(6, 0.5, rng);
    Permutation p = random_permutation(6, rng);
    Dag h = relabel(g, p);
    auto found = isomorphic_under_permutation(h, g);
    ASSERT_TRUE(found.has_value());
    EXPECT_EQ(relabel(g, *found), h);
  }
}

TEST(Isomorphism, DistinguishesEdgeCounts) {
  EXPECT_FALSE(isomorphic_under_permutation(chain(3), Dag(3)).has_value());
}

TEST(OrientByAncestorCounts, TwoCycleKeepsLowerIndexAsParent) {
  BoolMat raw = BoolMat::Constant(2, 2, false);
  raw(0, 1) = raw(1, 0) = true;
  Dag g = orient_by_ancestor_counts(raw);
  EXPECT_EQ(g.edge_count(), 1);
  EXPECT_TRUE(g.has_edge(0, 1));
}

TEST(OrientByAncestorCounts, AcyclicInputKeepsItsClosure) {
  // raw parents of a permuted chain 2 -> 0 -> 1 plus the transitive edge
  BoolMat raw = BoolMat::Constant(3, 3, false);
  raw(0, 2) = raw(1, 0) = raw(1, 2) = true;
  Dag g = orient_by_ancestor_counts(raw);
  EXPECT_TRUE(g.has_edge(2, 0));
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(2, 1));
}

TEST(Permutations, InverseComposesToIdentity) {
  Rng rng = make_rng(2);
  Permutation p = random_permutation(8, rng);
  Permutation q = inverse_permutation(p);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(q[p[i]], i);
  EXPECT_TRUE(is_permutation(p, 8));
  EXPECT_FALSE(is_permutation({0, 0, 1}, 3));
}

}  // namespace
}  // namespace crl
