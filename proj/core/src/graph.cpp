#include "crl/graph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace crl {

Dag::Dag(int n) : n_(n), adj_(BoolMat::Constant(n, n, false)) {
  if (n < 0) throw std::invalid_argument("Dag: negative node count");
}

Dag::Dag(int n, const std::vector<std::pair<int, int>>& edges) : Dag(n) {
  for (auto [from, to] : edges) {
    if (from < 0 || from >= n || to < 0 || to >= n) throw std::invalid_argument("Dag: edge endpoint out of range");
    if (from == to) throw std::invalid_argument("Dag: self-loop");
    adj_(to, from) = true;
  }
  if (!is_acyclic(adj_)) throw std::invalid_argument("Dag: edges contain a cycle");
}

Dag Dag::from_adjacency(const BoolMat& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw std::invalid_argument("Dag: adjacency must be square");
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
    if (adjacency(i, i)) throw std::invalid_argument("Dag: self-loop at node " + std::to_string(i));
  if (!is_acyclic(adjacency)) throw std::invalid_argument("Dag: adjacency contains a cycle");
  Dag g(static_cast<int>(adjacency.rows()));
  g.adj_ = adjacency;
  return g;
}

int Dag::edge_count() const {
  int c = 0;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) c += adj_(i, j) ? 1 : 0;
  return c;
}

std::vector<std::pair<int, int>> Dag::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int from = 0; from < n_; ++from)
    for (int to = 0; to < n_; ++to)
      if (adj_(to, from)) out.emplace_back(from, to);
  return out;
}

std::vector<int> Dag::parents(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j)
    if (adj_(i, j)) out.push_back(j);
  return out;
}

std::vector<int> Dag::children(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j)
    if (adj_(j, i)) out.push_back(j);
  return out;
}

std::vector<int> Dag::ancestors(int i) const {
  Dag tc = transitive_closure(*this);
  return tc.parents(i);
}

std::vector<int> Dag::descendants(int i) const {
  Dag tc = transitive_closure(*this);
  return tc.children(i);
}

std::vector<int> Dag::topological_order() const {
  std::vector<int> indeg(n_, 0);
  for (int i = 0; i < n_; ++i) indeg[i] = static_cast<int>(parents(i).size());
  std::vector<int> order;
  std::vector<bool> done(n_, false);
  while (static_cast<int>(order.size()) < n_) {
    int pick = -1;
    for (int i = 0; i < n_; ++i)
      if (!done[i] && indeg[i] == 0) {
        pick = i;
        break;
      }
    if (pick < 0) throw std::logic_error("Dag: cycle detected in topological_order");
    done[pick] = true;
    order.push_back(pick);
    for (int c : children(pick)) --indeg[c];
  }
  return order;
}

bool is_acyclic(const BoolMat& adjacency) {
  const int n = static_cast<int>(adjacency.rows());
  std::vector<int> indeg(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) indeg[i] += adjacency(i, j) ? 1 : 0;
  std::vector<int> stack;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0) stack.push_back(i);
  int seen = 0;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    ++seen;
    for (int c = 0; c < n; ++c)
      if (adjacency(c, v) && --indeg[c] == 0) stack.push_back(c);
  }
  return seen == n;
}

bool is_causal_order(const Dag& g, const std::vector<int>& order) {
  if (!is_permutation(order, g.size())) return false;
  std::vector<int> pos(g.size());
  for (int k = 0; k < g.size(); ++k) pos[order[k]] = k;
  for (auto [from, to] : g.edges())
    if (pos[from] >= pos[to]) return false;
  return true;
}

Dag relabel(const Dag& g, const Permutation& perm) {
  if (!is_permutation(perm, g.size())) throw std::invalid_argument("relabel: not a permutation");
  BoolMat adj = BoolMat::Constant(g.size(), g.size(), false);
  for (auto [from, to] : g.edges()) adj(perm[to], perm[from]) = true;
  return Dag::from_adjacency(adj);
}

Dag sample_erdos_renyi(int n, double density, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_erdos_renyi: n must be >= 1");
  if (!(density >= 0.0 && density <= 1.0)) throw std::invalid_argument("sample_erdos_renyi: density must lie in [0,1]");
  Permutation order = random_permutation(n, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BoolMat adj = BoolMat::Constant(n, n, false);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < b; ++a)
      if (u(rng) < density) adj(order[b], order[a]) = true;
  // relabel so that the node at position k of the order becomes node k
  return relabel(Dag::from_adjacency(adj), inverse_permutation(order));
}

Dag transitive_closure(const Dag& g) {
  const int n = g.size();
  BoolMat r = g.adjacency();
  // Warshall on "j is an ancestor of i"
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (r(i, k))
        for (int j = 0; j < n; ++j)
          if (r(k, j)) r(i, j) = true;
  return Dag::from_adjacency(r);
}

Dag transitive_reduction(const Dag& g) {
  const int n = g.size();
  const BoolMat tc = transitive_closure(g).adjacency();
  BoolMat red = tc;
  // j -> i is redundant when some k has j -> ... -> k -> ... -> i
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!tc(i, j)) continue;
      for (int k = 0; k < n; ++k)
        if (k != i && k != j && tc(i, k) && tc(k, j)) {
          red(i, j) = false;
          break;
        }
    }
  return Dag::from_adjacency(red);
}

SurroundedSets surrounded_sets(const Dag& g) {
  const int n = g.size();
  SurroundedSets out;
  out.sur.resize(n);
  const BoolMat& a = g.adjacency();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      // Ch(i) + {i} subset of Ch(j)
      bool ok = a(i, j);
      for (int c = 0; ok && c < n; ++c)
        if (a(c, i) && !a(c, j)) ok = false;
      if (ok) out.sur[i].push_back(j);
    }
    if (!out.sur[i].empty()) out.surrounded.push_back(i);
  }
  return out;
}

RelationMatrices relation_matrices(const Dag& g) {
  const int n = g.size();
  RelationMatrices r;
  BoolMat eye = BoolMat::Constant(n, n, false);
  for (int i = 0; i < n; ++i) eye(i, i) = true;
  r.pa = g.adjacency().array() || eye.array();
  r.an = transitive_closure(g).adjacency().array() || eye.array();
  r.sur = eye;
  const BoolMat& a = g.adjacency();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      // Ch+(i) subset of Ch+(j)
      bool ok = a(i, j);
      for (int c = 0; ok && c < n; ++c)
        if (a(c, i) && !(a(c, j) || c == j)) ok = false;
      r.sur(i, j) = ok;
    }
  return r;
}

namespace {

struct IsoSearch {
  const BoolMat& a1;
  const BoolMat& a2;
  int n;
  std::vector<int> in1, out1, in2, out2;
  Permutation perm;  // node of g2 -> node of g1
  std::vector<bool> used;

  bool extend(int k) {
    if (k == n) return true;
    for (int cand = 0; cand < n; ++cand) {
      if (used[cand] || in1[cand] != in2[k] || out1[cand] != out2[k]) continue;
      bool ok = true;
      for (int j = 0; j < k && ok; ++j) {
        if (a2(k, j) != a1(cand, perm[j]) || a2(j, k) != a1(perm[j], cand)) ok = false;
      }
      if (!ok) continue;
      used[cand] = true;
      perm[k] = cand;
      if (extend(k + 1)) return true;
      used[cand] = false;
    }
    return false;
  }
};

}  // namespace

std::optional<Permutation> isomorphic_under_permutation(const Dag& g1, const Dag& g2) {
  if (g1.size() != g2.size()) throw std::invalid_argument("isomorphic_under_permutation: size mismatch");
  const int n = g1.size();
  if (n > kMaxIsomorphismNodes)
    throw std::length_error("isomorphic_under_permutation: n=" + std::to_string(n) + " exceeds the exhaustive-search limit of " +
                            std::to_string(kMaxIsomorphismNodes));
  IsoSearch s{g1.adjacency(), g2.adjacency(), n, {}, {}, {}, {}, Permutation(n, -1), std::vector<bool>(n, false)};
  auto degrees = [n](const BoolMat& a, std::vector<int>& in, std::vector<int>& out) {
    in.assign(n, 0);
    out.assign(n, 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (a(i, j)) {
          ++in[i];
          ++out[j];
        }
  };
  degrees(s.a1, s.in1, s.out1);
  degrees(s.a2, s.in2, s.out2);
  if (g1.edge_count() != g2.edge_count()) return std::nullopt;
  auto sorted_pairs = [n](const std::vector<int>& in, const std::vector<int>& out) {
    std::vector<std::pair<int, int>> p(n);
    for (int i = 0; i < n; ++i) p[i] = {in[i], out[i]};
    std::sort(p.begin(), p.end());
    return p;
  };
  if (sorted_pairs(s.in1, s.out1) != sorted_pairs(s.in2, s.out2)) return std::nullopt;
  if (!s.extend(0)) return std::nullopt;
  return s.perm;
}

Dag orient_by_ancestor_counts(const BoolMat& raw_parents) {
  const int n = static_cast<int>(raw_parents.rows());
  // reachability of the raw relation, which may contain cycles
  BoolMat reach = raw_parents;
  for (int i = 0; i < n; ++i) reach(i, i) = false;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (reach(i, k))
        for (int j = 0; j < n; ++j)
          if (reach(k, j)) reach(i, j) = true;
  std::vector<int> count(n, 0);
  for (int m = 0; m < n; ++m)
    for (int j = 0; j < n; ++j)
      if (j != m && reach(m, j)) ++count[m];
  std::vector<int> order = identity_permutation(n);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return count[a] < count[b]; });
  std::vector<int> pos(n);
  for (int k = 0; k < n; ++k) pos[order[k]] = k;
  BoolMat adj = BoolMat::Constant(n, n, false);
  for (int m = 0; m < n; ++m)
    for (int j = 0; j < n; ++j)
      if (j != m && raw_parents(m, j) && pos[j] < pos[m]) adj(m, j) = true;
  return Dag::from_adjacency(adj);
}

}  // namespace crl
