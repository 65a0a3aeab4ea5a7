#include "crl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crl/linalg.hpp"

namespace crl {

Permutation max_weight_assignment(const Mat& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("max_weight_assignment: matrix must be square");
  const int n = static_cast<int>(w.rows());
  if (n == 0) return {};
  // Hungarian algorithm with potentials on cost = -w (1-based internals)
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = -w(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  Permutation assign(n);
  for (int j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

Permutation max_weight_assignment_exhaustive(const Mat& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("max_weight_assignment_exhaustive: matrix must be square");
  const int n = static_cast<int>(w.rows());
  if (n > 9) throw std::length_error("max_weight_assignment_exhaustive: n too large");
  Permutation p = identity_permutation(n), best = p;
  double best_val = -std::numeric_limits<double>::infinity();
  do {
    double val = 0.0;
    for (int i = 0; i < n; ++i) val += w(i, p[i]);
    if (val > best_val) {
      best_val = val;
      best = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

MccResult mcc(const Mat& z, const Mat& z_hat) {
  if (z.rows() != z_hat.rows() || z.cols() != z_hat.cols()) throw std::invalid_argument("mcc: shape mismatch");
  if (z.rows() < 2) throw std::invalid_argument("mcc: need at least 2 samples");
  Mat c = linalg::abs_correlation(z, z_hat);
  MccResult r;
  r.perm = max_weight_assignment(c);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < c.rows(); ++i) acc += c(i, r.perm[i]);
  r.value = acc / static_cast<double>(c.rows());
  return r;
}

int shd(const Dag& truth, const Dag& est) { return shd(truth, est, identity_permutation(truth.size())); }

int shd(const Dag& truth, const Dag& est, const Permutation& perm) {
  if (truth.size() != est.size()) throw std::invalid_argument("shd: size mismatch");
  if (!is_permutation(perm, truth.size())) throw std::invalid_argument("shd: invalid permutation");
  const int n = truth.size();
  int count = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      bool t_ab = truth.has_edge(a, b), t_ba = truth.has_edge(b, a);
      bool e_ab = est.has_edge(perm[a], perm[b]), e_ba = est.has_edge(perm[b], perm[a]);
      if (t_ab != e_ab || t_ba != e_ba) ++count;
    }
  return count;
}

TransformErrors effective_transform_errors(const Mat& h, const Mat& g, const Dag& dag, const Permutation& perm) {
  if (h.cols() != g.rows()) throw std::invalid_argument("effective_transform_errors: H and G shapes incompatible");
  return effective_transform_errors(h * g, dag, perm);
}

TransformErrors effective_transform_errors(const Mat& hg, const Dag& dag, const Permutation& perm) {
  const int n = dag.size();
  if (hg.rows() != n || hg.cols() != n) throw std::invalid_argument("effective_transform_errors: H G must be n x n");
  if (!is_permutation(perm, n)) throw std::invalid_argument("effective_transform_errors: invalid permutation");
  Mat c(n, n);
  for (int i = 0; i < n; ++i) {
    c.row(i) = hg.row(perm[i]);
    double diag = c(i, i);
    if (diag != 0.0) c.row(i) /= diag;
  }
  RelationMatrices rel = relation_matrices(dag);
  Mat off_pa = c, off_sur = c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (rel.pa(i, j)) off_pa(i, j) = 0.0;
      if (rel.sur(i, j)) off_sur(i, j) = 0.0;
    }
  TransformErrors e;
  e.l_scale = linalg::spectral_norm(c - Mat::Identity(n, n));
  e.l_pa = linalg::spectral_norm(off_pa);
  e.l_sur = linalg::spectral_norm(off_sur);
  return e;
}

double normalized_latent_error(const Mat& z, const Mat& z_hat) {
  return normalized_latent_error(z, z_hat, mcc(z, z_hat).perm);
}

double normalized_latent_error(const Mat& z, const Mat& z_hat, const Permutation& perm) {
  if (z.rows() != z_hat.rows() || z.cols() != z_hat.cols()) throw std::invalid_argument("normalized_latent_error: shape mismatch");
  double denom = z.norm();
  if (!(denom > 0.0)) throw std::domain_error("normalized_latent_error: Z has zero norm");
  double err2 = 0.0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const auto zi = z.col(i);
    const auto hi = z_hat.col(perm[i]);
    double hh = hi.squaredNorm();
    double a = hh > 0.0 ? zi.dot(hi) / hh : 0.0;
    err2 += (zi - a * hi).squaredNorm();
  }
  return std::sqrt(err2) / denom;
}

}  // namespace crl
