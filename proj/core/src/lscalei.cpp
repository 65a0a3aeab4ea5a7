#include "crl/lscalei.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "crl/linalg.hpp"

namespace crl::lscalei {

std::vector<Mat> compute_correlations(const std::vector<Mat>& diffs) {
  if (diffs.empty()) throw std::invalid_argument("compute_correlations: empty dataset");
  std::vector<Mat> out;
  out.reserve(diffs.size());
  for (const Mat& d : diffs) {
    if (d.rows() == 0) throw std::invalid_argument("compute_correlations: empty diff matrix");
    Mat r = linalg::second_moment(d);
    out.push_back(0.5 * (r + r.transpose()));
  }
  return out;
}

Mat stage_l1_encoder(const std::vector<Mat>& correlations) {
  if (correlations.empty()) throw std::invalid_argument("stage_l1_encoder: no correlation matrices");
  const Eigen::Index dim = correlations[0].rows();
  Mat h(static_cast<Eigen::Index>(correlations.size()), dim);
  for (std::size_t m = 0; m < correlations.size(); ++m) {
    const Mat& r = correlations[m];
    if (!(r.cwiseAbs().maxCoeff() > 0.0))
      throw std::domain_error("stage_l1_encoder: correlation matrix " + std::to_string(m) +
                              " is numerically zero (vacuous intervention)");
    h.row(static_cast<Eigen::Index>(m)) = linalg::top_eigenvector(r).transpose();
  }
  return h;
}

Mat mean_abs_latent_diffs(const Mat& h, const std::vector<Mat>& diffs) {
  Mat h_pinv = linalg::pinv(h);
  const Eigen::Index k = h.rows();
  Mat out(k, static_cast<Eigen::Index>(diffs.size()));
  for (std::size_t m = 0; m < diffs.size(); ++m) {
    Mat latent = diffs[m] * h_pinv;  // rows: ([H^dagger]^T d)^T
    out.col(static_cast<Eigen::Index>(m)) = latent.cwiseAbs().colwise().mean().transpose();
  }
  return out;
}

Dag graph_from_score_changes(const Mat& mean_abs, double lambda_g) {
  const Eigen::Index n = mean_abs.rows();
  if (mean_abs.cols() != n) throw std::invalid_argument("graph_from_score_changes: matrix must be square");
  BoolMat raw = BoolMat::Constant(n, n, false);
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != m && mean_abs(i, m) >= lambda_g) raw(m, i) = true;
  return orient_by_ancestor_counts(raw);
}

Dag stage_l2_graph(const Mat& h, const std::vector<Mat>& diffs, double lambda_g) {
  return graph_from_score_changes(mean_abs_latent_diffs(h, diffs), lambda_g);
}

UnmixResult stage_l3_unmix(const Mat& h, const Dag& g_hat, const std::vector<Mat>& env_covariances,
                           const std::vector<Mat>& diffs, double lambda_g) {
  const int n = g_hat.size();
  if (h.rows() != n || static_cast<int>(env_covariances.size()) != n)
    throw std::invalid_argument("stage_l3_unmix: shape mismatch");
  Mat hh = h;
  for (int m : g_hat.topological_order()) {
    std::vector<int> pa = g_hat.parents(m);
    if (pa.empty()) continue;
    // covariance of z_hat = H x under environment m
    Mat c = hh * env_covariances[m] * hh.transpose();
    const auto p = static_cast<Eigen::Index>(pa.size());
    Mat c_pp(p, p);
    Vec c_mp(p);
    for (Eigen::Index a = 0; a < p; ++a) {
      c_mp(a) = c(m, pa[a]);
      for (Eigen::Index b = 0; b < p; ++b) c_pp(a, b) = c(pa[a], pa[b]);
    }
    if (linalg::numerical_rank(c_pp) < p)
      throw std::domain_error("stage_l3_unmix: singular parent covariance for node " + std::to_string(m));
    Vec u = linalg::pinv(c_pp) * c_mp;
    for (Eigen::Index a = 0; a < p; ++a) hh.row(m) -= u(a) * hh.row(pa[a]);
  }
  return {hh, stage_l2_graph(hh, diffs, lambda_g)};
}

CrlEstimate run(const Mat& x, const std::vector<Mat>& diffs, const std::vector<Mat>& env_covariances, const Options& opts) {
  CrlEstimate est;
  std::vector<Mat> corr = compute_correlations(diffs);
  est.H = stage_l1_encoder(corr);
  est.g_hat = stage_l2_graph(est.H, diffs, opts.lambda_g);
  if (opts.mode == Mode::hard) {
    UnmixResult r = stage_l3_unmix(est.H, est.g_hat, env_covariances, diffs, opts.lambda_g);
    est.H = r.H;
    est.g_hat = r.g_hat;
  }
  est.z_hat = x * est.H.transpose();
  return est;
}

FullRankResult full_rank_recovery(const std::vector<Mat>& correlations, const std::vector<int>& order,
                                    double lambda_eigv) {
  const int n = static_cast<int>(correlations.size());
  if (!is_permutation(order, n)) throw std::invalid_argument("full_rank_recovery: order must be a permutation");
  const double cos_thr = 1.0 - lambda_eigv;
  std::vector<Mat> basis(n);
  for (int m = 0; m < n; ++m) basis[m] = linalg::column_space_basis(correlations[m], lambda_eigv);

  BoolMat adj = BoolMat::Constant(n, n, false);
  for (int kpos = 0; kpos < n; ++kpos) {
    const int k = order[kpos];
    for (int tpos = 0; tpos < kpos; ++tpos) {
      const int t = order[tpos];
      int common = 0;
      for (int j = 0; j < n; ++j) common += (adj(t, j) && adj(k, j)) ? 1 : 0;
      if (linalg::intersection_dimension(basis[t], basis[k], cos_thr) > common) adj(k, t) = true;
    }
  }
  FullRankResult out;
  out.g_hat = Dag::from_adjacency(adj);

  const Eigen::Index dim = correlations[0].rows();
  out.H = Mat(n, dim);
  for (int m = 0; m < n; ++m) {
    Mat inter = basis[m];
    if (inter.cols() == 0)
      throw std::domain_error("full_rank_recovery: empty column space for node " + std::to_string(m));
    // a child whose truncated basis misses the shared direction is skipped
    for (int k : out.g_hat.children(m)) {
      Mat next = linalg::intersection_basis(inter, basis[k], cos_thr);
      if (next.cols() > 0) inter = next;
    }
    // direction of the intersection carrying most of R^m
    Mat proj = inter.transpose() * correlations[m] * inter;
    Vec w = linalg::top_eigenvector(0.5 * (proj + proj.transpose()));
    Vec h = inter * w;
    out.H.row(m) = (h / h.norm()).transpose();
  }
  return out;
}

Vec partial_recover_node(const Mat& r, Rng& rng) {
  if (!(r.cwiseAbs().maxCoeff() > 0.0)) throw std::domain_error("partial_recover_node: zero correlation matrix");
  return r * random_unit_vector(static_cast<int>(r.cols()), rng);
}

}  // namespace crl::lscalei
