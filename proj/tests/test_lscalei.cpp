#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "crl/linalg.hpp"
#include "crl/lscalei.hpp"
#include "crl/mixing.hpp"
#include "crl/scm.hpp"

namespace crl {
namespace {

// Latent PSD matrix whose column space is exactly span{e_i : i in support},
// eigenvalues in [1, 2] so no direction falls under the truncation threshold.
Mat supported_psd(int n, const std::vector<int>& support, Rng& rng) {
  const int k = static_cast<int>(support.size());
  Eigen::HouseholderQR<Mat> qr(standard_normal_matrix(k, k, rng));
  Mat q = qr.householderQ();
  Mat e = Mat::Zero(n, k);
  for (int c = 0; c < k; ++c) e(support[c], c) = 1.0;
  Vec ev(k);
  for (int c = 0; c < k; ++c) ev(c) = uniform(rng, 1.0, 2.0);
  Mat b = e * q;
  return b * ev.asDiagonal() * b.transpose();
}

TEST(Correlations, AverageOuterProduct) {
  Mat d(2, 2);
  d << 1, 2, 3, 4;
  Mat r = lscalei::compute_correlations({d})[0];
  Mat expect(2, 2);
  expect << 5, 7, 7, 10;
  EXPECT_LT((r - expect).norm(), 1e-14);
}

TEST(StageL1, RowsAreUnitTopEigenvectors) {
  Mat r = Mat::Zero(3, 3);
  r.diagonal() << 1, 5, 2;
  Mat h = lscalei::stage_l1_encoder({r, r});
  EXPECT_EQ(h.rows(), 2);
  EXPECT_NEAR(h(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(h.row(1).norm(), 1.0, 1e-12);
}

TEST(GraphFromScoreChanges, EntryAboveThresholdMakesParent) {
  // column m lists the latent score changes in environment m
  Mat a = Mat::Zero(3, 3);
  a.diagonal().setOnes();
  a(0, 1) = 0.5;   // 0 changes in env 1: 0 -> 1
  a(1, 2) = 0.2;   // 1 -> 2
  a(0, 2) = 1e-4;  // below threshold
  Dag g = lscalei::graph_from_score_changes(a, 1e-3);
  EXPECT_EQ(g, Dag(3, {{0, 1}, {1, 2}}));
  EXPECT_EQ(lscalei::graph_from_score_changes(a, 1e-5).edge_count(), 3);
}

TEST(MeanAbsLatentDiffs, LinearPullbackThroughEncoder) {
  // with z_hat = H x the latent diff is pinv(H)^T d
  Mat h = Mat::Identity(2, 2);
  h(0, 1) = 1.0;
  Mat d(2, 2);
  d << 1, 0, -1, 2;
  Mat hp = linalg::pinv(h);
  Mat lat = d * hp;
  Mat m = lscalei::mean_abs_latent_diffs(h, {d});
  EXPECT_NEAR(m(0, 0), lat.col(0).cwiseAbs().mean(), 1e-14);
  EXPECT_NEAR(m(1, 0), lat.col(1).cwiseAbs().mean(), 1e-14);
}

TEST(LscaleI, ExactInputsRecoverGraphAndLatents) {
  Rng rng = make_rng(77);
  for (int t = 0; t < 5; ++t) {
    const int n = 5;
    Dag dag = sample_erdos_renyi(n, 0.5, rng);
    auto scm = std::make_shared<Scm>(sample_linear_scm(dag, rng));
    EnvironmentSet envs = build_environment_set(scm, {}, rng);
    Mixing mix = sample_mixing(n, n, rng);
    Mat z = envs.observational().sample(3000, rng);
    Mat x = forward_rows(mix, z);
    Mat s0 = envs.observational().scores(z);
    std::vector<Mat> diffs, covs;
    for (int m = 0; m < n; ++m) {
      diffs.push_back((envs.first(m).scores(z) - s0) * mix.G_pinv);
      covs.push_back(mix.G * envs.first(m).covariance() * mix.G.transpose());
    }
    lscalei::CrlEstimate est = lscalei::run(x, diffs, covs, {});
    EXPECT_EQ(relabel(est.g_hat, envs.oracle_targets()), dag);
    Mat c = est.H * mix.G;
    for (int m = 0; m < n; ++m) {
      int tgt = envs.oracle_targets()[m];
      double off = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != tgt) off = std::max(off, std::abs(c(m, j)));
      EXPECT_LT(off / std::abs(c(m, tgt)), 1e-6);
    }
    EXPECT_LT((est.z_hat - x * est.H.transpose()).norm(), 1e-9 * est.z_hat.norm());
  }
}

TEST(FullRankRecovery, SubspaceOracleOnChain) {
  // chain 0 -> 1 -> 2: R^m is supported on Pa(m) + {m}
  Rng rng = make_rng(5);
  std::vector<Mat> r = {supported_psd(3, {0}, rng), supported_psd(3, {0, 1}, rng), supported_psd(3, {1, 2}, rng)};
  lscalei::FullRankResult fr = lscalei::full_rank_recovery(r, {0, 1, 2});
  EXPECT_EQ(fr.g_hat, Dag(3, {{0, 1}, {1, 2}}));
  EXPECT_NEAR(std::abs(fr.H(0, 0)), 1.0, 1e-9);
  EXPECT_NEAR(std::abs(fr.H(1, 1)), 1.0, 1e-9);
  // the leaf mixes only with its surrounding parent
  EXPECT_NEAR(fr.H(2, 0), 0.0, 1e-9);
}

TEST(FullRankRecovery, SubspaceOracleUnderRotation) {
  // 0 -> 2 <- 1; a rotation of the observed space rotates the rows back
  Rng rng = make_rng(6);
  Eigen::HouseholderQR<Mat> qr(standard_normal_matrix(3, 3, rng));
  Mat q = qr.householderQ();
  std::vector<Mat> r = {supported_psd(3, {0}, rng), supported_psd(3, {1}, rng), supported_psd(3, {0, 1, 2}, rng)};
  for (Mat& m : r) m = q * m * q.transpose();
  lscalei::FullRankResult fr = lscalei::full_rank_recovery(r, {0, 1, 2});
  EXPECT_EQ(fr.g_hat, Dag(3, {{0, 2}, {1, 2}}));
  Mat c = fr.H * q;
  EXPECT_NEAR(std::abs(c(0, 0)), 1.0, 1e-9);
  EXPECT_NEAR(std::abs(c(1, 1)), 1.0, 1e-9);
}

TEST(FullRankRecovery, RejectsBadOrder) {
  Mat r = Mat::Identity(2, 2);
  EXPECT_THROW(lscalei::full_rank_recovery({r, r}, {0, 0}), std::invalid_argument);
}

TEST(PartialRecovery, ResultLiesInColumnSpace) {
  Rng rng = make_rng(7);
  Mat r = supported_psd(4, {1, 3}, rng);
  Vec h = lscalei::partial_recover_node(r, rng);
  EXPECT_NEAR(h(0), 0.0, 1e-12);
  EXPECT_NEAR(h(2), 0.0, 1e-12);
  EXPECT_GT(h.norm(), 0.0);
  EXPECT_THROW(lscalei::partial_recover_node(Mat::Zero(2, 2), rng), std::domain_error);
}

}  // namespace
}  // namespace crl
