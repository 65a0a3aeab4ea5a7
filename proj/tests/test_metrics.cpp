#include <gtest/gtest.h>

#include <cmath>

#include "crl/metrics.hpp"
#include "crl/rng.hpp"

namespace crl {
namespace {

TEST(Assignment, AgreesWithExhaustiveSearch) {
  Rng rng = make_rng(1);
  for (int t = 0; t < 200; ++t) {
    int n = 1 + t % 7;
    Mat w = standard_normal_matrix(n, n, rng);
    Permutation a = max_weight_assignment(w);
    Permutation b = max_weight_assignment_exhaustive(w);
    double va = 0, vb = 0;
    for (int i = 0; i < n; ++i) {
      va += w(i, a[i]);
      vb += w(i, b[i]);
    }
    ASSERT_TRUE(is_permutation(a, n));
    EXPECT_NEAR(va, vb, 1e-12);
  }
}

TEST(Mcc, InvariantToPermutationScaleAndSign) {
  Rng rng = make_rng(2);
  Mat z = standard_normal_matrix(500, 4, rng);
  Mat zh(500, 4);
  zh.col(0) = -2.0 * z.col(2);
  zh.col(1) = z.col(0);
  zh.col(2) = 0.1 * z.col(3);
  zh.col(3) = -z.col(1);
  MccResult r = mcc(z, zh);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_EQ(r.perm, (Permutation{1, 3, 0, 2}));
}

TEST(Mcc, CubicDistortionOfGaussian) {
  // corr(Z, Z^3 + 0.1 Z) = E[Z^4 + 0.1 Z^2] / sqrt(E[(Z^3 + 0.1 Z)^2]) = 3.1 / sqrt(15.61)
  Rng rng = make_rng(3);
  Mat z = standard_normal_matrix(400000, 1, rng);
  Mat zh = z.array().cube() + 0.1 * z.array();
  EXPECT_NEAR(mcc(z, zh).value, 3.1 / std::sqrt(15.61), 0.01);
}

TEST(Shd, ChainAgainstEmptyGraph) {
  Dag chain(3, {{0, 1}, {1, 2}});
  EXPECT_EQ(shd(chain, Dag(3)), 2);
  EXPECT_EQ(shd(chain, chain), 0);
}

TEST(Shd, ReversedEdgeCountsOnce) {
  EXPECT_EQ(shd(Dag(2, {{0, 1}}), Dag(2, {{1, 0}})), 1);
}

TEST(Shd, PermutationAlignsNodes) {
  Dag truth(3, {{0, 1}, {1, 2}});
  Permutation p{2, 0, 1};
  Dag est = relabel(truth, p);
  EXPECT_EQ(shd(truth, est, p), 0);
  EXPECT_GT(shd(truth, est), 0);
}

TEST(TransformErrors, IdentityHasNoError) {
  Dag g(3, {{0, 1}});
  TransformErrors e = effective_transform_errors(Mat::Identity(3, 3) * 2.0, g, identity_permutation(3));
  EXPECT_NEAR(e.l_scale, 0.0, 1e-15);
  EXPECT_NEAR(e.l_pa, 0.0, 1e-15);
  EXPECT_NEAR(e.l_sur, 0.0, 1e-15);
}

TEST(TransformErrors, ParentLeakOnlyCountsOffParents) {
  // row 1 leaks 0.5 of node 0 after diagonal normalization
  Mat hg(2, 2);
  hg << 3.0, 0.0, 1.0, 2.0;
  TransformErrors with_edge = effective_transform_errors(hg, Dag(2, {{0, 1}}), {0, 1});
  EXPECT_NEAR(with_edge.l_scale, 0.5, 1e-12);
  EXPECT_NEAR(with_edge.l_pa, 0.0, 1e-15);
  EXPECT_NEAR(with_edge.l_sur, 0.0, 1e-15);
  TransformErrors no_edge = effective_transform_errors(hg, Dag(2), {0, 1});
  EXPECT_NEAR(no_edge.l_pa, 0.5, 1e-12);
  EXPECT_NEAR(no_edge.l_sur, 0.5, 1e-12);
}

TEST(TransformErrors, RowsAlignedByPermutation) {
  Mat hg(2, 2);
  hg << 0.0, 4.0, 2.0, 0.0;
  TransformErrors e = effective_transform_errors(hg, Dag(2), {1, 0});
  EXPECT_NEAR(e.l_scale, 0.0, 1e-15);
}

TEST(TransformErrors, NonSurroundingParentCountsForSur) {
  // 0 -> 1, 0 -> 2, 1 -> 3: Ch(1)={3} is not inside Ch(0), so a leak of
  // node 0 into row 1 is allowed by Pa but not by sur
  Dag g(4, {{0, 1}, {0, 2}, {1, 3}});
  Mat hg = Mat::Identity(4, 4);
  hg(1, 0) = 0.25;
  TransformErrors e = effective_transform_errors(hg, g, identity_permutation(4));
  EXPECT_NEAR(e.l_pa, 0.0, 1e-15);
  EXPECT_NEAR(e.l_sur, 0.25, 1e-12);
}

TEST(NormalizedLatentError, ZeroForScaledPermutation) {
  Rng rng = make_rng(4);
  Mat z = standard_normal_matrix(100, 3, rng);
  Mat zh(100, 3);
  zh << -3.0 * z.col(1), z.col(2), 0.5 * z.col(0);
  EXPECT_NEAR(normalized_latent_error(z, zh), 0.0, 1e-12);
}

TEST(NormalizedLatentError, MissingColumnCostsItsNorm) {
  Rng rng = make_rng(5);
  Mat z = standard_normal_matrix(100, 2, rng);
  Mat zh = z;
  zh.col(1).setZero();
  EXPECT_NEAR(normalized_latent_error(z, zh, {0, 1}), z.col(1).norm() / z.norm(), 1e-12);
}

TEST(NormalizedLatentError, SmallNoiseScalesWithSigma) {
  // least-squares rescaling barely moves the column, so the error is the
  // relative size of the perturbation
  Rng rng = make_rng(6);
  Mat z = standard_normal_matrix(20000, 3, rng);
  Mat e = standard_normal_matrix(20000, 3, rng);
  for (double sigma : {1e-3, 1e-2}) {
    double expect = sigma * e.norm() / z.norm();
    EXPECT_NEAR(normalized_latent_error(z, z + sigma * e), expect, 0.02 * expect);
  }
}

}  // namespace
}  // namespace crl
