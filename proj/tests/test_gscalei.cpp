#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "crl/gscalei.hpp"
#include "crl/linalg.hpp"
#include "crl/mixing.hpp"
#include "crl/scm.hpp"
#include "crl/scores.hpp"

namespace crl {
namespace {

struct TanhProblem {
  EnvironmentSet envs;
  Mixing mix;
  Mat z, x;
  std::vector<Mat> coupled, first, second;
};

TanhProblem tanh_problem(std::uint64_t seed, int n, int d, int n_s, bool coupled = true) {
  Rng rng = make_rng(seed);
  Dag dag = sample_erdos_renyi(n, 0.5, rng);
  auto scm = std::make_shared<Scm>(sample_quadratic_scm(dag, rng));
  EnvironmentSetOptions o;
  o.envs_per_node = 2;
  o.coupled = coupled;
  TanhProblem p{build_environment_set(scm, o, rng), sample_mixing(n, d, rng, MixKind::tanh_glm), {}, {}, {}, {}, {}};
  p.z = p.envs.observational().sample(n_s, rng);
  limit_saturation(p.mix, p.z);
  p.x = forward_rows(p.mix, p.z);
  const EnvModel& obs = p.envs.observational();
  for (int m = 0; m < n; ++m) {
    p.coupled.push_back(oracle_score_diff_latent(p.envs.first(m), p.envs.second(m), p.mix, p.z));
    p.first.push_back(oracle_score_diff_latent(p.envs.first(m), obs, p.mix, p.z));
    p.second.push_back(oracle_score_diff_latent(p.envs.second(m), obs, p.mix, p.z));
  }
  return p;
}

TEST(GscaleI, DefaultSteps) {
  EXPECT_EQ(gscalei::default_steps(2), 30000);
  EXPECT_EQ(gscalei::default_steps(5), 30000);
  EXPECT_EQ(gscalei::default_steps(8), 40000);
}

TEST(GscaleI, SmoothLossGradientMatchesFiniteDifference) {
  TanhProblem p = tanh_problem(1, 3, 5, 40);
  Rng rng = make_rng(2);
  Mat h = 0.5 * standard_normal_matrix(3, 5, rng);
  gscalei::Config cfg;
  cfg.eps = 1e-3;
  Mat grad;
  gscalei::loss(h, p.coupled, p.x, cfg, true, &grad);
  const double step = 1e-6;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      Mat a = h, b = h;
      a(i, j) += step;
      b(i, j) -= step;
      double fd = (gscalei::loss(a, p.coupled, p.x, cfg, true).total - gscalei::loss(b, p.coupled, p.x, cfg, true).total) /
                  (2 * step);
      EXPECT_NEAR(grad(i, j), fd, 1e-5 * (1 + std::abs(fd))) << i << "," << j;
    }
}

TEST(GscaleI, TrueEncoderMakesDtDiagonal) {
  // coupled hard pairs change only the target's score, so the true encoder
  // gives a diagonal D_t up to row order; d == n leaves no reconstruction error
  TanhProblem p = tanh_problem(3, 3, 3, 200);
  Mat h = p.mix.G_pinv;
  Mat dt = gscalei::compute_dt(h, p.coupled, p.x);
  for (int m = 0; m < 3; ++m) {
    int t = p.envs.oracle_targets()[m];
    EXPECT_GT(dt(t, m), 1e-3);
    for (int i = 0; i < 3; ++i) {
      if (i == t) continue;
      EXPECT_LT(dt(i, m), 1e-9);
    }
  }
  gscalei::LossValue lv = gscalei::loss(h, p.coupled, p.x, {}, false);
  EXPECT_LT(lv.recon, 1e-20);
}

TEST(GscaleI, InitialEncoderRowsOrthonormal) {
  TanhProblem p = tanh_problem(4, 2, 6, 100);
  Mat h0 = gscalei::initial_encoder(p.x, 2);
  EXPECT_LT((h0 * h0.transpose() - Mat::Identity(2, 2)).norm(), 1e-10);
}

TEST(GscaleI, CoupledFitRecoversLatentsOnSmallProblem) {
  TanhProblem p = tanh_problem(5, 2, 2, 200);
  gscalei::Config cfg;
  cfg.steps = 20000;
  Rng rng = make_rng(6);
  gscalei::FitResult fit = gscalei::fit_coupled(p.x, p.coupled, cfg, rng);
  EXPECT_LT(fit.loss, 1e-2);
  // H G should be a scaled permutation
  Mat c = fit.H * p.mix.G;
  for (int r = 0; r < 2; ++r) {
    Eigen::Index arg;
    double big = c.row(r).cwiseAbs().maxCoeff(&arg);
    EXPECT_LT(std::abs(c(r, 1 - arg)) / big, 0.05);
  }
}

TEST(CouplingConstraints, HandWorkedIndicators) {
  // two nodes, 0 -> 1; the second set is presented in swapped order
  Mat d(2, 2), dt(2, 2);
  d << 1.0, 0.5, 0.0, 1.0;
  dt << 0.5, 1.0, 1.0, 0.0;
  EXPECT_TRUE(gscalei::coupling_constraints_hold(d, dt, {1, 0}, 0.1));
  EXPECT_FALSE(gscalei::coupling_constraints_hold(d, dt, {0, 1}, 0.1));
  // a mutual pair of off-diagonal indicators is a 2-cycle
  Mat cyc(2, 2);
  cyc << 1.0, 0.5, 0.5, 1.0;
  EXPECT_FALSE(gscalei::coupling_constraints_hold(cyc, cyc, {0, 1}, 0.1));
}

TEST(Uncoupled, RefusesLargeN) {
  std::vector<Mat> eight(8, Mat::Zero(3, 8));
  Rng rng = make_rng(1);
  EXPECT_THROW(gscalei::fit_uncoupled(Mat::Zero(3, 8), eight, eight, {}, rng), std::length_error);
}

}  // namespace
}  // namespace crl
