#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "crl/linalg.hpp"
#include "crl/scm.hpp"

namespace crl {
namespace {

Vec fd_gradient_log_density(const EnvModel& e, const Vec& z, double h = 1e-5) {
  Vec g(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    Vec a = z, b = z;
    a(k) += h;
    b(k) -= h;
    g(k) = (e.log_density(a) - e.log_density(b)) / (2 * h);
  }
  return g;
}

std::shared_ptr<const Scm> two_node_chain(double a, double v1, double v2) {
  Mat w = Mat::Zero(2, 2);
  w(1, 0) = a;
  return std::make_shared<Scm>(make_linear_scm(Dag(2, {{0, 1}}), w, Vec{{v1, v2}}));
}

TEST(LinearScm, ChainCovarianceClosedForm) {
  const double a = 1.2, v1 = 0.7, v2 = 1.3;
  EnvModel obs(two_node_chain(a, v1, v2));
  Mat c = obs.covariance();
  EXPECT_NEAR(c(0, 0), v1, 1e-12);
  EXPECT_NEAR(c(0, 1), a * v1, 1e-12);
  EXPECT_NEAR(c(1, 1), a * a * v1 + v2, 1e-12);
  EXPECT_NEAR((c * obs.precision() - Mat::Identity(2, 2)).norm(), 0.0, 1e-12);
}

TEST(LinearScm, SampleCovarianceConverges) {
  const double a = -0.8, v1 = 1.1, v2 = 0.6;
  EnvModel obs(two_node_chain(a, v1, v2));
  Rng rng = make_rng(9);
  Mat z = obs.sample(200000, rng);
  Mat c = linalg::covariance(z);
  EXPECT_NEAR(c(1, 1), a * a * v1 + v2, 0.02);
  EXPECT_NEAR(c(0, 1), a * v1, 0.02);
}

TEST(LinearScm, ScoreIsMinusPrecisionTimesZ) {
  Rng rng = make_rng(4);
  Dag g(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  EnvModel obs(std::make_shared<Scm>(sample_linear_scm(g, rng)));
  Vec z = Vec::Random(4);
  EXPECT_LT((obs.score(z) + obs.precision() * z).norm(), 1e-10);
}

TEST(LinearScm, SampledParametersInRange) {
  Rng rng = make_rng(8);
  for (int t = 0; t < 20; ++t) {
    Dag g = sample_erdos_renyi(6, 0.5, rng);
    Scm s = sample_linear_scm(g, rng);
    for (int i = 0; i < 6; ++i) {
      EXPECT_GE(s.noise_vars(i), 0.5);
      EXPECT_LE(s.noise_vars(i), 1.5);
      for (int j = 0; j < 6; ++j) {
        double w = std::abs(s.weights(i, j));
        if (g.has_edge(j, i)) {
          EXPECT_GE(w, 0.5);
          EXPECT_LE(w, 1.5);
        } else {
          EXPECT_EQ(w, 0.0);
        }
      }
    }
  }
}

TEST(QuadraticScm, ScoreMatchesFiniteDifference) {
  Rng rng = make_rng(21);
  Dag g(4, {{0, 2}, {1, 2}, {2, 3}, {0, 3}});
  auto scm = std::make_shared<Scm>(sample_quadratic_scm(g, rng));
  EnvModel obs(scm);
  EnvModel soft = apply_intervention(obs, default_soft_intervention(*scm, 3));
  Mat z = obs.sample(5, rng);
  for (int s = 0; s < 5; ++s) {
    Vec zz = z.row(s).transpose();
    EXPECT_LT((obs.score(zz) - fd_gradient_log_density(obs, zz)).norm(), 1e-5);
    EXPECT_LT((soft.score(zz) - fd_gradient_log_density(soft, zz)).norm(), 1e-5);
  }
}

TEST(QuadraticScm, MechanismGradientMatchesFiniteDifference) {
  Rng rng = make_rng(22);
  Dag g(3, {{0, 2}, {1, 2}});
  Scm s = sample_quadratic_scm(g, rng);
  Vec z{{0.4, -1.3, 0.0}};
  Vec grad;
  s.mechanism_gradient(2, z, grad);
  const double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    Vec a = z, b = z;
    a(k) += h;
    b(k) -= h;
    EXPECT_NEAR(grad(k), (s.mechanism(2, a) - s.mechanism(2, b)) / (2 * h), 1e-6);
  }
  // f = sqrt(z^T Q z) is the Q-norm of the parent vector
  Vec zp = z.head(2);
  EXPECT_NEAR(s.mechanism(2, z), std::sqrt(zp.dot(s.q[2] * zp)), 1e-12);
  EXPECT_EQ(s.mechanism(0, z), 0.0);
}

TEST(Interventions, HardRemovesMechanismAndScalesVariance) {
  auto scm = two_node_chain(1.0, 1.0, 0.8);
  EnvModel obs(scm);
  EnvModel hard = apply_intervention(obs, default_hard_intervention(*scm, 1));
  EXPECT_EQ(hard.mechanism_scale(1), 0.0);
  EXPECT_NEAR(hard.noise_var(1), 0.8 * 0.25, 1e-15);
  EXPECT_FALSE(hard.depends_on_parents(1));
  EXPECT_EQ(hard.targets(), std::vector<int>{1});
  Mat c = hard.covariance();
  EXPECT_NEAR(c(0, 1), 0.0, 1e-15);
}

TEST(Interventions, SoftHalvesMechanism) {
  auto scm = two_node_chain(1.0, 1.0, 0.8);
  EnvModel obs(scm);
  EnvModel soft = apply_intervention(obs, default_soft_intervention(*scm, 1));
  EXPECT_EQ(soft.mechanism_scale(1), 0.5);
  EXPECT_EQ(soft.noise_var(1), 0.8);
  // on a root only the variance can change
  EnvModel root = apply_intervention(obs, default_soft_intervention(*scm, 0));
  EXPECT_NEAR(root.noise_var(0), 0.25, 1e-15);
}

TEST(Interventions, QuadraticHardUsesFiveTimesVariance) {
  Rng rng = make_rng(1);
  auto scm = std::make_shared<Scm>(sample_quadratic_scm(Dag(2, {{0, 1}}), rng));
  InterventionSpec s = default_hard_intervention(*scm, 1);
  EXPECT_EQ(s.noise_var_multiplier, 5.0);
  InterventionSpec bad{1, InterventionKind::hard, 0.5, 1.0};
  EXPECT_THROW(apply_intervention(EnvModel(scm), bad), std::invalid_argument);
}

TEST(EnvironmentSet, TargetsArePermutationsAndCouplingHonoured) {
  Rng rng = make_rng(30);
  auto scm = std::make_shared<Scm>(sample_linear_scm(sample_erdos_renyi(5, 0.5, rng), rng));
  EnvironmentSetOptions o;
  o.envs_per_node = 2;
  EnvironmentSet coupled = build_environment_set(scm, o, rng);
  EXPECT_TRUE(is_permutation(coupled.oracle_targets(), 5));
  EXPECT_EQ(coupled.oracle_targets(), coupled.oracle_second_targets());
  EXPECT_EQ(static_cast<int>(coupled.envs().size()), 11);
  for (int m = 0; m < 5; ++m) {
    int t = coupled.oracle_targets()[m];
    EXPECT_EQ(coupled.first(m).targets(), std::vector<int>{t});
    EXPECT_NEAR(coupled.second(m).noise_var(t), scm->noise_vars(t) * kSecondHardVarMultiplier, 1e-15);
  }
  o.coupled = false;
  EnvironmentSet un = build_environment_set(scm, o, rng);
  EXPECT_FALSE(un.coupled());
  EXPECT_TRUE(is_permutation(un.oracle_second_targets(), 5));
}

TEST(Assumptions, LinearPrecisionChangeHasRankAtMostTwo) {
  // a hard intervention swaps one factor (e_t - a_t)(e_t - a_t)^T / v for
  // e_t e_t^T / v', so the precision change has rank min(|Pa+(t)|, 2)
  Rng rng = make_rng(31);
  Dag g(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}});
  auto scm = std::make_shared<Scm>(sample_linear_scm(g, rng));
  EnvironmentSet envs = build_environment_set(scm, {}, rng);
  for (int m = 0; m < 4; ++m) {
    FullRankCheck c = check_assumption_full_rank(envs, m, 5000, rng, 1e-8);
    EXPECT_EQ(c.rank, std::min(c.pa_plus_size, 2)) << "env " << m;
    EXPECT_EQ(c.pass, c.pa_plus_size <= 2);
  }
}

TEST(Assumptions, FullRankHoldsForQuadraticHard) {
  Rng rng = make_rng(32);
  Dag g(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {0, 3}});
  auto scm = std::make_shared<Scm>(sample_quadratic_scm(g, rng));
  EnvironmentSet envs = build_environment_set(scm, {}, rng);
  for (int m = 0; m < 4; ++m) {
    FullRankCheck c = check_assumption_full_rank(envs, m, 5000, rng, 1e-6);
    EXPECT_TRUE(c.pass) << "env " << m << " rank " << c.rank << " vs " << c.pa_plus_size;
  }
}

TEST(Assumptions, RatioConditionFailsWhenParentWeightUnchanged) {
  // only the noise variance of node 1 changes: both partials share the
  // residual factor, so their ratio is the constant -a
  auto scm = two_node_chain(0.9, 1.0, 1.0);
  EnvModel obs(scm);
  Rng rng = make_rng(40);
  EnvModel var_only = apply_intervention(obs, InterventionSpec{1, InterventionKind::soft, 1.0, 0.25});
  EXPECT_FALSE(ratio_condition_holds(obs, var_only, 1, 0, 200, rng));
  EnvModel halved = apply_intervention(obs, default_soft_intervention(*scm, 1));
  EXPECT_TRUE(ratio_condition_holds(obs, halved, 1, 0, 200, rng));
  EnvModel hard = apply_intervention(obs, default_hard_intervention(*scm, 1));
  EXPECT_TRUE(ratio_condition_holds(obs, hard, 1, 0, 200, rng));
}

}  // namespace
}  // namespace crl
