#pragma once

#include <memory>
#include <vector>

#include "crl/graph.hpp"
#include "crl/rng.hpp"
#include "crl/types.hpp"

namespace crl {

enum class ScmFamily { linear, quadratic };
enum class InterventionKind { hard, soft };

// Additive-noise latent model Z_i = f_i(Z_Pa(i)) + N_i, N_i ~ N(0, sigma_i^2).
// linear:    f_i(z) = A_i . z
// quadratic: f_i(z) = sqrt(z_Pa^T Q_i z_Pa)   (0 for roots)
struct Scm {
  ScmFamily family = ScmFamily::linear;
  Dag dag;
  Mat weights;                // linear only, n x n, nonzero only on parents
  std::vector<Mat> q;         // quadratic only, |Pa(i)| x |Pa(i)| SPD
  Vec noise_vars;
  std::vector<std::vector<int>> parents;  // cached from dag

  int size() const { return dag.size(); }
  double mechanism(int i, const Vec& z) const;
  // d f_i / d z_{parents[i][k]} written to grad(k)
  void mechanism_gradient(int i, const Vec& z, Vec& grad) const;
};

Scm make_linear_scm(const Dag& dag, const Mat& weights, const Vec& noise_vars);
Scm make_quadratic_scm(const Dag& dag, const std::vector<Mat>& q, const Vec& noise_vars);

// Weights ~ Unif(±[0.5,1.5]) on edges, variances ~ Unif[0.5,1.5].
Scm sample_linear_scm(const Dag& dag, Rng& rng);
// Q_i = (B^T B + I) / |Pa(i)| with B standard normal; variances as above.
Scm sample_quadratic_scm(const Dag& dag, Rng& rng);

struct InterventionSpec {
  int target = 0;
  InterventionKind kind = InterventionKind::hard;
  double mechanism_scale = 0.0;       // multiplies f_target (0 for hard)
  double noise_var_multiplier = 1.0;  // replacement noise variance / base variance
};

inline constexpr double kLinearHardVarMultiplier = 0.25;
inline constexpr double kQuadraticHardVarMultiplier = 5.0;
inline constexpr double kSoftMechanismScale = 0.5;
inline constexpr double kSecondHardVarMultiplier = 4.0;

InterventionSpec hard_intervention(int target, double noise_var_multiplier);
// Default hard recipe for the family: variance x1/4 (linear) or x5 (quadratic).
InterventionSpec default_hard_intervention(const Scm& scm, int target);
// Default soft recipe: mechanism halved. Linear keeps the noise except on
// roots, where halving is vacuous and the variance is divided by 4 instead;
// quadratic uses the x5 replacement noise.
InterventionSpec default_soft_intervention(const Scm& scm, int target);

// Observational or intervened latent distribution over a shared base model.
class EnvModel {
 public:
  EnvModel() = default;
  explicit EnvModel(std::shared_ptr<const Scm> scm);

  const Scm& scm() const { return *scm_; }
  std::shared_ptr<const Scm> scm_ptr() const { return scm_; }
  int size() const { return scm_->size(); }
  double mechanism_scale(int i) const { return scale_(i); }
  double noise_var(int i) const { return var_(i); }
  const std::vector<int>& targets() const { return targets_; }
  // parents of i in this environment (empty when the mechanism is removed)
  bool depends_on_parents(int i) const { return scale_(i) != 0.0 && !scm_->parents[i].empty(); }

  // Rows are samples; ancestral sampling in causal order.
  Mat sample(int n_s, Rng& rng) const;
  Vec score(const Vec& z) const;
  Mat scores(const Mat& z) const;  // row-wise
  double log_density(const Vec& z) const;
  double log_conditional(int i, const Vec& z) const;

  // Linear family only: exact covariance (I-A)^{-1} diag(v) (I-A)^{-T} and its inverse.
  Mat covariance() const;
  Mat precision() const;

  friend EnvModel apply_intervention(const EnvModel& base, const InterventionSpec& spec);

 private:
  std::shared_ptr<const Scm> scm_;
  Vec scale_;
  Vec var_;
  std::vector<int> targets_;
};

EnvModel apply_intervention(const EnvModel& base, const InterventionSpec& spec);

struct EnvironmentSetOptions {
  InterventionKind kind = InterventionKind::hard;
  int envs_per_node = 1;  // 1 or 2
  bool coupled = true;
  // 0 selects the family default
  double hard_var_multiplier = 0.0;
  double second_var_multiplier = kSecondHardVarMultiplier;
};

// envs[0] observational, envs[1..n] first interventional set,
// envs[n+1..2n] second set (two hard interventions per node).
class EnvironmentSet {
 public:
  EnvironmentSet() = default;
  EnvironmentSet(std::shared_ptr<const Scm> scm, std::vector<EnvModel> envs, Permutation targets,
                 Permutation second_targets, bool coupled);

  int n() const { return static_cast<int>(targets_.size()); }
  bool has_second_set() const { return !second_targets_.empty(); }
  bool coupled() const { return coupled_; }
  const Scm& scm() const { return *scm_; }
  std::shared_ptr<const Scm> scm_ptr() const { return scm_; }
  const std::vector<EnvModel>& envs() const { return envs_; }
  const EnvModel& observational() const { return envs_[0]; }
  const EnvModel& first(int m) const { return envs_[1 + m]; }
  const EnvModel& second(int m) const { return envs_[1 + n() + m]; }

  // Evaluation-only: intervention target of first(m) / second(m).
  const Permutation& oracle_targets() const { return targets_; }
  const Permutation& oracle_second_targets() const { return second_targets_; }

 private:
  std::shared_ptr<const Scm> scm_;
  std::vector<EnvModel> envs_;
  Permutation targets_;
  Permutation second_targets_;
  bool coupled_ = true;
};

EnvironmentSet build_environment_set(std::shared_ptr<const Scm> scm, const EnvironmentSetOptions& opts, Rng& rng);

struct FullRankCheck {
  int rank = 0;
  int pa_plus_size = 0;
  bool pass = false;
};
// Numerical rank of R_Z^m = E[(s - s^m)(s - s^m)^T] under the observational
// measure, eigenvalue threshold lambda_eigv relative to the largest one.
FullRankCheck check_assumption_full_rank(const EnvironmentSet& envs, int m, int n_s, Rng& rng,
                                         double lambda_eigv = 0.01);

// Whether d/dz_k log(p_i/q_i) / d/dz_i log(p_i/q_i) is non-constant over
// observational samples (k a parent of i). False means the ratio is constant.
bool ratio_condition_holds(const EnvModel& obs, const EnvModel& intervened, int i, int k, int n_points, Rng& rng);

}  // namespace crl
