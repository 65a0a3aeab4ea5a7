#include "crl/scm.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "crl/linalg.hpp"

namespace crl {

namespace {

std::vector<std::vector<int>> parent_lists(const Dag& dag) {
  std::vector<std::vector<int>> out(dag.size());
  for (int i = 0; i < dag.size(); ++i) out[i] = dag.parents(i);
  return out;
}

double quad_form(const Mat& q, const std::vector<int>& pa, const Vec& z) {
  double acc = 0.0;
  const int p = static_cast<int>(pa.size());
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) acc += z(pa[a]) * q(a, b) * z(pa[b]);
  return acc;
}

bool parents_all_zero(const std::vector<int>& pa, const Vec& z) {
  for (int j : pa)
    if (z(j) != 0.0) return false;
  return true;
}

void check_target(const Scm& scm, int target) {
  if (target < 0 || target >= scm.size())
    throw std::invalid_argument("intervention target " + std::to_string(target) + " out of range [0," +
                                std::to_string(scm.size()) + ")");
}

}  // namespace

double Scm::mechanism(int i, const Vec& z) const {
  const auto& pa = parents[i];
  if (pa.empty()) return 0.0;
  if (family == ScmFamily::linear) {
    double acc = 0.0;
    for (int j : pa) acc += weights(i, j) * z(j);
    return acc;
  }
  return std::sqrt(std::max(0.0, quad_form(q[i], pa, z)));
}

void Scm::mechanism_gradient(int i, const Vec& z, Vec& grad) const {
  const auto& pa = parents[i];
  const int p = static_cast<int>(pa.size());
  grad.resize(p);
  if (family == ScmFamily::linear) {
    for (int k = 0; k < p; ++k) grad(k) = weights(i, pa[k]);
    return;
  }
  if (p > 0 && parents_all_zero(pa, z))
    throw std::domain_error("quadratic mechanism of node " + std::to_string(i) +
                            " is not differentiable at a zero parent vector");
  double f = std::sqrt(quad_form(q[i], pa, z));
  for (int k = 0; k < p; ++k) {
    double qz = 0.0;
    for (int b = 0; b < p; ++b) qz += q[i](k, b) * z(pa[b]);
    grad(k) = qz / f;
  }
}

Scm make_linear_scm(const Dag& dag, const Mat& weights, const Vec& noise_vars) {
  const int n = dag.size();
  if (weights.rows() != n || weights.cols() != n || noise_vars.size() != n)
    throw std::invalid_argument("make_linear_scm: shape mismatch");
  for (int i = 0; i < n; ++i) {
    if (!(noise_vars(i) > 0.0)) throw std::invalid_argument("make_linear_scm: noise variances must be positive");
    for (int j = 0; j < n; ++j)
      if (weights(i, j) != 0.0 && !dag.has_edge(j, i))
        throw std::invalid_argument("make_linear_scm: weight on a non-edge");
  }
  Scm s;
  s.family = ScmFamily::linear;
  s.dag = dag;
  s.weights = weights;
  s.noise_vars = noise_vars;
  s.parents = parent_lists(dag);
  return s;
}

Scm make_quadratic_scm(const Dag& dag, const std::vector<Mat>& q, const Vec& noise_vars) {
  const int n = dag.size();
  if (static_cast<int>(q.size()) != n || noise_vars.size() != n)
    throw std::invalid_argument("make_quadratic_scm: shape mismatch");
  Scm s;
  s.family = ScmFamily::quadratic;
  s.dag = dag;
  s.parents = parent_lists(dag);
  for (int i = 0; i < n; ++i) {
    const auto p = static_cast<Eigen::Index>(s.parents[i].size());
    if (q[i].rows() != p || q[i].cols() != p) throw std::invalid_argument("make_quadratic_scm: Q_i has wrong size");
    if (p > 0) {
      if (!q[i].isApprox(q[i].transpose(), 1e-12)) throw std::invalid_argument("make_quadratic_scm: Q_i not symmetric");
      Eigen::LLT<Mat> llt(q[i]);
      if (llt.info() != Eigen::Success) throw std::invalid_argument("make_quadratic_scm: Q_i not positive definite");
    }
    if (!(noise_vars(i) > 0.0)) throw std::invalid_argument("make_quadratic_scm: noise variances must be positive");
  }
  s.q = q;
  s.noise_vars = noise_vars;
  return s;
}

Scm sample_linear_scm(const Dag& dag, Rng& rng) {
  const int n = dag.size();
  Mat a = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (dag.has_edge(j, i)) a(i, j) = signed_uniform(rng, 0.5, 1.5);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(rng, 0.5, 1.5);
  return make_linear_scm(dag, a, v);
}

Scm sample_quadratic_scm(const Dag& dag, Rng& rng) {
  const int n = dag.size();
  std::vector<Mat> q(n);
  for (int i = 0; i < n; ++i) {
    const int p = static_cast<int>(dag.parents(i).size());
    if (p == 0) {
      q[i] = Mat(0, 0);
      continue;
    }
    Mat b = standard_normal_matrix(p, p, rng);
    Mat qi = (b.transpose() * b + Mat::Identity(p, p)) / static_cast<double>(p);
    q[i] = 0.5 * (qi + qi.transpose());
  }
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(rng, 0.5, 1.5);
  return make_quadratic_scm(dag, q, v);
}

InterventionSpec hard_intervention(int target, double noise_var_multiplier) {
  if (!(noise_var_multiplier > 0.0)) throw std::invalid_argument("hard_intervention: multiplier must be positive");
  return InterventionSpec{target, InterventionKind::hard, 0.0, noise_var_multiplier};
}

InterventionSpec default_hard_intervention(const Scm& scm, int target) {
  check_target(scm, target);
  return hard_intervention(target, scm.family == ScmFamily::linear ? kLinearHardVarMultiplier : kQuadraticHardVarMultiplier);
}

InterventionSpec default_soft_intervention(const Scm& scm, int target) {
  check_target(scm, target);
  InterventionSpec s{target, InterventionKind::soft, kSoftMechanismScale, 1.0};
  if (scm.family == ScmFamily::quadratic)
    s.noise_var_multiplier = kQuadraticHardVarMultiplier;
  else if (scm.parents[target].empty())
    s.noise_var_multiplier = kLinearHardVarMultiplier;
  return s;
}

EnvModel::EnvModel(std::shared_ptr<const Scm> scm)
    : scm_(std::move(scm)), scale_(Vec::Ones(scm_->size())), var_(scm_->noise_vars) {}

EnvModel apply_intervention(const EnvModel& base, const InterventionSpec& spec) {
  check_target(base.scm(), spec.target);
  if (spec.kind == InterventionKind::hard && spec.mechanism_scale != 0.0)
    throw std::invalid_argument("apply_intervention: hard interventions must remove the mechanism");
  if (!(spec.noise_var_multiplier > 0.0)) throw std::invalid_argument("apply_intervention: noise multiplier must be positive");
  EnvModel out = base;
  out.scale_(spec.target) = spec.mechanism_scale;
  out.var_(spec.target) = base.scm().noise_vars(spec.target) * spec.noise_var_multiplier;
  bool present = false;
  for (int t : out.targets_) present = present || t == spec.target;
  if (!present) out.targets_.push_back(spec.target);
  return out;
}

Mat EnvModel::sample(int n_s, Rng& rng) const {
  if (n_s < 1) throw std::invalid_argument("EnvModel::sample: n_s must be >= 1");
  const int n = size();
  const std::vector<int> order = scm_->dag.topological_order();
  Vec sd = var_.cwiseSqrt();
  Mat out(n_s, n);
  Vec z = Vec::Zero(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < n_s; ++s) {
    for (int i : order) {
      double f = scale_(i) != 0.0 ? scale_(i) * scm_->mechanism(i, z) : 0.0;
      z(i) = f + sd(i) * normal(rng);
    }
    out.row(s) = z.transpose();
  }
  return out;
}

Vec EnvModel::score(const Vec& z) const {
  const int n = size();
  Vec s(n);
  Vec grad;
  for (int j = 0; j < n; ++j) {
    double c = scale_(j);
    double resid = z(j) - (c != 0.0 ? c * scm_->mechanism(j, z) : 0.0);
    s(j) = -resid / var_(j);
  }
  for (int j = 0; j < n; ++j) {
    double c = scale_(j);
    const auto& pa = scm_->parents[j];
    if (c == 0.0 || pa.empty()) continue;
    double resid = z(j) - c * scm_->mechanism(j, z);
    scm_->mechanism_gradient(j, z, grad);
    for (std::size_t k = 0; k < pa.size(); ++k) s(pa[k]) += c * grad(static_cast<Eigen::Index>(k)) * resid / var_(j);
  }
  return s;
}

Mat EnvModel::scores(const Mat& z) const {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) out.row(r) = score(z.row(r).transpose()).transpose();
  return out;
}

double EnvModel::log_conditional(int i, const Vec& z) const {
  double c = scale_(i);
  const auto& pa = scm_->parents[i];
  if (scm_->family == ScmFamily::quadratic && c != 0.0 && !pa.empty() && parents_all_zero(pa, z))
    throw std::domain_error("quadratic conditional of node " + std::to_string(i) + " evaluated at a zero parent vector");
  double resid = z(i) - (c != 0.0 ? c * scm_->mechanism(i, z) : 0.0);
  return -0.5 * std::log(2.0 * std::numbers::pi * var_(i)) - resid * resid / (2.0 * var_(i));
}

double EnvModel::log_density(const Vec& z) const {
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) acc += log_conditional(i, z);
  return acc;
}

Mat EnvModel::covariance() const {
  if (scm_->family != ScmFamily::linear) throw std::logic_error("EnvModel::covariance: linear family only");
  const int n = size();
  Mat b = Mat::Identity(n, n) - scale_.asDiagonal() * scm_->weights;
  Mat binv = b.partialPivLu().inverse();
  return binv * var_.asDiagonal() * binv.transpose();
}

Mat EnvModel::precision() const {
  if (scm_->family != ScmFamily::linear) throw std::logic_error("EnvModel::precision: linear family only");
  const int n = size();
  Mat b = Mat::Identity(n, n) - scale_.asDiagonal() * scm_->weights;
  return b.transpose() * var_.cwiseInverse().asDiagonal() * b;
}

EnvironmentSet::EnvironmentSet(std::shared_ptr<const Scm> scm, std::vector<EnvModel> envs, Permutation targets,
                               Permutation second_targets, bool coupled)
    : scm_(std::move(scm)),
      envs_(std::move(envs)),
      targets_(std::move(targets)),
      second_targets_(std::move(second_targets)),
      coupled_(coupled) {
  const int n = scm_->size();
  if (!is_permutation(targets_, n)) throw std::invalid_argument("EnvironmentSet: targets must be a permutation");
  if (!second_targets_.empty() && !is_permutation(second_targets_, n))
    throw std::invalid_argument("EnvironmentSet: second targets must be a permutation");
  std::size_t expected = 1 + n + (second_targets_.empty() ? 0 : n);
  if (envs_.size() != expected) throw std::invalid_argument("EnvironmentSet: wrong environment count");
}

EnvironmentSet build_environment_set(std::shared_ptr<const Scm> scm, const EnvironmentSetOptions& opts, Rng& rng) {
  if (opts.envs_per_node != 1 && opts.envs_per_node != 2)
    throw std::invalid_argument("build_environment_set: envs_per_node must be 1 or 2");
  if (opts.envs_per_node == 2 && opts.kind != InterventionKind::hard)
    throw std::invalid_argument("build_environment_set: two interventions per node must be hard");
  const int n = scm->size();
  EnvModel obs(scm);
  Permutation targets = random_permutation(n, rng);
  Permutation second;
  if (opts.envs_per_node == 2) second = opts.coupled ? targets : random_permutation(n, rng);

  auto first_spec = [&](int t) {
    if (opts.kind == InterventionKind::soft) return default_soft_intervention(*scm, t);
    if (opts.hard_var_multiplier > 0.0) return hard_intervention(t, opts.hard_var_multiplier);
    return default_hard_intervention(*scm, t);
  };
  std::vector<EnvModel> envs{obs};
  for (int m = 0; m < n; ++m) envs.push_back(apply_intervention(obs, first_spec(targets[m])));
  for (int m = 0; m < static_cast<int>(second.size()); ++m)
    envs.push_back(apply_intervention(obs, hard_intervention(second[m], opts.second_var_multiplier)));
  return EnvironmentSet(scm, std::move(envs), std::move(targets), std::move(second), opts.coupled);
}

FullRankCheck check_assumption_full_rank(const EnvironmentSet& envs, int m, int n_s, Rng& rng, double lambda_eigv) {
  const int n = envs.n();
  if (m < 0 || m >= n) throw std::invalid_argument("check_assumption_full_rank: environment index out of range");
  Mat z = envs.observational().sample(n_s, rng);
  Mat diff = envs.observational().scores(z) - envs.first(m).scores(z);
  Mat r = linalg::second_moment(diff);
  FullRankCheck out;
  out.rank = static_cast<int>(linalg::column_space_basis(r, lambda_eigv).cols());
  out.pa_plus_size = 1 + static_cast<int>(envs.scm().parents[envs.oracle_targets()[m]].size());
  out.pass = out.rank == out.pa_plus_size;
  return out;
}

bool ratio_condition_holds(const EnvModel& obs, const EnvModel& intervened, int i, int k, int n_points, Rng& rng) {
  const auto& pa = obs.scm().parents[i];
  Eigen::Index kk = -1;
  for (std::size_t a = 0; a < pa.size(); ++a)
    if (pa[a] == k) kk = static_cast<Eigen::Index>(a);
  if (kk < 0) throw std::invalid_argument("ratio_condition_holds: k is not a parent of i");
  Mat z = obs.sample(n_points, rng);
  // d/dz log p_i = -n/v along z_i and c f'(z) n / v along parents
  auto partials = [&](const EnvModel& e, const Vec& zz, double& di, double& dk) {
    Vec grad;
    double c = e.mechanism_scale(i);
    double resid = zz(i) - (c != 0.0 ? c * e.scm().mechanism(i, zz) : 0.0);
    di = -resid / e.noise_var(i);
    dk = 0.0;
    if (c != 0.0) {
      e.scm().mechanism_gradient(i, zz, grad);
      dk = c * grad(kk) * resid / e.noise_var(i);
    }
  };
  std::vector<double> ratios;
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    Vec zz = z.row(s).transpose();
    double pi_, pk, qi, qk;
    partials(obs, zz, pi_, pk);
    partials(intervened, zz, qi, qk);
    double den = pi_ - qi;
    if (std::abs(den) < 1e-12) continue;
    ratios.push_back((pk - qk) / den);
  }
  if (ratios.size() < 2) return false;
  double lo = ratios[0], hi = ratios[0];
  for (double r : ratios) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return hi - lo > 1e-8 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
}

}  // namespace crl
