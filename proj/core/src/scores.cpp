#include "crl/scores.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "crl/linalg.hpp"

namespace crl {

void ScoreDiffDataset::validate() const {
  if (pairs.size() != diffs.size()) throw std::invalid_argument("ScoreDiffDataset: pair/diff count mismatch");
  if (!x.allFinite()) throw std::invalid_argument("ScoreDiffDataset: non-finite sample");
  for (const Mat& d : diffs) {
    if (d.rows() != x.rows() || d.cols() != x.cols())
      throw std::invalid_argument("ScoreDiffDataset: diff shape does not match samples");
    if (!d.allFinite()) throw std::invalid_argument("ScoreDiffDataset: non-finite score difference");
  }
}

const Mat& ScoreDiffDataset::diff(int a, int b) const {
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (pairs[k].a == a && pairs[k].b == b) return diffs[k];
  throw std::out_of_range("ScoreDiffDataset: no diff for pair (" + std::to_string(a) + "," + std::to_string(b) + ")");
}

Mat oracle_observed_scores(const EnvModel& env, const Mixing& mix, const Mat& z) {
  return score_diff_pushforward_rows(mix, env.scores(z), z);
}

Mat oracle_score_diff_latent(const EnvModel& a, const EnvModel& b, const Mixing& mix, const Mat& z) {
  return score_diff_pushforward_rows(mix, a.scores(z) - b.scores(z), z);
}

Mat oracle_score_diff(const EnvModel& a, const EnvModel& b, const Mixing& mix, const Mat& x) {
  return oracle_score_diff_latent(a, b, mix, inverse_rows(mix, x));
}

Mat gaussian_scores(const Mat& env_samples, const Mat& x_eval) {
  if (env_samples.cols() != x_eval.cols()) throw std::invalid_argument("gaussian_scores: dimension mismatch");
  if (env_samples.rows() < env_samples.cols())
    throw std::invalid_argument("gaussian_scores: fewer samples than dimensions");
  Mat theta = linalg::pinv(linalg::covariance(env_samples));
  return -(x_eval * theta);  // theta is symmetric
}

Mat gaussian_score_diff(const Mat& samples_a, const Mat& samples_b, const Mat& x_eval) {
  if (samples_a.cols() != x_eval.cols() || samples_b.cols() != x_eval.cols())
    throw std::invalid_argument("gaussian_score_diff: dimension mismatch");
  if (samples_a.rows() < samples_a.cols() || samples_b.rows() < samples_b.cols())
    throw std::invalid_argument("gaussian_score_diff: fewer samples than dimensions");
  Mat theta_a = linalg::pinv(linalg::covariance(samples_a));
  Mat theta_b = linalg::pinv(linalg::covariance(samples_b));
  return -(x_eval * (theta_a - theta_b));
}

Mat noisy_scores(const Mat& scores, double sigma2, Rng& rng) {
  if (sigma2 < 0.0) throw std::invalid_argument("noisy_scores: sigma2 must be >= 0");
  const double sd = std::sqrt(sigma2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r)
    for (Eigen::Index c = 0; c < scores.cols(); ++c) out(r, c) = scores(r, c) * (1.0 + sd * normal(rng));
  return out;
}

double snr_db(const Mat& clean, const Mat& perturbed) {
  double signal = clean.squaredNorm();
  double noise = (perturbed - clean).squaredNorm();
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / noise);
}

Mat reduction_basis(const Mat& x, int n) {
  if (x.rows() < n) throw std::invalid_argument("reduce_dimension: fewer samples than latent dimension");
  Mat cov = linalg::covariance(x);
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  const Vec& ev = es.eigenvalues();
  const Eigen::Index d = ev.size();
  if (n > d) throw std::invalid_argument("reduce_dimension: n exceeds observed dimension");
  double top = ev(d - 1);
  if (!(top > 0.0) || ev(d - n) <= 1e-10 * top)
    throw std::domain_error("reduce_dimension: sample covariance has rank below n");
  Mat basis(d, n);
  for (int k = 0; k < n; ++k) {
    Vec v = es.eigenvectors().col(d - 1 - k);
    Eigen::Index idx;
    v.cwiseAbs().maxCoeff(&idx);
    basis.col(k) = v(idx) < 0 ? Vec(-v) : v;
  }
  return basis;
}

Reduction reduce_dimension(const Mat& x, const std::vector<Mat>& diffs, int n) {
  Reduction r;
  r.basis = reduction_basis(x, n);
  r.x = x * r.basis;
  r.diffs.reserve(diffs.size());
  for (const Mat& d : diffs) {
    if (d.cols() != x.cols()) throw std::invalid_argument("reduce_dimension: diff dimension mismatch");
    r.diffs.push_back(d * r.basis);
  }
  return r;
}

Mat extrapolate_score_diff(const Mat& d1, const Mat& d2) {
  if (d1.rows() != d2.rows() || d1.cols() != d2.cols()) throw std::invalid_argument("extrapolate_score_diff: shape mismatch");
  return d1 + d2;
}

}  // namespace crl
