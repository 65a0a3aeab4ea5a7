#pragma once

#include <string>
#include <vector>

#include "crl/mixing.hpp"
#include "crl/rng.hpp"
#include "crl/scm.hpp"
#include "crl/types.hpp"

namespace crl {

enum class ScoreMode { oracle, gaussian_estimate, noisy_oracle };

// Environment indices follow EnvironmentSet::envs().
struct EnvPair {
  int a = 0;
  int b = 0;
  bool operator==(const EnvPair&) const = default;
};

// Score differences s^a - s^b evaluated at the observational samples x.
struct ScoreDiffDataset {
  Mat x;
  std::vector<EnvPair> pairs;
  std::vector<Mat> diffs;

  // Throws std::invalid_argument on row/column mismatch or non-finite entries.
  void validate() const;
  const Mat& diff(int a, int b) const;
};

// Rows [J_g(z)^dagger]^T s^env(z): observed-space scores at x = g(z).
Mat oracle_observed_scores(const EnvModel& env, const Mixing& mix, const Mat& z);
// Rows [J_g(z)^dagger]^T (s^a(z) - s^b(z)) with z = g^{-1}(x).
Mat oracle_score_diff(const EnvModel& a, const EnvModel& b, const Mixing& mix, const Mat& x);
// Same with the latent samples supplied directly.
Mat oracle_score_diff_latent(const EnvModel& a, const EnvModel& b, const Mixing& mix, const Mat& z);

// -pinv(Cov(samples)) x for every row x of x_eval.
Mat gaussian_scores(const Mat& env_samples, const Mat& x_eval);
Mat gaussian_score_diff(const Mat& samples_a, const Mat& samples_b, const Mat& x_eval);

// scores .* (1 + xi), xi ~ N(0, sigma2) drawn independently per entry.
Mat noisy_scores(const Mat& scores, double sigma2, Rng& rng);
// 10 log10(E||s||^2 / E||s - s_noisy||^2); +inf when the perturbation is zero.
double snr_db(const Mat& clean, const Mat& perturbed);

struct Reduction {
  Mat basis;  // d x n, orthonormal columns
  Mat x;      // n_s x n
  std::vector<Mat> diffs;
};
// Basis of the top-n eigenvectors of the observational sample covariance.
Mat reduction_basis(const Mat& x, int n);
Reduction reduce_dimension(const Mat& x, const std::vector<Mat>& diffs, int n);

Mat extrapolate_score_diff(const Mat& d1, const Mat& d2);

enum class DumpFormat { binary, csv };
// One file per environment pair plus x and a manifest.json. Binary files are
// row-major little-endian float64 without header; shapes live in the manifest.
void write_dataset(const std::string& dir, const ScoreDiffDataset& ds, DumpFormat format = DumpFormat::binary);
ScoreDiffDataset read_dataset(const std::string& dir);

}  // namespace crl
