#pragma once

#include <vector>

#include "crl/graph.hpp"
#include "crl/rng.hpp"
#include "crl/types.hpp"

namespace crl::lscalei {

// Graph thresholds per setting (perfect / noisy scores).
inline constexpr double kLambdaLinearHardPerfect = 1e-3;
inline constexpr double kLambdaLinearHardNoisy = 0.1;
inline constexpr double kLambdaLinearSoftPerfect = 1e-4;
inline constexpr double kLambdaLinearSoftNoisy = 1e-3;
inline constexpr double kLambdaQuadraticPerfect = 1e-3;
inline constexpr double kLambdaQuadraticNoisy = 0.1;
inline constexpr double kLambdaEigv = 0.01;

enum class Mode { soft, hard };

struct CrlEstimate {
  Mat H;      // rows are encoder rows in the (reduced) observed coordinates
  Dag g_hat;  // node m corresponds to environment m
  Mat z_hat;  // samples * H^T
};

// R^m = (1/n_s) sum_s d_s d_s^T for each environment's diff matrix.
std::vector<Mat> compute_correlations(const std::vector<Mat>& diffs);

// Row m is the unit top eigenvector of R^m.
Mat stage_l1_encoder(const std::vector<Mat>& correlations);

// (i, m) entry: mean over samples of |[pullback of diff m through H]_i|.
Mat mean_abs_latent_diffs(const Mat& h, const std::vector<Mat>& diffs);

// Raw parent sets {i != m : entry (i,m) >= lambda_g}, oriented by ancestor counts.
Dag graph_from_score_changes(const Mat& mean_abs, double lambda_g);
Dag stage_l2_graph(const Mat& h, const std::vector<Mat>& diffs, double lambda_g);

struct UnmixResult {
  Mat H;
  Dag g_hat;
};
// env_covariances[m]: covariance of the (reduced) observations in environment m.
// Rows refined in topological order of g_hat, then the graph is re-estimated.
UnmixResult stage_l3_unmix(const Mat& h, const Dag& g_hat, const std::vector<Mat>& env_covariances,
                           const std::vector<Mat>& diffs, double lambda_g);

struct Options {
  Mode mode = Mode::hard;
  double lambda_g = kLambdaLinearHardPerfect;
};

// Stages L1-L3 (L3 only for hard interventions). x: evaluation samples,
// diffs[m]: s^m - s at x, env_covariances[m]: covariance of environment m.
CrlEstimate run(const Mat& x, const std::vector<Mat>& diffs, const std::vector<Mat>& env_covariances, const Options& opts);

struct FullRankResult {
  Dag g_hat;
  Mat H;
};
// Graph from subspace-intersection dimensions along order; encoder row m from
// the intersection of colspace(R^k) over k in Ch(m) + {m}.
FullRankResult full_rank_recovery(const std::vector<Mat>& correlations, const std::vector<int>& order,
                                    double lambda_eigv = kLambdaEigv);

// h = R y for y uniform on the unit sphere.
Vec partial_recover_node(const Mat& r, Rng& rng);

}  // namespace crl::lscalei
