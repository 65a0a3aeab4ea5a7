#pragma once

#include "crl/graph.hpp"
#include "crl/types.hpp"

namespace crl {

// Maximum-weight perfect matching on a square matrix; result[i] is the
// column assigned to row i.
Permutation max_weight_assignment(const Mat& w);
// Reference solver by enumerating all permutations (n <= 9).
Permutation max_weight_assignment_exhaustive(const Mat& w);

struct MccResult {
  double value = 0.0;
  Permutation perm;  // z_hat column perm[i] is matched to z column i
};
// Mean absolute Pearson correlation under the best one-to-one matching.
MccResult mcc(const Mat& z, const Mat& z_hat);

// Structural Hamming distance; a reversed edge counts once.
int shd(const Dag& truth, const Dag& est);
// Estimated node perm[i] is compared against true node i.
int shd(const Dag& truth, const Dag& est, const Permutation& perm);

struct TransformErrors {
  double l_scale = 0.0;
  double l_pa = 0.0;
  double l_sur = 0.0;
};
// C = H G with rows aligned by perm (row perm[i] of C becomes row i) and each
// row divided by its diagonal entry; spectral norms of C - I, C .* (1 - L_pa)
// and C .* (1 - L_sur).
TransformErrors effective_transform_errors(const Mat& h, const Mat& g, const Dag& dag, const Permutation& perm);
TransformErrors effective_transform_errors(const Mat& hg, const Dag& dag, const Permutation& perm);

// ||Z - Z_hat'||_F / ||Z||_F where Z_hat' is Z_hat matched by mcc and scaled
// per column by least squares (which also fixes the sign).
double normalized_latent_error(const Mat& z, const Mat& z_hat);
double normalized_latent_error(const Mat& z, const Mat& z_hat, const Permutation& perm);

struct MetricReport {
  double mcc = 0.0;
  int shd = 0;
  int shd_tc = 0;
  double l_scale = 0.0;
  double l_pa = 0.0;
  double l_sur = 0.0;
  double l_norm = 0.0;
  Permutation perm;
};

}  // namespace crl
