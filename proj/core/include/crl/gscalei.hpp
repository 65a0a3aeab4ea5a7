#pragma once

#include <stdexcept>
#include <vector>

#include "crl/graph.hpp"
#include "crl/rng.hpp"
#include "crl/types.hpp"

namespace crl::gscalei {

enum class LossNorm { frobenius, l11 };

inline constexpr double kLambdaGPerfect = 0.01;
inline constexpr double kLambdaGNoisy = 0.5;

struct Config {
  double lambda = 1.0;      // reconstruction weight
  double eps = 1e-6;        // |x| ~ sqrt(x^2 + eps^2) while training
  int steps = 30000;
  double lr = 1e-3;
  double rms_decay = 0.99;  // RMSprop moving-average factor
  double rms_eps = 1e-8;
  int early_stop_window = 500;
  double early_stop_tol = 1e-9;
  LossNorm norm = LossNorm::frobenius;
  double lambda_g = kLambdaGPerfect;
  int max_restarts = 3;       // extra random-rotation starts while the loss exceeds restart_tol
  double restart_tol = 1e-3;
  int trace_every = 0;  // 0 disables the training trace
};

// Steps per the reference protocol: 3e4 for n <= 5, 4e4 beyond.
int default_steps(int n);

// x: N x d observational samples in (-1,1)^d (evaluation points).
// diffs[m]: N x d observed score differences for column m; an empty matrix
// leaves column m out of the score term.
struct LossValue {
  double total = 0.0;
  double score = 0.0;
  double recon = 0.0;
  Mat dt;
};

// D(h) with exact absolute values: column m is the mean |pullback of diffs[m]|.
Mat compute_dt(const Mat& h, const std::vector<Mat>& diffs, const Mat& x);

// Objective ||D_t(h) - I|| (chosen norm) + lambda E||h^-1(h(x)) - x||^2.
// smooth selects the sqrt(x^2+eps^2) surrogate; grad (n x d) is written when
// non-null and requires smooth = true.
LossValue loss(const Mat& h, const std::vector<Mat>& diffs, const Mat& x, const Config& cfg, bool smooth,
               Mat* grad = nullptr);

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  double recon = 0.0;
  double dt_deviation = 0.0;  // ||D_t - I||_F with exact |x|
};

struct FitResult {
  Mat H;
  Mat z_hat;          // H atanh(x)
  double loss = 0.0;  // exact objective at H
  double score_loss = 0.0;
  double recon_loss = 0.0;
  Mat dt;
  int steps = 0;
  int restarts = 0;
  std::vector<TraceRow> trace;
};

// Top-n right singular vectors of atanh(x) as rows.
Mat initial_encoder(const Mat& x, int n);

FitResult fit_coupled(const Mat& x, const std::vector<Mat>& coupled_diffs, const Config& cfg, Rng& rng,
                      const Mat* init = nullptr);

// Parent sets from D(h) built on observational-vs-interventional diffs.
Dag stage_g2_graph(const Mat& h, const std::vector<Mat>& obs_int_diffs, const Mat& x, double lambda_g);

struct UncoupledResult {
  FitResult fit;
  Permutation coupling;  // first-set env m is paired with second-set env coupling[m]
  bool feasible = false;
  std::vector<double> candidate_losses;  // in lexicographic permutation order
  std::vector<bool> candidate_feasible;
};

class NoFeasibleCoupling : public std::runtime_error {
 public:
  NoFeasibleCoupling(UncoupledResult best, double best_loss);
  const UncoupledResult& best() const { return best_; }
  double best_loss() const { return best_loss_; }

 private:
  UncoupledResult best_;
  double best_loss_;
};

// first_diffs[m] = s^m - s and second_diffs[m] = s~^m - s at x. Tries every
// pairing, checks the indicator constraints on D(h) and D~(h) and returns the
// feasible candidate with the smallest objective. n <= 7.
UncoupledResult fit_uncoupled(const Mat& x, const std::vector<Mat>& first_diffs, const std::vector<Mat>& second_diffs,
                              const Config& cfg, Rng& rng);

// Indicator-constraint check for one candidate pairing.
bool coupling_constraints_hold(const Mat& d, const Mat& d_tilde, const Permutation& coupling, double lambda_g);

struct PartialResult {
  Vec h;     // recovered encoder row (d)
  Mat H;     // full parameter at the optimum
  double loss = 0.0;
};
// Minimizes ||[D_t(h)]_{:,m} - e_m||^2 + lambda * recon for one coupled pair.
PartialResult partial_identify_node(const Mat& x, const Mat& pair_diff, int n, int m, const Config& cfg, Rng& rng);

}  // namespace crl::gscalei
