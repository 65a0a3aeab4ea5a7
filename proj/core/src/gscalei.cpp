#include "crl/gscalei.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crl/linalg.hpp"
#include "crl/mixing.hpp"

namespace crl::gscalei {

namespace {

// Quantities shared by the loss, its gradient and D_t for a fixed H.
struct Forward {
  Mat p;   // (H H^T)^{-1}
  Mat b;   // P H = (H^dagger)^T
  Mat zh;  // Y H^T
  Mat t;   // tanh(Y H^dagger H), the decoded samples
  Mat w;   // 1 - t^2
};

Forward forward_pass(const Mat& h, const Mat& y) {
  Forward f;
  Mat s = h * h.transpose();
  Eigen::LLT<Mat> llt(s);
  if (llt.info() != Eigen::Success || linalg::numerical_rank(s, 1e-14) < h.rows())
    throw std::domain_error("gscalei: encoder parameter is rank deficient");
  f.p = llt.solve(Mat::Identity(h.rows(), h.rows()));
  f.b = f.p * h;
  f.zh = y * h.transpose();
  const Mat a = f.zh * f.b;
  f.t = a.array().tanh().matrix();
  // sech^2 avoids the cancellation in 1 - tanh^2 near saturation
  f.w = a.array().cosh().square().inverse().matrix();
  return f;
}

Mat dt_from_forward(const Forward& f, const std::vector<Mat>& diffs, double eps, bool smooth) {
  const Eigen::Index n = f.b.rows();
  Mat dt = Mat::Zero(n, static_cast<Eigen::Index>(diffs.size()));
  for (std::size_t m = 0; m < diffs.size(); ++m) {
    if (diffs[m].size() == 0) continue;
    Mat v = (f.w.array() * diffs[m].array()).matrix() * f.b.transpose();
    if (smooth)
      dt.col(static_cast<Eigen::Index>(m)) = (v.array().square() + eps * eps).sqrt().matrix().colwise().mean().transpose();
    else
      dt.col(static_cast<Eigen::Index>(m)) = v.cwiseAbs().colwise().mean().transpose();
  }
  return dt;
}

LossValue loss_impl(const Mat& h, const std::vector<Mat>& diffs, const Mat& x, const Mat& y, const Config& cfg,
                    bool smooth, Mat* grad) {
  const Eigen::Index n = h.rows();
  const double N = static_cast<double>(x.rows());
  if (diffs.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("gscalei::loss: need one diff per latent");
  for (const Mat& dm : diffs)
    if (dm.size() != 0 && (dm.rows() != x.rows() || dm.cols() != x.cols()))
      throw std::invalid_argument("gscalei::loss: diff shape mismatch");
  if (grad && !smooth) throw std::invalid_argument("gscalei::loss: gradient needs the smoothed objective");

  Forward f = forward_pass(h, y);
  LossValue out;
  Mat resid = f.t - x;
  out.recon = cfg.lambda * resid.squaredNorm() / N;
  out.dt = dt_from_forward(f, diffs, cfg.eps, smooth);

  Mat gd = Mat::Zero(n, n);
  for (Eigen::Index m = 0; m < n; ++m) {
    if (diffs[m].size() == 0) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      double e = out.dt(i, m) - (i == m ? 1.0 : 0.0);
      if (cfg.norm == LossNorm::frobenius) {
        out.score += e * e;
        gd(i, m) = 2.0 * e;
      } else if (smooth) {
        double a = std::sqrt(e * e + cfg.eps * cfg.eps);
        out.score += a;
        gd(i, m) = e / a;
      } else {
        out.score += std::abs(e);
      }
    }
  }
  out.total = out.score + out.recon;
  if (!grad) return out;

  Mat gamma_b = Mat::Zero(n, h.cols());
  Mat dw = Mat::Zero(x.rows(), x.cols());
  for (Eigen::Index m = 0; m < n; ++m) {
    const Mat& delta = diffs[m];
    if (delta.size() == 0) continue;
    Mat u = (f.w.array() * delta.array()).matrix();
    Mat v = u * f.b.transpose();
    // d loss / d v = gd(i,m) * v / sqrt(v^2 + eps^2) / N
    Mat omega = (v.array() / (v.array().square() + cfg.eps * cfg.eps).sqrt()).matrix();
    for (Eigen::Index i = 0; i < n; ++i) omega.col(i) *= gd(i, m) / N;
    gamma_b.noalias() += omega.transpose() * u;
    dw.array() += (omega * f.b).array() * delta.array();
  }
  Mat dt_mat = (2.0 * cfg.lambda / N) * resid;
  dt_mat.array() -= 2.0 * f.t.array() * dw.array();
  Mat da = (dt_mat.array() * f.w.array()).matrix();
  gamma_b.noalias() += f.zh.transpose() * da;
  Mat dzh = da * f.b.transpose();
  Mat pg = f.p * gamma_b;
  *grad = dzh.transpose() * y + pg - pg * f.b.transpose() * h - f.b * gamma_b.transpose() * f.b;
  return out;
}

double dt_deviation(const Mat& dt) {
  return (dt - Mat::Identity(dt.rows(), dt.cols())).norm();
}

Mat random_orthogonal(int n, Rng& rng) {
  Eigen::HouseholderQR<Mat> qr(standard_normal_matrix(n, n, rng));
  return qr.householderQ() * Mat::Identity(n, n);
}

}  // namespace

int default_steps(int n) { return n <= 5 ? 30000 : 40000; }

Mat compute_dt(const Mat& h, const std::vector<Mat>& diffs, const Mat& x) {
  Forward f = forward_pass(h, atanh_rows(x));
  return dt_from_forward(f, diffs, 0.0, false);
}

LossValue loss(const Mat& h, const std::vector<Mat>& diffs, const Mat& x, const Config& cfg, bool smooth, Mat* grad) {
  return loss_impl(h, diffs, x, atanh_rows(x), cfg, smooth, grad);
}

Mat initial_encoder(const Mat& x, int n) {
  Mat y = atanh_rows(x);
  if (y.rows() < n || y.cols() < n) throw std::invalid_argument("initial_encoder: not enough samples or dimensions");
  Eigen::JacobiSVD<Mat> svd(y, Eigen::ComputeThinV);
  Mat h = svd.matrixV().leftCols(n).transpose();
  for (int i = 0; i < n; ++i) {
    Eigen::Index idx;
    h.row(i).cwiseAbs().maxCoeff(&idx);
    if (h(i, idx) < 0) h.row(i) *= -1.0;
  }
  return h;
}

FitResult fit_coupled(const Mat& x, const std::vector<Mat>& coupled_diffs, const Config& cfg, Rng& rng, const Mat* init) {
  const int n = static_cast<int>(coupled_diffs.size());
  if (n < 1) throw std::invalid_argument("fit_coupled: no coupled pairs");
  if (!(cfg.lambda > 0.0) || !(cfg.eps > 0.0)) throw std::invalid_argument("fit_coupled: lambda and eps must be positive");
  const Mat y = atanh_rows(x);
  const Mat h0 = init ? *init : initial_encoder(x, n);
  if (h0.rows() != n || h0.cols() != x.cols()) throw std::invalid_argument("fit_coupled: initial encoder has wrong shape");

  FitResult res;
  bool have = false;
  int attempts = 0;
  for (int attempt = 0; attempt <= cfg.max_restarts + 1; ++attempt) {
    if (have && (res.loss <= cfg.restart_tol || attempt > cfg.max_restarts)) break;
    ++attempts;
    Mat h = attempt == 0 ? h0 : Mat(random_orthogonal(n, rng) * h0);
    Mat best_h = h;
    double best = std::numeric_limits<double>::infinity();
    Mat ms = Mat::Zero(h.rows(), h.cols());
    Mat g;
    std::vector<double> best_hist;
    std::vector<TraceRow> trace;
    bool diverged = false;
    int step = 0;
    try {
      for (; step < cfg.steps; ++step) {
        LossValue lv = loss_impl(h, coupled_diffs, x, y, cfg, true, &g);
        if (!std::isfinite(lv.total) || !g.allFinite()) {
          diverged = true;
          break;
        }
        if (lv.total < best) {
          best = lv.total;
          best_h = h;
        }
        if (cfg.trace_every > 0 && step % cfg.trace_every == 0) {
          LossValue ex = loss_impl(h, coupled_diffs, x, y, cfg, false, nullptr);
          trace.push_back({step, ex.total, ex.recon, dt_deviation(ex.dt)});
        }
        best_hist.push_back(best);
        const int w = cfg.early_stop_window;
        if (w > 0 && step >= w && best_hist[step - w] - best < cfg.early_stop_tol) {
          ++step;
          break;
        }
        ms = cfg.rms_decay * ms + (1.0 - cfg.rms_decay) * g.cwiseAbs2();
        h.array() -= cfg.lr * g.array() / (ms.array().sqrt() + cfg.rms_eps);
      }
    } catch (const std::domain_error&) {
      diverged = true;
    }
    if (diverged && !std::isfinite(best)) continue;
    LossValue ex = loss_impl(best_h, coupled_diffs, x, y, cfg, false, nullptr);
    if (have && !(ex.total < res.loss)) continue;
    have = true;
    res.H = best_h;
    res.z_hat = y * best_h.transpose();
    res.loss = ex.total;
    res.score_loss = ex.score;
    res.recon_loss = ex.recon;
    res.dt = ex.dt;
    res.steps = step;
    res.trace = std::move(trace);
  }
  res.restarts = attempts - 1;
  if (have) return res;
  throw std::domain_error("fit_coupled: non-finite loss after re-initialization");
}

Dag stage_g2_graph(const Mat& h, const std::vector<Mat>& obs_int_diffs, const Mat& x, double lambda_g) {
  Mat d = compute_dt(h, obs_int_diffs, x);
  const Eigen::Index n = d.rows();
  BoolMat raw = BoolMat::Constant(n, n, false);
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != m && d(i, m) >= lambda_g) raw(m, i) = true;
  return orient_by_ancestor_counts(raw);
}

bool coupling_constraints_hold(const Mat& d, const Mat& d_tilde, const Permutation& coupling, double lambda_g) {
  const Eigen::Index n = d.rows();
  for (Eigen::Index m = 0; m < n; ++m)
    for (Eigen::Index i = 0; i < n; ++i)
      if ((d(i, m) >= lambda_g) != (d_tilde(i, coupling[m]) >= lambda_g)) return false;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      bool both = d(i, j) >= lambda_g && d(j, i) >= lambda_g;
      if (both != (i == j)) return false;
    }
  return true;
}

NoFeasibleCoupling::NoFeasibleCoupling(UncoupledResult best, double best_loss)
    : std::runtime_error("fit_uncoupled: no coupling satisfies the indicator constraints (best loss " +
                         std::to_string(best_loss) + ")"),
      best_(std::move(best)),
      best_loss_(best_loss) {}

UncoupledResult fit_uncoupled(const Mat& x, const std::vector<Mat>& first_diffs, const std::vector<Mat>& second_diffs,
                              const Config& cfg, Rng& rng) {
  const int n = static_cast<int>(first_diffs.size());
  if (static_cast<int>(second_diffs.size()) != n) throw std::invalid_argument("fit_uncoupled: set sizes differ");
  if (n > 7) throw std::length_error("fit_uncoupled: exhaustive coupling search limited to n <= 7");
  const std::uint64_t base = rng();
  UncoupledResult best;
  UncoupledResult best_any;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_any_loss = std::numeric_limits<double>::infinity();
  std::vector<double> losses;
  std::vector<bool> feas;
  Permutation pi = identity_permutation(n);
  std::uint64_t idx = 0;
  do {
    std::vector<Mat> coupled(n);
    for (int m = 0; m < n; ++m) coupled[m] = first_diffs[m] - second_diffs[pi[m]];
    Rng cand_rng = make_rng(derive_seed(base, idx++));
    FitResult fit = fit_coupled(x, coupled, cfg, cand_rng);
    Mat d = compute_dt(fit.H, first_diffs, x);
    Mat dtl = compute_dt(fit.H, second_diffs, x);
    bool ok = coupling_constraints_hold(d, dtl, pi, cfg.lambda_g);
    losses.push_back(fit.loss);
    feas.push_back(ok);
    if (ok && fit.loss < best_loss) {
      best_loss = fit.loss;
      best.fit = fit;
      best.coupling = pi;
      best.feasible = true;
    }
    if (fit.loss < best_any_loss) {
      best_any_loss = fit.loss;
      best_any.fit = fit;
      best_any.coupling = pi;
    }
  } while (std::next_permutation(pi.begin(), pi.end()));
  if (!best.feasible) {
    best_any.candidate_losses = losses;
    best_any.candidate_feasible = feas;
    throw NoFeasibleCoupling(std::move(best_any), best_any_loss);
  }
  best.candidate_losses = std::move(losses);
  best.candidate_feasible = std::move(feas);
  return best;
}

PartialResult partial_identify_node(const Mat& x, const Mat& pair_diff, int n, int m, const Config& cfg, Rng& rng) {
  if (m < 0 || m >= n) throw std::invalid_argument("partial_identify_node: m out of range");
  std::vector<Mat> diffs(n);
  diffs[m] = pair_diff;
  FitResult fit = fit_coupled(x, diffs, cfg, rng);
  PartialResult r;
  r.H = fit.H;
  r.h = fit.H.row(m).transpose();
  r.loss = fit.loss;
  return r;
}

}  // namespace crl::gscalei
