#include "crl/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crl/linalg.hpp"

namespace crl {

namespace {

void check_tanh_domain(const Vec& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(std::abs(x(i)) < 1.0)) throw std::domain_error("tanh-GLM inverse: |x_i| >= 1 is outside the image");
}

}  // namespace

Mixing make_mixing(MixKind kind, const Mat& g) {
  if (g.rows() < g.cols()) throw std::invalid_argument("make_mixing: need d >= n");
  if (linalg::smallest_singular_value(g) <= kMinMixingSingularValue)
    throw std::invalid_argument("make_mixing: G is numerically rank deficient");
  Mixing m;
  m.kind = kind;
  m.G = g;
  m.G_pinv = linalg::pinv(g);
  return m;
}

Mixing sample_mixing(int n, int d, Rng& rng, MixKind kind) {
  if (n < 1) throw std::invalid_argument("sample_mixing: n must be >= 1");
  if (d < n) throw std::invalid_argument("sample_mixing: d must be >= n");
  for (;;) {
    Mat g = standard_normal_matrix(d, n, rng);
    if (linalg::smallest_singular_value(g) > kMinMixingSingularValue) return make_mixing(kind, g);
  }
}

void limit_saturation(Mixing& mix, const Mat& z, double quantile, double saturation) {
  if (mix.kind != MixKind::tanh_glm || z.rows() == 0) return;
  const double cap = std::atanh(saturation);
  Mat y = z * mix.G.transpose();
  std::vector<double> col(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index i = 0; i < y.cols(); ++i) {
    for (Eigen::Index s = 0; s < y.rows(); ++s) col[s] = std::abs(y(s, i));
    auto k = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(col.size()))) - 1;
    k = std::min(k, col.size() - 1);
    std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(k), col.end());
    double q = col[k];
    if (q > cap) mix.G.row(i) *= cap / q;
  }
  mix.G_pinv = linalg::pinv(mix.G);
}

Vec forward(const Mixing& mix, const Vec& z) {
  Vec y = mix.G * z;
  if (mix.kind == MixKind::tanh_glm) y = y.array().tanh().matrix();
  return y;
}

Mat forward_rows(const Mixing& mix, const Mat& z) {
  Mat y = z * mix.G.transpose();
  if (mix.kind == MixKind::tanh_glm) y = y.array().tanh().matrix();
  return y;
}

Vec inverse(const Mixing& mix, const Vec& x) {
  if (mix.kind == MixKind::linear) return mix.G_pinv * x;
  check_tanh_domain(x);
  return mix.G_pinv * x.array().atanh().matrix();
}

Mat inverse_rows(const Mixing& mix, const Mat& x) {
  if (mix.kind == MixKind::linear) return x * mix.G_pinv.transpose();
  return atanh_rows(x) * mix.G_pinv.transpose();
}

Mat jacobian(const Mixing& mix, const Vec& z) {
  if (mix.kind == MixKind::linear) return mix.G;
  // sech^2 rather than 1 - tanh^2, which cancels near saturation
  Vec dt = (mix.G * z).array().cosh().square().inverse().matrix();
  return dt.asDiagonal() * mix.G;
}

Vec score_diff_pushforward(const Mixing& mix, const Vec& latent_diff, const Vec& z) {
  if (mix.kind == MixKind::linear) return mix.G_pinv.transpose() * latent_diff;
  Mat j = jacobian(mix, z);
  // J^dagger^T = J (J^T J)^{-1} = Q R^{-T} with J = Q R
  Eigen::HouseholderQR<Mat> qr(j);
  const Mat r = qr.matrixQR().topRows(mix.n()).triangularView<Eigen::Upper>();
  const Vec diag = r.diagonal().cwiseAbs();
  if (!(diag.minCoeff() > 1e-12 * diag.maxCoeff()))
    throw std::domain_error("score_diff_pushforward: Jacobian is numerically rank deficient");
  const Vec y = r.transpose().triangularView<Eigen::Lower>().solve(latent_diff);
  Vec padded = Vec::Zero(mix.d());
  padded.head(mix.n()) = y;
  return qr.householderQ() * padded;
}

Mat score_diff_pushforward_rows(const Mixing& mix, const Mat& latent_diffs, const Mat& z) {
  if (latent_diffs.rows() != z.rows()) throw std::invalid_argument("score_diff_pushforward_rows: row mismatch");
  if (mix.kind == MixKind::linear) return latent_diffs * mix.G_pinv;
  Mat out(z.rows(), mix.d());
  for (Eigen::Index s = 0; s < z.rows(); ++s)
    out.row(s) = score_diff_pushforward(mix, latent_diffs.row(s).transpose(), z.row(s).transpose()).transpose();
  return out;
}

LinearEncoder::LinearEncoder(const Mat& h) : H(h), H_pinv(linalg::pinv(h)) {
  if (linalg::numerical_rank(h) < h.rows()) throw std::domain_error("LinearEncoder: H is not full row rank");
}

TanhGlmEncoder::TanhGlmEncoder(const Mat& h) : H(h), H_pinv(linalg::pinv(h)) {
  if (linalg::numerical_rank(h) < h.rows()) throw std::domain_error("TanhGlmEncoder: H is not full row rank");
}

Vec TanhGlmEncoder::encode(const Vec& x) const {
  check_tanh_domain(x);
  return H * x.array().atanh().matrix();
}

Vec TanhGlmEncoder::decode(const Vec& z_hat) const { return (H_pinv * z_hat).array().tanh().matrix(); }

Mat TanhGlmEncoder::encode_rows(const Mat& x) const { return atanh_rows(x) * H.transpose(); }

Vec score_diff_pullback(const LinearEncoder& enc, const Vec& observed_diff, const Vec& /*x*/) {
  return enc.H_pinv.transpose() * observed_diff;
}

Vec score_diff_pullback(const TanhGlmEncoder& enc, const Vec& observed_diff, const Vec& x) {
  Vec z_hat = enc.encode(x);
  Vec w = (enc.H_pinv * z_hat).array().cosh().square().inverse().matrix();
  Vec scaled = (w.array() * observed_diff.array()).matrix();
  return enc.H_pinv.transpose() * scaled;
}

Mat score_diff_pullback_rows(const LinearEncoder& enc, const Mat& observed_diffs) {
  return observed_diffs * enc.H_pinv;
}

Mat score_diff_pullback_rows(const TanhGlmEncoder& enc, const Mat& observed_diffs, const Mat& x) {
  if (observed_diffs.rows() != x.rows()) throw std::invalid_argument("score_diff_pullback_rows: row mismatch");
  // decoder applied to the encoded samples: tanh(H^dagger H atanh(x))
  Mat y = atanh_rows(x);
  Mat proj = (y * enc.H.transpose()) * enc.H_pinv.transpose();
  Mat scaled = (proj.array().cosh().square().inverse() * observed_diffs.array()).matrix();
  return scaled * enc.H_pinv;
}

Mat atanh_rows(const Mat& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(std::abs(x.data()[i]) < 1.0)) throw std::domain_error("atanh: |x_i| >= 1 is outside the tanh image");
  return x.array().atanh().matrix();
}

}  // namespace crl
