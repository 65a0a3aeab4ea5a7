#pragma once

#include "crl/rng.hpp"
#include "crl/types.hpp"

namespace crl {

enum class MixKind { linear, tanh_glm };

// X = G Z (linear) or X = tanh(G Z) (tanh-GLM); G is d x n with full column rank.
struct Mixing {
  MixKind kind = MixKind::linear;
  Mat G;
  Mat G_pinv;

  int n() const { return static_cast<int>(G.cols()); }
  int d() const { return static_cast<int>(G.rows()); }
};

inline constexpr double kMinMixingSingularValue = 1e-6;

Mixing make_mixing(MixKind kind, const Mat& g);
// Standard normal entries, resampled until sigma_min(G) > 1e-6.
Mixing sample_mixing(int n, int d, Rng& rng, MixKind kind = MixKind::linear);

// tanh-GLM only: shrink rows of G so that the given quantile of |(G z)_i|
// over the rows of z does not exceed atanh(saturation).
void limit_saturation(Mixing& mix, const Mat& z, double quantile = 0.999, double saturation = 0.999);

Vec forward(const Mixing& mix, const Vec& z);
Mat forward_rows(const Mixing& mix, const Mat& z);
// Throws std::domain_error for tanh-GLM inputs with |x_i| >= 1.
Vec inverse(const Mixing& mix, const Vec& x);
Mat inverse_rows(const Mixing& mix, const Mat& x);

// d x n Jacobian of g at z
Mat jacobian(const Mixing& mix, const Vec& z);

// [J_g(z)^dagger]^T * latent_diff: observed-space score difference at x = g(z).
Vec score_diff_pushforward(const Mixing& mix, const Vec& latent_diff, const Vec& z);
// Row-wise version; latent_diffs and z are n_s x n.
Mat score_diff_pushforward_rows(const Mixing& mix, const Mat& latent_diffs, const Mat& z);

// Encoder z_hat = H x with decoder H^dagger z_hat.
struct LinearEncoder {
  Mat H;
  Mat H_pinv;
  explicit LinearEncoder(const Mat& h);
  Vec encode(const Vec& x) const { return H * x; }
  Vec decode(const Vec& z_hat) const { return H_pinv * z_hat; }
};

// Encoder z_hat = H atanh(x) with decoder tanh(H^dagger z_hat).
struct TanhGlmEncoder {
  Mat H;
  Mat H_pinv;
  explicit TanhGlmEncoder(const Mat& h);
  Vec encode(const Vec& x) const;
  Vec decode(const Vec& z_hat) const;
  Mat encode_rows(const Mat& x) const;
};

// [J_{h^-1}(z_hat)]^T * observed_diff with z_hat = h(x).
Vec score_diff_pullback(const LinearEncoder& enc, const Vec& observed_diff, const Vec& x);
Vec score_diff_pullback(const TanhGlmEncoder& enc, const Vec& observed_diff, const Vec& x);
Mat score_diff_pullback_rows(const LinearEncoder& enc, const Mat& observed_diffs);
Mat score_diff_pullback_rows(const TanhGlmEncoder& enc, const Mat& observed_diffs, const Mat& x);

// Elementwise atanh with domain check.
Mat atanh_rows(const Mat& x);

}  // namespace crl
