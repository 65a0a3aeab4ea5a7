#include "crl/linalg.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace crl::linalg {

Mat pinv(const Mat& a, double rel_cutoff) {
  if (a.size() == 0) return Mat(a.cols(), a.rows());
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  double tol = rel_cutoff * (s.size() ? s(0) : 0.0);
  Vec inv_s(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv_s(i) = s(i) > tol && s(i) > 0.0 ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
}

int numerical_rank(const Mat& a, double rel_cutoff) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec& s = svd.singularValues();
  if (s(0) <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_cutoff * s(0)) ++r;
  return r;
}

double smallest_singular_value(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec& s = svd.singularValues();
  return s.size() ? s(s.size() - 1) : 0.0;
}

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

Mat covariance(const Mat& x) {
  if (x.rows() == 0) throw std::invalid_argument("covariance: no samples");
  Vec mean = x.colwise().mean().transpose();
  Mat centered = x.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / static_cast<double>(x.rows());
}

Mat second_moment(const Mat& x) {
  if (x.rows() == 0) throw std::invalid_argument("second_moment: no samples");
  return (x.transpose() * x) / static_cast<double>(x.rows());
}

Vec top_eigenvector(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  Vec v = es.eigenvectors().col(sym.rows() - 1);
  Eigen::Index idx;
  v.cwiseAbs().maxCoeff(&idx);
  if (v(idx) < 0) v = -v;
  return v;
}

Mat column_space_basis(const Mat& sym, double rel_threshold) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  const Vec& ev = es.eigenvalues();
  const Eigen::Index n = ev.size();
  double top = ev(n - 1);
  if (top <= 0.0) return Mat(sym.rows(), 0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = n - 1; i >= 0; --i)
    if (ev(i) > rel_threshold * top) keep.push_back(i);
  Mat basis(sym.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) basis.col(k) = es.eigenvectors().col(keep[k]);
  return basis;
}

int intersection_dimension(const Mat& b1, const Mat& b2, double cos_threshold) {
  if (b1.cols() == 0 || b2.cols() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(b1.transpose() * b2);
  const Vec& s = svd.singularValues();
  int count = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cos_threshold) ++count;
  return count;
}

Mat intersection_basis(const Mat& b1, const Mat& b2, double cos_threshold) {
  if (b1.cols() == 0 || b2.cols() == 0) return Mat(b1.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(b1.transpose() * b2, Eigen::ComputeFullU);
  const Vec& s = svd.singularValues();
  int count = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cos_threshold) ++count;
  return b1 * svd.matrixU().leftCols(count);
}

Mat orthonormal_basis(const Mat& a, double rel_cutoff) {
  if (a.size() == 0) return Mat(a.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(0) > 0.0 && s(i) > rel_cutoff * s(0)) ++r;
  return svd.matrixU().leftCols(r);
}

Mat abs_correlation(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.rows() < 2) throw std::invalid_argument("abs_correlation: need matching sample counts >= 2");
  Mat ca = a.rowwise() - a.colwise().mean();
  Mat cb = b.rowwise() - b.colwise().mean();
  Vec na = ca.colwise().norm().transpose();
  Vec nb = cb.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < na.size(); ++i)
    if (!(na(i) > 0.0)) throw std::domain_error("abs_correlation: zero-variance column");
  for (Eigen::Index i = 0; i < nb.size(); ++i)
    if (!(nb(i) > 0.0)) throw std::domain_error("abs_correlation: zero-variance column");
  Mat c = ca.transpose() * cb;
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = std::min(1.0, std::abs(c(i, j)) / (na(i) * nb(j)));
  return c;
}

}  // namespace crl::linalg
