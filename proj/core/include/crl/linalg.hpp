#pragma once

#include "crl/types.hpp"

namespace crl::linalg {

inline constexpr double kPinvCutoff = 1e-10;

// Moore-Penrose pseudo-inverse via SVD; singular values below
// rel_cutoff * sigma_max are treated as zero.
Mat pinv(const Mat& a, double rel_cutoff = kPinvCutoff);

int numerical_rank(const Mat& a, double rel_cutoff = kPinvCutoff);
double smallest_singular_value(const Mat& a);
double spectral_norm(const Mat& a);

// Rows of x are samples. Maximum-likelihood covariance (divides by rows).
Mat covariance(const Mat& x);
// (1/rows) * x^T x, no centering
Mat second_moment(const Mat& x);

// Unit eigenvector for the largest eigenvalue of a symmetric matrix; sign
// fixed so the entry of largest magnitude is positive.
Vec top_eigenvector(const Mat& sym);

// Orthonormal basis (columns) of the eigenvectors of a symmetric PSD matrix
// whose eigenvalues exceed rel_threshold * largest eigenvalue.
Mat column_space_basis(const Mat& sym, double rel_threshold);

// Number of principal-angle cosines between span(b1) and span(b2) above
// cos_threshold. Both inputs must have orthonormal columns.
int intersection_dimension(const Mat& b1, const Mat& b2, double cos_threshold);

// Orthonormal basis of the (numerical) intersection of span(b1) and span(b2).
Mat intersection_basis(const Mat& b1, const Mat& b2, double cos_threshold);

// Orthonormal basis of the column space of a (rank via relative cutoff).
Mat orthonormal_basis(const Mat& a, double rel_cutoff = kPinvCutoff);

// Absolute Pearson correlations between columns of a and columns of b.
Mat abs_correlation(const Mat& a, const Mat& b);

}  // namespace crl::linalg
