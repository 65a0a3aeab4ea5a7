#pragma once

#include <Eigen/Dense>
#include <vector>

namespace crl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// perm[i] is the image of index i
using Permutation = std::vector<int>;

Permutation identity_permutation(int n);
Permutation inverse_permutation(const Permutation& p);
bool is_permutation(const Permutation& p, int n);

}  // namespace crl
