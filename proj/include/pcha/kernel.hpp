#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "pcha/basis.hpp"

namespace pcha {

// Inner products of indicator-spline feature vectors, computed without
// materializing the design. With t = #{j : knot_{l,j} <= min(a_j, b_j)} the
// knot l contributes sum_{k=1..min(t,q)} C(t,k) matching sections, which is
// 2^t - 1 when the interaction degree q is uncapped. Counts are exact in
// 64-bit integers before the cast to double.
//
// pair_count_table[t] holds that contribution for t = 0..d.
std::vector<std::int64_t> pair_count_table(int d, int max_degree);

// Symmetric Gram matrix of the training rows: K = H H^T.
Eigen::MatrixXd build_kernel_matrix(const BasisSpec& basis,
                                    const Eigen::MatrixXd& Xs);

// Cross Gram block between new scaled points and the training rows:
// entry (i, i') = <phi(A.row(i)), phi(Xs_train.row(i'))>.
Eigen::MatrixXd kernel_cross(const BasisSpec& basis, const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& Xs_train);

}  // namespace pcha
