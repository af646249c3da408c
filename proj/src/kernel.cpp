#include "pcha/kernel.hpp"

#include <algorithm>
#include <stdexcept>

namespace pcha {

std::vector<std::int64_t> pair_count_table(int d, int max_degree) {
  if (d < 1 || d > 20)
    throw std::invalid_argument("pair_count_table: dimension must be in [1,20]");
  const int q = (max_degree <= 0 || max_degree > d) ? d : max_degree;
  std::vector<std::int64_t> table(static_cast<std::size_t>(d) + 1, 0);
  for (int t = 1; t <= d; ++t) {
    if (q == d) {
      table[static_cast<std::size_t>(t)] = (std::int64_t{1} << t) - 1;
    } else {
      std::int64_t sum = 0, binom = 1;
      for (int k = 1; k <= std::min(t, q); ++k) {
        binom = binom * (t - k + 1) / k;  // C(t, k), exact by induction
        sum += binom;
      }
      table[static_cast<std::size_t>(t)] = sum;
    }
  }
  return table;
}

namespace {

// Shared pair loop: out(i, i') = sum_l table[t_l] over all knots.
std::int64_t pair_value(const Eigen::MatrixXd& knots,
                        const std::vector<std::int64_t>& table,
                        const Eigen::RowVectorXd& m) {
  const Eigen::Index n = knots.rows(), d = knots.cols();
  std::int64_t acc = 0;
  for (Eigen::Index l = 0; l < n; ++l) {
    int t = 0;
    for (Eigen::Index j = 0; j < d; ++j) t += (knots(l, j) <= m[j]);
    acc += table[static_cast<std::size_t>(t)];
  }
  return acc;
}

}  // namespace

Eigen::MatrixXd build_kernel_matrix(const BasisSpec& basis,
                                    const Eigen::MatrixXd& Xs) {
  const Eigen::Index n = Xs.rows();
  const std::vector<std::int64_t> table =
      pair_count_table(static_cast<int>(basis.dim()), basis.max_degree);
  Eigen::MatrixXd K(n, n);
  Eigen::RowVectorXd m(Xs.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index i2 = i; i2 < n; ++i2) {
      m = Xs.row(i).cwiseMin(Xs.row(i2));
      const double v = static_cast<double>(pair_value(basis.knots, table, m));
      K(i, i2) = v;
      K(i2, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd kernel_cross(const BasisSpec& basis, const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& Xs_train) {
  if (A.cols() != basis.dim() || Xs_train.cols() != basis.dim())
    throw std::invalid_argument("kernel_cross: dimension mismatch");
  const std::vector<std::int64_t> table =
      pair_count_table(static_cast<int>(basis.dim()), basis.max_degree);
  Eigen::MatrixXd K(A.rows(), Xs_train.rows());
  Eigen::RowVectorXd m(A.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index i2 = 0; i2 < Xs_train.rows(); ++i2) {
      m = A.row(i).cwiseMin(Xs_train.row(i2));
      K(i, i2) = static_cast<double>(pair_value(basis.knots, table, m));
    }
  }
  return K;
}

}  // namespace pcha
