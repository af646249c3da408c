#include "pcha/basis.hpp"

#include <stdexcept>
#include <string>

namespace pcha {

std::vector<std::uint32_t> enumerate_subsets(int d, int max_degree) {
  if (d < 1 || d > 20)
    throw std::invalid_argument("enumerate_subsets: dimension must be in [1,20]");
  const int cap = (max_degree <= 0 || max_degree > d) ? d : max_degree;
  std::vector<std::uint32_t> out;
  // Size-k subsets in lexicographic tuple order via the usual successor rule.
  for (int k = 1; k <= cap; ++k) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    for (;;) {
      std::uint32_t mask = 0;
      for (int i : idx) mask |= (1u << i);
      out.push_back(mask);
      int pos = k - 1;
      while (pos >= 0 && idx[pos] == d - k + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  return out;
}

BasisSpec make_basis(const Eigen::MatrixXd& scaled_knots, int max_degree) {
  BasisSpec basis;
  basis.knots = scaled_knots;
  basis.max_degree = max_degree;
  basis.subsets = enumerate_subsets(static_cast<int>(scaled_knots.cols()), max_degree);
  return basis;
}

std::uint32_t active_mask(const BasisSpec& basis, Eigen::Index knot,
                          const Eigen::RowVectorXd& x) {
  std::uint32_t mask = 0;
  for (Eigen::Index j = 0; j < basis.dim(); ++j)
    if (x[j] >= basis.knots(knot, j)) mask |= (1u << j);
  return mask;
}

Eigen::RowVectorXd eval_basis_row(const BasisSpec& basis,
                                  const Eigen::RowVectorXd& x) {
  const Eigen::Index S = static_cast<Eigen::Index>(basis.subsets.size());
  Eigen::RowVectorXd row(basis.n_knots() * S);
  for (Eigen::Index l = 0; l < basis.n_knots(); ++l) {
    const std::uint32_t mask = active_mask(basis, l, x);
    for (Eigen::Index s = 0; s < S; ++s) {
      const std::uint32_t sub = basis.subsets[static_cast<std::size_t>(s)];
      row[l * S + s] = ((sub & mask) == sub) ? 1.0 : 0.0;
    }
  }
  return row;
}

Eigen::MatrixXd materialize_design(const BasisSpec& basis,
                                   const Eigen::MatrixXd& Xs,
                                   std::int64_t cap) {
  if (basis.size() > cap)
    throw std::runtime_error("materialize_design: basis has " +
                             std::to_string(basis.size()) +
                             " columns, cap is " + std::to_string(cap));
  Eigen::MatrixXd H(Xs.rows(), basis.size());
  for (Eigen::Index i = 0; i < Xs.rows(); ++i)
    H.row(i) = eval_basis_row(basis, Xs.row(i));
  return H;
}

}  // namespace pcha
