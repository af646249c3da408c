#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace pcha {

// Zero-order indicator spline dictionary. Every training row is a knot and
// every nonempty coordinate subset s (|s| <= max interaction degree) gives a
// section phi_{l,s}(x) = prod_{j in s} 1{x_j >= knot_{l,j}}.
//
// Columns are knot-major: column index = knot * subsets.size() + subset_index,
// with subsets in canonical order (ascending size, then lexicographic tuple).
struct BasisSpec {
  Eigen::MatrixXd knots;               // scaled training rows, one knot each
  int max_degree = 0;                  // 0 means all interaction orders
  std::vector<std::uint32_t> subsets;  // coordinate subsets as bitmasks

  Eigen::Index n_knots() const { return knots.rows(); }
  Eigen::Index dim() const { return knots.cols(); }
  // Total number of basis functions n_knots * subsets.size().
  std::int64_t size() const {
    return static_cast<std::int64_t>(knots.rows()) *
           static_cast<std::int64_t>(subsets.size());
  }
};

// Canonical subset enumeration for dimension d capped at max_degree.
std::vector<std::uint32_t> enumerate_subsets(int d, int max_degree);

BasisSpec make_basis(const Eigen::MatrixXd& scaled_knots, int max_degree = 0);

// Active-coordinate bitmask of x against one knot: bit j set when
// x_j >= knot_j. phi_{l,s}(x) = 1 exactly when s is a subset of this mask.
std::uint32_t active_mask(const BasisSpec& basis, Eigen::Index knot,
                          const Eigen::RowVectorXd& x);

Eigen::RowVectorXd eval_basis_row(const BasisSpec& basis,
                                  const Eigen::RowVectorXd& x);

// Full indicator design H (rows of Xs against all basis columns). Guarded by
// cap since the column count grows as n * (2^d - 1); intended for small
// problems and tests.
Eigen::MatrixXd materialize_design(const BasisSpec& basis,
                                   const Eigen::MatrixXd& Xs,
                                   std::int64_t cap = 1'000'000);

}  // namespace pcha
