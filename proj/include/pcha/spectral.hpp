#pragma once

#include <Eigen/Core>

namespace pcha {

// Truncated eigendecomposition K = U diag(d^2) U^T of the indicator Gram
// matrix. d holds singular values of the design (sqrt of eigenvalues) in
// descending order; components with eigenvalue <= rank_tol * max eigenvalue
// are dropped. Each column of U is oriented so its largest-magnitude entry
// (first such entry on ties) is positive, which pins the decomposition down
// for reproducibility.
struct SpectralFactors {
  Eigen::MatrixXd U;  // n x r
  Eigen::VectorXd d;  // r, positive, descending
  double rank_tol = 1e-10;

  Eigen::Index rank() const { return d.size(); }
};

SpectralFactors spectral_decompose(const Eigen::MatrixXd& K,
                                   double rank_tol = 1e-10);

}  // namespace pcha
