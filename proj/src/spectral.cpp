#include "pcha/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace pcha {

SpectralFactors spectral_decompose(const Eigen::MatrixXd& K, double rank_tol) {
  if (K.rows() != K.cols() || K.rows() == 0)
    throw std::invalid_argument("spectral_decompose: K must be square and nonempty");
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("spectral_decompose: K is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_decompose: eigensolver failed");

  const Eigen::Index n = K.rows();
  const Eigen::VectorXd& evals = es.eigenvalues();  // ascending
  const double lam_max = evals[n - 1];
  const double cutoff = rank_tol * std::max(lam_max, 0.0);

  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < n; ++k)
    if (evals[k] > cutoff) ++r;
  if (r == 0) throw std::runtime_error("spectral_decompose: rank zero");

  SpectralFactors f;
  f.rank_tol = rank_tol;
  f.U.resize(n, r);
  f.d.resize(r);
  for (Eigen::Index m = 0; m < r; ++m) {
    const Eigen::Index src = n - 1 - m;  // descending order
    f.d[m] = std::sqrt(evals[src]);
    Eigen::VectorXd col = es.eigenvectors().col(src);
    Eigen::Index lead = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(col[i]) > std::abs(col[lead])) lead = i;
    if (col[lead] < 0.0) col = -col;
    f.U.col(m) = col;
  }
  return f;
}

}  // namespace pcha
