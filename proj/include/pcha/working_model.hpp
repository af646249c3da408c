#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "pcha/basis.hpp"
#include "pcha/kernel.hpp"
#include "pcha/scaling.hpp"
#include "pcha/spectral.hpp"

namespace pcha {

// The n-dimensional working model obtained by rotating the indicator-spline
// span: columns of Z = U diag(d) are the principal-component basis functions
// evaluated at the training rows. Coefficients alpha in this model map to
// full spline coefficients beta(alpha) = E alpha with E = H^T U diag(d)^-1;
// E has orthonormal columns, so ||beta(alpha)||_2 = ||alpha||_2 and the span
// of Z at the design points equals the span of the full design.
struct PCWorkingModel {
  ScalingMap scaling;
  BasisSpec basis;  // knots are the scaled training rows
  SpectralFactors factors;
  Eigen::MatrixXd Z;  // n x r cached PC design, Z = U diag(d)

  Eigen::Index n() const { return basis.n_knots(); }
  Eigen::Index rank() const { return factors.rank(); }
};

PCWorkingModel make_working_model(const Eigen::MatrixXd& X_raw,
                                  int max_degree = 0, double rank_tol = 1e-10);

// L1/L2 norms and the sign-projected basis sums of beta(alpha):
// g_i = sum_j sign(beta_j) phi_j(x_i). g is what the constraint gradient
// needs, folded back into n dimensions.
struct BetaStats {
  double l1 = 0.0;
  double l2 = 0.0;
  Eigen::VectorXd g;
};

// Single pass over the implicit basis, never materializing its N columns.
// Per knot the subset sums live on the 2^d lattice of coordinate masks:
// beta_{l,s} = sum over rows whose active mask contains s of w_i, computed
// with a superset-sum transform, and the g update is the reverse subset-sum
// of the resulting signs.
BetaStats beta_stats_streaming(const PCWorkingModel& model,
                               const Eigen::VectorXd& alpha);

// a1(m) = sum_j E(j, m) sign(beta_j) = (U^T g) / d.
Eigen::VectorXd constraint_gradient(const PCWorkingModel& model,
                                    const BetaStats& stats);

// Full beta(alpha) in knot-major column order. Streaming per knot, but the
// output itself has basis.size() entries, hence the cap.
Eigen::VectorXd beta_coefficients(const PCWorkingModel& model,
                                  const Eigen::VectorXd& alpha,
                                  std::int64_t cap = 1'000'000);

// H v at the training rows for an arbitrary full-basis coefficient vector v,
// streamed knot by knot: out_i = sum_j v_j phi_j(x_i).
Eigen::VectorXd design_apply(const PCWorkingModel& model,
                             const Eigen::VectorXd& v);

// Indicator column phi_j evaluated at the training rows (j in knot-major
// order).
Eigen::VectorXd basis_column(const PCWorkingModel& model, std::int64_t j);

// Row j of the coefficient map E = H^T U diag(d)^-1.
Eigen::VectorXd pc_basis_row(const PCWorkingModel& model, std::int64_t j);

// PC design evaluated at new raw points: k(x, training) U diag(d)^-1, an
// m x r matrix whose rows play the role of Z rows for out-of-sample x.
Eigen::MatrixXd pc_design_at(const PCWorkingModel& model,
                             const Eigen::MatrixXd& X_raw);

// theta(x) = pc_design_at(x) alpha + intercept. On training rows this equals
// Z alpha + intercept because the kernel reproduces the Gram rows.
Eigen::VectorXd predict(const PCWorkingModel& model,
                        const Eigen::VectorXd& alpha, double intercept,
                        const Eigen::MatrixXd& X_raw);

}  // namespace pcha
