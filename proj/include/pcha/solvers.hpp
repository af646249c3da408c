#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <string>

#include "pcha/loss.hpp"
#include "pcha/working_model.hpp"

namespace pcha {

enum class EstimatorMode { HAR, HAL, HAGL };

const char* mode_name(EstimatorMode mode);

struct SolverConfig {
  int max_iter = 2000;
  double grad_tol = 1e-8;
  double risk_tol = 1e-10;
  double step_init = 0.5;     // leading line-search delta
  double step_shrink = 0.5;
  double step_floor = 1e-12;
  bool polish = true;         // constrained refinement after descent (HAGL)
  int polish_faces = 50;      // sign-pattern refreshes in the refinement
  double polish_tol = 1e-8;   // projected-gradient target in the refinement
  std::int64_t oracle_cap = 1'000'000;
};

struct FitDiagnostics {
  int iterations = 0;
  double final_risk = 0.0;        // unpenalized empirical risk at the solution
  double constraint_residual = 0.0;  // | ||beta||_1 - C | / max(C,1e-12), HAGL
  double score_residual = 0.0;       // stationarity residual, mode-specific
  double alpha_max_abs = 0.0;
  bool converged = true;
  std::string note;
};

struct FittedEstimator {
  EstimatorMode mode = EstimatorMode::HAR;
  Eigen::VectorXd alpha;
  double intercept = 0.0;
  double reg_value = 0.0;  // lambda for HAR/HAL, constraint level C for HAGL
  FitDiagnostics diagnostics;
};

// All fitters assume Z^T Z is diagonal (the PC design property); the
// closed forms and diagonal curvature bounds below rely on it. Weighted
// states fall back to dense or proximal paths where the diagonal shortcut
// no longer applies.

// Ridge on the orthogonal design. MSE is a per-coordinate solve
// alpha_m = d_m (U^T ytilde)_m / (d_m^2 + n lambda); logistic runs damped
// Newton with the intercept in the step until the penalized gradient norm
// drops below grad_tol.
FittedEstimator fit_har(const RiskState& state, LossKind kind, double lambda,
                        const SolverConfig& config = {});

// L1 on alpha. MSE with unit weights is the exact soft threshold
// alpha_m = S(d_m (U^T ytilde)_m, n lambda / 2) / d_m^2; otherwise proximal
// steps in the diagonal majorizing metric followed by an active-set Newton
// refinement that drives the KKT residual below grad_tol.
FittedEstimator fit_hal(const RiskState& state, LossKind kind, double lambda,
                        const SolverConfig& config = {});

// Steepest descent along multiplicative paths (1 + delta h) alpha restricted
// to the tangent space of ||beta(alpha)||_1 = C, with exact renormalization
// after every step, followed (by default) by a fixed-sign-pattern constrained
// Newton refinement that drives the tangent score equations to zero.
FittedEstimator fit_hagl(const RiskState& state, const PCWorkingModel& model,
                         LossKind kind, double C,
                         const Eigen::VectorXd& alpha_init,
                         const SolverConfig& config = {},
                         double intercept_init =
                             std::numeric_limits<double>::quiet_NaN());

struct WarmStart {
  FittedEstimator har;
  double C = 0.0;  // ||beta(alpha_HAR)||_1
};

// HAR fit at lambda_har plus the constraint level it implies. Errors out on a
// zero HAR solution (no usable constraint level).
WarmStart warm_start_hagl(const RiskState& state, const PCWorkingModel& model,
                          LossKind kind, double lambda_har,
                          const SolverConfig& config = {});

// The two-step pipeline: warm start then constrained descent. lambda_har is
// the single tuning knob cross-validation sees.
FittedEstimator fit_hagl_two_step(const RiskState& state,
                                  const PCWorkingModel& model, LossKind kind,
                                  double lambda_har,
                                  const SolverConfig& config = {});

}  // namespace pcha
