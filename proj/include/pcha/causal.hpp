#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <vector>

#include "pcha/cross_validation.hpp"
#include "pcha/solvers.hpp"

namespace pcha {

struct CausalDataset {
  Eigen::MatrixXd W;    // n x p covariates
  Eigen::VectorXd A;    // treatment in {0, 1}
  Eigen::VectorXd Y;
  Eigen::VectorXd pi1;  // known P(A = 1 | W), bounded away from 0 and 1
};

// The outcome regression works on the stacked covariate (A, W); the two
// counterfactual PC designs Z1, Z0 evaluate any fit at (1, W) and (0, W)
// without touching the kernel again.
struct OutcomeModel {
  PCWorkingModel model;
  RiskState state;  // MSE state over the observed rows
  Eigen::MatrixXd Z1;
  Eigen::MatrixXd Z0;
};

Eigen::MatrixXd stacked_design(const CausalDataset& data);

OutcomeModel make_outcome_model(const CausalDataset& data, int max_degree = 0,
                                double rank_tol = 1e-10);

// Reuses a working model already built on stacked_design(data), skipping the
// kernel and eigendecomposition work.
OutcomeModel make_outcome_model(const CausalDataset& data,
                                PCWorkingModel model);

// One MSE fit of Y on (A, W); reg is lambda for HAR/HAL and the warm-start
// lambda_har of the two-step pipeline for HAGL.
FittedEstimator fit_outcome(const OutcomeModel& om, EstimatorMode mode,
                            double reg, const SolverConfig& config = {});

struct MuPair {
  Eigen::VectorXd mu1;
  Eigen::VectorXd mu0;
};

MuPair predict_mu(const OutcomeModel& om, const FittedEstimator& fit);

// P_n (mu1 - mu0).
double plugin_ate(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu0);

struct EICRecord {
  Eigen::VectorXd values;
  double mean = 0.0;
  double sd = 0.0;        // sample standard deviation
  double reg_value = 0.0; // regularization of the fit behind mu
};

// Efficient influence curve of the ATE at known propensity:
// D = 1{A=1}/pi1 (Y - mu1) - 1{A=0}/pi0 (Y - mu0) + (mu1 - mu0) - P_n(mu1 - mu0).
// Propensities inside [eps_pos, 1 - eps_pos] are required; violations throw.
EICRecord eic(const CausalDataset& data, const Eigen::VectorXd& mu1,
              const Eigen::VectorXd& mu0, double reg_value = 0.0,
              double eps_pos = 1e-3);

// tau = sd / (sqrt(n) ln n).
double undersmooth_threshold(double sd, Eigen::Index n);

// lambda_cv * ratio^k for k = 0..steps-1.
std::vector<double> undersmooth_grid(double lambda_cv, int steps = 40,
                                     double ratio = 0.85);

struct UndersmoothResult {
  double lambda_star = 0.0;
  FittedEstimator fit;
  EICRecord record;
  double tau = 0.0;
  bool satisfied = false;  // false: fallback to argmin |P_n D| was used
};

// Walks the whole downward grid and returns the smallest lambda whose fit
// keeps |P_n D| within tau (tau frozen at the lambda_cv fit). If no grid
// point qualifies, falls back to the lambda minimizing |P_n D|. A finite
// tau_override replaces the internally computed threshold (the once-off
// protocol freezes tau on an initial sample).
UndersmoothResult undersmooth(const CausalDataset& data, const OutcomeModel& om,
                              EstimatorMode mode, double lambda_cv,
                              const std::vector<double>& grid_down,
                              const SolverConfig& config = {},
                              double eps_pos = 1e-3,
                              double tau_override =
                                  std::numeric_limits<double>::quiet_NaN());

struct BootstrapInterval {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> stats;  // sorted replicate statistics
  int skipped = 0;
};

// Nonparametric bootstrap that freezes the PC working model (basis, Gram,
// spectral factors) and resamples rows as multinomial weights before
// refitting alpha. Replicates with an empty treatment arm are skipped; more
// than 10% skipped is an error.
BootstrapInterval bootstrap_ate(const CausalDataset& data,
                                const OutcomeModel& om, EstimatorMode mode,
                                double reg, int B, std::uint64_t seed,
                                double level = 0.95,
                                const SolverConfig& config = {});

// Same scheme for the fitted function value at a raw point x0.
BootstrapInterval bootstrap_point(const PCWorkingModel& model,
                                  const RiskState& state, LossKind kind,
                                  EstimatorMode mode, double reg,
                                  const Eigen::RowVectorXd& x0_raw, int B,
                                  std::uint64_t seed, double level = 0.95,
                                  const SolverConfig& config = {});

}  // namespace pcha
