#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "pcha/solvers.hpp"

namespace pcha {

struct CVPlan {
  int V = 3;
  std::vector<int> fold_assignments;  // one fold id per row
  std::vector<double> grid;           // descending; empty means use default
  std::uint64_t seed = 0;
};

// Deterministic shuffle then round-robin, so fold sizes differ by at most 1.
CVPlan make_folds(Eigen::Index n, int V, std::uint64_t seed);

// 20 log-spaced lambdas spanning [1e-6, 1e2] times d_max^2 / n, descending so
// risk ties resolve toward stronger regularization.
std::vector<double> default_lambda_grid(const PCWorkingModel& model,
                                        int size = 20);

// Everything rebuilt per training fold (scaling, basis, Gram, spectrum) plus
// the validation rows mapped through the fold's PC design. Caching this lets
// several modes and grids share one set of eigendecompositions.
struct FoldModel {
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> val_rows;
  PCWorkingModel model;
  RiskState state;
  Eigen::MatrixXd Zval;
  Eigen::VectorXd y_val;
};

struct CVContext {
  LossKind kind = LossKind::MSE;
  CVPlan plan;
  PCWorkingModel model;  // full-data working model
  RiskState state;
  std::vector<FoldModel> folds;
};

CVContext make_cv_context(const Eigen::MatrixXd& X_raw,
                          const Eigen::VectorXd& y, LossKind kind,
                          const CVPlan& plan, int max_degree = 0,
                          double rank_tol = 1e-10);

struct CVResult {
  std::vector<double> grid;
  std::vector<double> mean_validation_risk;  // +inf marks invalid points
  int selected_index = -1;
  double selected_value = 0.0;  // lambda (HAR/HAL) or lambda_har (HAGL)
  FittedEstimator refit;        // full-data fit at the selected value
};

// For HAGL the grid indexes the warm-start lambda_har of the two-step
// pipeline; cross-validation treats that as the single tuning knob.
CVResult cv_select(CVContext& ctx, EstimatorMode mode,
                   const SolverConfig& config = {});

CVResult cv_select(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y,
                   EstimatorMode mode, LossKind kind, const CVPlan& plan,
                   const SolverConfig& config = {}, int max_degree = 0,
                   double rank_tol = 1e-10);

}  // namespace pcha
