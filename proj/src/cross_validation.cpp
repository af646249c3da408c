#include "pcha/cross_validation.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pcha/rng.hpp"

namespace pcha {

CVPlan make_folds(Eigen::Index n, int V, std::uint64_t seed) {
  if (V < 2 || static_cast<Eigen::Index>(V) > n)
    throw std::invalid_argument("make_folds: need 2 <= V <= n");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  CVPlan plan;
  plan.V = V;
  plan.seed = seed;
  plan.fold_assignments.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    plan.fold_assignments[static_cast<std::size_t>(order[pos])] =
        static_cast<int>(pos % static_cast<std::size_t>(V));
  return plan;
}

std::vector<double> default_lambda_grid(const PCWorkingModel& model,
                                        int size) {
  if (size < 1) throw std::invalid_argument("default_lambda_grid: size >= 1");
  const double scale = model.factors.d[0] * model.factors.d[0] /
                       static_cast<double>(model.n());
  std::vector<double> grid(static_cast<std::size_t>(size));
  for (int k = 0; k < size; ++k) {
    const double e =
        size == 1 ? -2.0 : 2.0 - 8.0 * static_cast<double>(k) / (size - 1);
    grid[static_cast<std::size_t>(k)] = scale * std::pow(10.0, e);
  }
  return grid;  // descending
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X,
                          const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v,
                     const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

FittedEstimator fit_mode(const RiskState& state, const PCWorkingModel& model,
                         EstimatorMode mode, LossKind kind, double value,
                         const SolverConfig& config) {
  switch (mode) {
    case EstimatorMode::HAR: return fit_har(state, kind, value, config);
    case EstimatorMode::HAL: return fit_hal(state, kind, value, config);
    case EstimatorMode::HAGL:
      return fit_hagl_two_step(state, model, kind, value, config);
  }
  throw std::logic_error("fit_mode: unknown mode");
}

}  // namespace

CVContext make_cv_context(const Eigen::MatrixXd& X_raw,
                          const Eigen::VectorXd& y, LossKind kind,
                          const CVPlan& plan, int max_degree,
                          double rank_tol) {
  const Eigen::Index n = X_raw.rows();
  if (y.size() != n)
    throw std::invalid_argument("make_cv_context: X/y row mismatch");
  if (static_cast<Eigen::Index>(plan.fold_assignments.size()) != n)
    throw std::invalid_argument("make_cv_context: plan does not cover data");

  CVContext ctx;
  ctx.kind = kind;
  ctx.plan = plan;
  ctx.model = make_working_model(X_raw, max_degree, rank_tol);
  ctx.state = make_risk_state(ctx.model.Z, y, kind);
  if (ctx.plan.grid.empty()) ctx.plan.grid = default_lambda_grid(ctx.model);

  ctx.folds.resize(static_cast<std::size_t>(plan.V));
  for (int v = 0; v < plan.V; ++v) {
    FoldModel& fold = ctx.folds[static_cast<std::size_t>(v)];
    for (Eigen::Index i = 0; i < n; ++i) {
      if (plan.fold_assignments[static_cast<std::size_t>(i)] == v)
        fold.val_rows.push_back(i);
      else
        fold.train_rows.push_back(i);
    }
    if (fold.val_rows.empty() || fold.train_rows.empty())
      throw std::runtime_error("make_cv_context: empty fold");
    fold.model =
        make_working_model(take_rows(X_raw, fold.train_rows), max_degree, rank_tol);
    fold.state =
        make_risk_state(fold.model.Z, take(y, fold.train_rows), kind);
    fold.y_val = take(y, fold.val_rows);
    fold.Zval = pc_design_at(fold.model, take_rows(X_raw, fold.val_rows));
  }
  return ctx;
}

CVResult cv_select(CVContext& ctx, EstimatorMode mode,
                   const SolverConfig& config) {
  const std::vector<double>& grid = ctx.plan.grid;
  if (grid.empty()) throw std::invalid_argument("cv_select: empty grid");

  CVResult result;
  result.grid = grid;
  result.mean_validation_risk.assign(grid.size(),
                                     std::numeric_limits<double>::infinity());

  for (std::size_t k = 0; k < grid.size(); ++k) {
    double acc = 0.0;
    bool valid = true;
    for (FoldModel& fold : ctx.folds) {
      try {
        const FittedEstimator fit = fit_mode(fold.state, fold.model, mode,
                                             ctx.kind, grid[k], config);
        const Eigen::VectorXd theta =
            (fold.Zval * fit.alpha).array() + fit.intercept;
        const double vr = risk_from_theta(fold.y_val, theta, ctx.kind);
        if (!std::isfinite(vr)) { valid = false; break; }
        acc += vr;
      } catch (const std::exception&) {
        valid = false;
        break;
      }
    }
    if (valid)
      result.mean_validation_risk[k] = acc / static_cast<double>(ctx.folds.size());
  }

  int best = -1;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = result.mean_validation_risk[k];
    if (std::isfinite(v) &&
        (best < 0 || v < result.mean_validation_risk[static_cast<std::size_t>(best)]))
      best = static_cast<int>(k);
  }
  if (best < 0)
    throw std::runtime_error("cv_select: every grid point failed");
  result.selected_index = best;
  result.selected_value = grid[static_cast<std::size_t>(best)];
  result.refit = fit_mode(ctx.state, ctx.model, mode, ctx.kind,
                          result.selected_value, config);
  return result;
}

CVResult cv_select(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y,
                   EstimatorMode mode, LossKind kind, const CVPlan& plan,
                   const SolverConfig& config, int max_degree,
                   double rank_tol) {
  CVContext ctx = make_cv_context(X_raw, y, kind, plan, max_degree, rank_tol);
  return cv_select(ctx, mode, config);
}

}  // namespace pcha
