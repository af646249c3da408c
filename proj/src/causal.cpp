#include "pcha/causal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "pcha/rng.hpp"

namespace pcha {

Eigen::MatrixXd stacked_design(const CausalDataset& data) {
  Eigen::MatrixXd X(data.W.rows(), data.W.cols() + 1);
  X.col(0) = data.A;
  X.rightCols(data.W.cols()) = data.W;
  return X;
}

OutcomeModel make_outcome_model(const CausalDataset& data,
                                PCWorkingModel model) {
  const Eigen::Index n = data.W.rows();
  if (data.A.size() != n || data.Y.size() != n || data.pi1.size() != n)
    throw std::invalid_argument("make_outcome_model: column length mismatch");
  const double a_sum = data.A.sum();
  if (a_sum <= 0.0 || a_sum >= static_cast<double>(n))
    throw std::invalid_argument("make_outcome_model: one treatment arm is empty");

  OutcomeModel om;
  om.model = std::move(model);
  om.state = make_risk_state(om.model.Z, data.Y, LossKind::MSE);

  Eigen::MatrixXd X1(n, data.W.cols() + 1), X0(n, data.W.cols() + 1);
  X1.col(0).setOnes();
  X0.col(0).setZero();
  X1.rightCols(data.W.cols()) = data.W;
  X0.rightCols(data.W.cols()) = data.W;
  om.Z1 = pc_design_at(om.model, X1);
  om.Z0 = pc_design_at(om.model, X0);
  return om;
}

OutcomeModel make_outcome_model(const CausalDataset& data, int max_degree,
                                double rank_tol) {
  return make_outcome_model(
      data, make_working_model(stacked_design(data), max_degree, rank_tol));
}

FittedEstimator fit_outcome(const OutcomeModel& om, EstimatorMode mode,
                            double reg, const SolverConfig& config) {
  switch (mode) {
    case EstimatorMode::HAR:
      return fit_har(om.state, LossKind::MSE, reg, config);
    case EstimatorMode::HAL:
      return fit_hal(om.state, LossKind::MSE, reg, config);
    case EstimatorMode::HAGL:
      return fit_hagl_two_step(om.state, om.model, LossKind::MSE, reg, config);
  }
  throw std::logic_error("fit_outcome: unknown mode");
}

MuPair predict_mu(const OutcomeModel& om, const FittedEstimator& fit) {
  MuPair mu;
  mu.mu1 = (om.Z1 * fit.alpha).array() + fit.intercept;
  mu.mu0 = (om.Z0 * fit.alpha).array() + fit.intercept;
  return mu;
}

double plugin_ate(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu0) {
  return (mu1 - mu0).mean();
}

EICRecord eic(const CausalDataset& data, const Eigen::VectorXd& mu1,
              const Eigen::VectorXd& mu0, double reg_value, double eps_pos) {
  const Eigen::Index n = data.Y.size();
  const double mu1_bar = mu1.mean();
  const double mu0_bar = mu0.mean();
  EICRecord rec;
  rec.reg_value = reg_value;
  rec.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p1 = data.pi1[i];
    const double p0 = 1.0 - p1;
    if (p1 < eps_pos || p0 < eps_pos)
      throw std::runtime_error("eic: propensity outside positivity bounds");
    const double phi1 =
        (data.A[i] == 1.0 ? (data.Y[i] - mu1[i]) / p1 : 0.0) + mu1[i] - mu1_bar;
    const double phi0 =
        (data.A[i] == 0.0 ? (data.Y[i] - mu0[i]) / p0 : 0.0) + mu0[i] - mu0_bar;
    rec.values[i] = phi1 - phi0;
  }
  rec.mean = rec.values.mean();
  if (n > 1)
    rec.sd = std::sqrt((rec.values.array() - rec.mean).square().sum() /
                       static_cast<double>(n - 1));
  return rec;
}

double undersmooth_threshold(double sd, Eigen::Index n) {
  return sd / (std::sqrt(static_cast<double>(n)) *
               std::log(static_cast<double>(n)));
}

std::vector<double> undersmooth_grid(double lambda_cv, int steps,
                                     double ratio) {
  std::vector<double> grid(static_cast<std::size_t>(steps));
  double v = lambda_cv;
  for (int k = 0; k < steps; ++k) {
    grid[static_cast<std::size_t>(k)] = v;
    v *= ratio;
  }
  return grid;
}

UndersmoothResult undersmooth(const CausalDataset& data,
                              const OutcomeModel& om, EstimatorMode mode,
                              double lambda_cv,
                              const std::vector<double>& grid_down,
                              const SolverConfig& config, double eps_pos,
                              double tau_override) {
  const FittedEstimator cv_fit = fit_outcome(om, mode, lambda_cv, config);
  double tau = tau_override;
  if (std::isnan(tau)) {
    const MuPair cv_mu = predict_mu(om, cv_fit);
    const EICRecord cv_rec =
        eic(data, cv_mu.mu1, cv_mu.mu0, lambda_cv, eps_pos);
    tau = undersmooth_threshold(cv_rec.sd, data.Y.size());
  }

  UndersmoothResult best;      // smallest satisfying lambda
  UndersmoothResult fallback;  // argmin |P_n D|
  bool any_satisfied = false;
  double fallback_abs = std::numeric_limits<double>::infinity();

  for (const double lam : grid_down) {
    FittedEstimator fit =
        (lam == lambda_cv) ? cv_fit : fit_outcome(om, mode, lam, config);
    const MuPair mu = predict_mu(om, fit);
    const EICRecord rec = eic(data, mu.mu1, mu.mu0, lam, eps_pos);
    const double abs_mean = std::abs(rec.mean);
    if (abs_mean <= tau) {
      // Grid is descending, so the last hit is the smallest satisfying one.
      any_satisfied = true;
      best.lambda_star = lam;
      best.fit = fit;
      best.record = rec;
    }
    if (abs_mean < fallback_abs) {
      fallback_abs = abs_mean;
      fallback.lambda_star = lam;
      fallback.fit = fit;
      fallback.record = rec;
    }
  }

  UndersmoothResult out = any_satisfied ? best : fallback;
  out.tau = tau;
  out.satisfied = any_satisfied;
  return out;
}

namespace {

BootstrapInterval bootstrap_generic(
    Eigen::Index n, int B, std::uint64_t seed, double level,
    const std::function<bool(const Eigen::VectorXd&)>& usable,
    const std::function<double(const Eigen::VectorXd&)>& statistic) {
  if (B < 50) throw std::invalid_argument("bootstrap: B must be >= 50");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("bootstrap: level must be in (0,1)");

  BootstrapInterval out;
  Eigen::VectorXd w(n);
  for (int b = 0; b < B; ++b) {
    Rng rng(derive_seed(seed, 0xB5u, static_cast<std::uint64_t>(b)));
    w.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      w[static_cast<Eigen::Index>(
          rng.uniform_int(static_cast<std::uint64_t>(n)))] += 1.0;
    if (!usable(w)) {
      ++out.skipped;
      continue;
    }
    out.stats.push_back(statistic(w));
  }
  if (out.skipped * 10 > B)
    throw std::runtime_error("bootstrap: more than 10% of replicates skipped");
  std::sort(out.stats.begin(), out.stats.end());
  const int eff = static_cast<int>(out.stats.size());
  // 1-based percentile order statistics, e.g. (5th, 195th) at B=200, 95%.
  int k_lo = static_cast<int>(std::floor(eff * (1.0 - level) / 2.0));
  int k_hi = static_cast<int>(std::ceil(eff * (1.0 + level) / 2.0));
  k_lo = std::max(1, k_lo);
  k_hi = std::min(eff, k_hi);
  out.lo = out.stats[static_cast<std::size_t>(k_lo - 1)];
  out.hi = out.stats[static_cast<std::size_t>(k_hi - 1)];
  return out;
}

FittedEstimator refit_weighted(const RiskState& base, RiskState& scratch,
                               const PCWorkingModel& model, LossKind kind,
                               EstimatorMode mode, double reg,
                               const SolverConfig& config,
                               const Eigen::VectorXd& w) {
  scratch.w = w;
  if (kind == LossKind::MSE)
    scratch.intercept = weighted_mean(base.y, w);
  switch (mode) {
    case EstimatorMode::HAR: return fit_har(scratch, kind, reg, config);
    case EstimatorMode::HAL: return fit_hal(scratch, kind, reg, config);
    case EstimatorMode::HAGL:
      return fit_hagl_two_step(scratch, model, kind, reg, config);
  }
  throw std::logic_error("refit_weighted: unknown mode");
}

}  // namespace

BootstrapInterval bootstrap_ate(const CausalDataset& data,
                                const OutcomeModel& om, EstimatorMode mode,
                                double reg, int B, std::uint64_t seed,
                                double level, const SolverConfig& config) {
  const Eigen::Index n = data.Y.size();
  RiskState scratch = om.state;
  return bootstrap_generic(
      n, B, seed, level,
      [&](const Eigen::VectorXd& w) {
        double n1 = 0.0, n0 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
          (data.A[i] == 1.0 ? n1 : n0) += w[i];
        return n1 > 0.0 && n0 > 0.0;
      },
      [&](const Eigen::VectorXd& w) {
        const FittedEstimator fit = refit_weighted(
            om.state, scratch, om.model, LossKind::MSE, mode, reg, config, w);
        const MuPair mu = predict_mu(om, fit);
        // ATE under the resampled empirical measure.
        return (mu.mu1 - mu.mu0).dot(w) / w.sum();
      });
}

BootstrapInterval bootstrap_point(const PCWorkingModel& model,
                                  const RiskState& state, LossKind kind,
                                  EstimatorMode mode, double reg,
                                  const Eigen::RowVectorXd& x0_raw, int B,
                                  std::uint64_t seed, double level,
                                  const SolverConfig& config) {
  const Eigen::RowVectorXd z0 = pc_design_at(model, x0_raw);
  RiskState scratch = state;
  return bootstrap_generic(
      state.y.size(), B, seed, level,
      [](const Eigen::VectorXd&) { return true; },
      [&](const Eigen::VectorXd& w) {
        const FittedEstimator fit = refit_weighted(state, scratch, model, kind,
                                                   mode, reg, config, w);
        return z0.dot(fit.alpha) + fit.intercept;
      });
}

}  // namespace pcha
