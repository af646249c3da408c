#include "pcha/solvers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pcha {

namespace {

Eigen::VectorXd col_sq_norms(const Eigen::MatrixXd& Z) {
  return Z.colwise().squaredNorm();
}

bool unit_weights(const Eigen::VectorXd& w) {
  return (w.array() == 1.0).all();
}

double soft(double z, double t) {
  return z > t ? z - t : (z < -t ? z + t : 0.0);
}

// One-dimensional majorized Newton on the intercept (logistic); curvature of
// the intercept direction is bounded by sum(w)/(4n).
double intercept_steps(const RiskState& state, LossKind kind,
                       const Eigen::VectorXd& alpha, double c, int iters) {
  const double qc =
      state.w.sum() / (4.0 * static_cast<double>(state.y.size()));
  for (int k = 0; k < iters; ++k) {
    const double gc = grad_intercept_at(state, kind, alpha, c);
    if (std::abs(gc) < 1e-13) break;
    c -= gc / qc;
  }
  return c;
}

// Logistic curvature weights w_i s_i (1 - s_i) / n at the current predictor,
// s = sigma(-y theta).
Eigen::VectorXd logistic_curvature(const RiskState& state,
                                   const Eigen::VectorXd& alpha, double c) {
  const double n = static_cast<double>(state.y.size());
  Eigen::VectorXd theta = state.Z * alpha;
  theta.array() += c;
  Eigen::VectorXd D(state.y.size());
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(state.y[i] * theta[i]));
    D[i] = state.w[i] * s * (1.0 - s) / n;
  }
  return D;
}

// Exact 1-d Newton on the logistic intercept with halving backtracking.
double newton_intercept(const RiskState& state, const Eigen::VectorXd& alpha,
                        double c, double tol = 1e-13) {
  double r_cur = risk_at(state, LossKind::Logistic, alpha, c);
  for (int k = 0; k < 60; ++k) {
    const double gc = grad_intercept_at(state, LossKind::Logistic, alpha, c);
    if (std::abs(gc) < tol) break;
    const double hcc =
        std::max(logistic_curvature(state, alpha, c).sum(), 1e-300);
    double t = 1.0;
    const double p = -gc / hcc;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      const double r_new = risk_at(state, LossKind::Logistic, alpha, c + t * p);
      if (r_new <= r_cur) {
        c += t * p;
        r_cur = r_new;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return c;
}

void finish_diagnostics(const RiskState& state, LossKind kind,
                        FittedEstimator& fit) {
  fit.diagnostics.final_risk =
      risk_at(state, kind, fit.alpha, fit.intercept);
  fit.diagnostics.alpha_max_abs =
      fit.alpha.size() ? fit.alpha.lpNorm<Eigen::Infinity>() : 0.0;
}

}  // namespace

const char* mode_name(EstimatorMode mode) {
  switch (mode) {
    case EstimatorMode::HAR: return "har";
    case EstimatorMode::HAL: return "hal";
    case EstimatorMode::HAGL: return "hagl";
  }
  return "?";
}

FittedEstimator fit_har(const RiskState& state, LossKind kind, double lambda,
                        const SolverConfig& config) {
  if (lambda < 0.0) throw std::invalid_argument("fit_har: lambda must be >= 0");
  const double n = static_cast<double>(state.y.size());
  const Eigen::VectorXd dsq = col_sq_norms(state.Z);

  FittedEstimator fit;
  fit.mode = EstimatorMode::HAR;
  fit.reg_value = lambda;

  if (kind == LossKind::MSE) {
    const double c = weighted_mean(state.y, state.w);
    const Eigen::VectorXd yt = state.y.array() - c;
    if (unit_weights(state.w)) {
      const Eigen::VectorXd t = state.Z.transpose() * yt;
      fit.alpha = (t.array() / (dsq.array() + n * lambda)).matrix();
    } else {
      Eigen::MatrixXd M =
          state.Z.transpose() * state.w.asDiagonal() * state.Z;
      M.diagonal().array() += n * lambda;
      fit.alpha =
          M.ldlt().solve(state.Z.transpose() * state.w.cwiseProduct(yt));
    }
    fit.intercept = c;
  } else {
    // Damped Newton on risk + lambda ||alpha||^2 with the intercept joined
    // into the step; the exact Hessian is dense in the r PC coordinates.
    const Eigen::Index r = state.Z.cols();
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(r);
    double c = state.intercept;
    double resid = std::numeric_limits<double>::infinity();
    double f_cur = risk_at(state, kind, alpha, c) + lambda * alpha.squaredNorm();
    int it = 0;
    for (; it < config.max_iter; ++it) {
      const Eigen::VectorXd g =
          grad_alpha_at(state, kind, alpha, c) + 2.0 * lambda * alpha;
      const double gc = grad_intercept_at(state, kind, alpha, c);
      resid = std::max(g.lpNorm<Eigen::Infinity>(), std::abs(gc));
      if (resid < config.grad_tol) break;

      const Eigen::VectorXd D = logistic_curvature(state, alpha, c);
      Eigen::MatrixXd H(r + 1, r + 1);
      H.topLeftCorner(r, r) = state.Z.transpose() * D.asDiagonal() * state.Z;
      H.topLeftCorner(r, r).diagonal().array() += 2.0 * lambda;
      H.col(r).head(r) = state.Z.transpose() * D;
      H.row(r).head(r) = H.col(r).head(r).transpose();
      H(r, r) = D.sum();
      H.diagonal().array() += 1e-12 * std::max(1.0, H.trace());
      Eigen::VectorXd rhs(r + 1);
      rhs.head(r) = -g;
      rhs[r] = -gc;
      const Eigen::VectorXd p = H.ldlt().solve(rhs);

      const double slope = g.dot(p.head(r)) + gc * p[r];
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
        const Eigen::VectorXd a_new = alpha + t * p.head(r);
        const double c_new = c + t * p[r];
        const double f_new =
            risk_at(state, kind, a_new, c_new) + lambda * a_new.squaredNorm();
        if (f_new <= f_cur + 1e-4 * t * slope) {
          alpha = a_new;
          c = c_new;
          f_cur = f_new;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    resid = std::max((grad_alpha_at(state, kind, alpha, c) +
                      2.0 * lambda * alpha)
                         .lpNorm<Eigen::Infinity>(),
                     std::abs(grad_intercept_at(state, kind, alpha, c)));
    fit.alpha = alpha;
    fit.intercept = c;
    fit.diagnostics.iterations = it;
    fit.diagnostics.converged = resid < config.grad_tol;
    if (!fit.diagnostics.converged) fit.diagnostics.note = "stalled";
  }
  fit.diagnostics.score_residual =
      (grad_alpha_at(state, kind, fit.alpha, fit.intercept) +
       2.0 * lambda * fit.alpha)
          .lpNorm<Eigen::Infinity>();
  finish_diagnostics(state, kind, fit);
  return fit;
}

namespace {

double hal_kkt_from(const Eigen::VectorXd& g, double lambda,
                    const Eigen::VectorXd& alpha) {
  double worst = 0.0;
  for (Eigen::Index m = 0; m < alpha.size(); ++m) {
    const double v = alpha[m] != 0.0
                         ? std::abs(g[m] + lambda * (alpha[m] > 0 ? 1.0 : -1.0))
                         : std::max(0.0, std::abs(g[m]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

double hal_kkt_residual(const RiskState& state, LossKind kind, double lambda,
                        const Eigen::VectorXd& alpha, double intercept) {
  return hal_kkt_from(grad_alpha_at(state, kind, alpha, intercept), lambda,
                      alpha);
}

// Active-set refinement of risk + lambda ||alpha||_1. The support's sign
// pattern is frozen, the restricted smooth problem gets one damped Newton
// step per pass with the step clipped at the first sign flip, and the worst
// inactive violation is brought into the support once the restricted
// equations are solved, until the full KKT residual clears tol.
void l1_polish(const RiskState& state, LossKind kind, double lambda,
               double tol, Eigen::VectorXd& alpha, double& c) {
  const double n = static_cast<double>(state.y.size());
  for (int pass = 0; pass < 80; ++pass) {
    if (kind == LossKind::Logistic)
      c = newton_intercept(state, alpha, c, 0.1 * tol);
    const Eigen::VectorXd g = grad_alpha_at(state, kind, alpha, c);

    std::vector<Eigen::Index> S;
    std::vector<double> sgn;
    double restricted = 0.0, viol = 0.0;
    Eigen::Index worst = -1;
    for (Eigen::Index m = 0; m < alpha.size(); ++m) {
      if (alpha[m] != 0.0) {
        S.push_back(m);
        sgn.push_back(alpha[m] > 0.0 ? 1.0 : -1.0);
        restricted =
            std::max(restricted, std::abs(g[m] + lambda * sgn.back()));
      } else {
        const double v = std::abs(g[m]) - lambda;
        if (v > viol) {
          viol = v;
          worst = m;
        }
      }
    }
    if (restricted < tol && viol < tol) return;
    if (restricted < 0.5 * tol && worst >= 0) {
      S.push_back(worst);
      sgn.push_back(g[worst] > 0.0 ? -1.0 : 1.0);
    }
    if (S.empty()) return;

    const Eigen::Index k = static_cast<Eigen::Index>(S.size());
    Eigen::MatrixXd ZS(state.Z.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j) ZS.col(j) = state.Z.col(S[j]);
    Eigen::VectorXd gs(k);
    for (Eigen::Index j = 0; j < k; ++j) gs[j] = g[S[j]] + lambda * sgn[j];

    Eigen::VectorXd p(k);
    double pc = 0.0, gc = 0.0;
    if (kind == LossKind::MSE) {
      Eigen::MatrixXd H =
          (2.0 / n) * ZS.transpose() * state.w.asDiagonal() * ZS;
      H.diagonal().array() += 1e-12 * std::max(1.0, H.trace());
      p = H.ldlt().solve(-gs);
    } else {
      const Eigen::VectorXd D = logistic_curvature(state, alpha, c);
      gc = grad_intercept_at(state, kind, alpha, c);
      Eigen::MatrixXd H(k + 1, k + 1);
      H.topLeftCorner(k, k) = ZS.transpose() * D.asDiagonal() * ZS;
      H.col(k).head(k) = ZS.transpose() * D;
      H.row(k).head(k) = H.col(k).head(k).transpose();
      H(k, k) = D.sum();
      H.diagonal().array() += 1e-12 * std::max(1.0, H.trace());
      Eigen::VectorXd rhs(k + 1);
      rhs.head(k) = -gs;
      rhs[k] = -gc;
      const Eigen::VectorXd sol = H.ldlt().solve(rhs);
      p = sol.head(k);
      pc = sol[k];
    }
    // Zero coordinates just admitted must move into their chosen orthant.
    for (Eigen::Index j = 0; j < k; ++j)
      if (alpha[S[j]] == 0.0 && p[j] * sgn[j] < 0.0) p[j] = 0.0;

    double t_max = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (alpha[S[j]] == 0.0 || p[j] * sgn[j] >= 0.0) continue;
      t_max = std::min(t_max, -alpha[S[j]] / p[j]);
    }
    const double slope = gs.dot(p) + gc * pc;
    if (!(slope < 0.0)) return;

    const double f_cur = risk_at(state, kind, alpha, c) +
                         lambda * alpha.lpNorm<1>();
    bool moved = false;
    double t = t_max;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      Eigen::VectorXd a_new = alpha;
      for (Eigen::Index j = 0; j < k; ++j) a_new[S[j]] += t * p[j];
      if (t == t_max)
        for (Eigen::Index j = 0; j < k; ++j)
          if (alpha[S[j]] != 0.0 && p[j] * sgn[j] < 0.0 &&
              -alpha[S[j]] / p[j] <= t_max)
            a_new[S[j]] = 0.0;
      const double c_new = c + t * pc;
      const double f_new =
          risk_at(state, kind, a_new, c_new) + lambda * a_new.lpNorm<1>();
      if (f_new <= f_cur + 1e-4 * t * slope) {
        alpha = a_new;
        c = c_new;
        moved = true;
        break;
      }
    }
    if (!moved) return;
  }
}

}  // namespace

FittedEstimator fit_hal(const RiskState& state, LossKind kind, double lambda,
                        const SolverConfig& config) {
  if (lambda < 0.0) throw std::invalid_argument("fit_hal: lambda must be >= 0");
  const double n = static_cast<double>(state.y.size());
  const Eigen::VectorXd dsq = col_sq_norms(state.Z);

  FittedEstimator fit;
  fit.mode = EstimatorMode::HAL;
  fit.reg_value = lambda;

  if (kind == LossKind::MSE && unit_weights(state.w)) {
    const double c = weighted_mean(state.y, state.w);
    const Eigen::VectorXd t = state.Z.transpose() * (state.y.array() - c).matrix();
    fit.alpha.resize(t.size());
    for (Eigen::Index m = 0; m < t.size(); ++m)
      fit.alpha[m] = soft(t[m], n * lambda / 2.0) / dsq[m];
    fit.intercept = c;
  } else {
    // Proximal steps in the per-coordinate majorizing metric (the loss
    // Hessian is dominated by c_loss diag(dsq)) identify the support; an
    // active-set Newton refinement then drives the KKT residual down.
    const double wmax = state.w.maxCoeff();
    const double c_loss =
        (kind == LossKind::MSE) ? 2.0 * wmax / n : wmax / (4.0 * n);
    const Eigen::VectorXd q = (c_loss * dsq.array()).matrix();
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(state.Z.cols());
    double c = (kind == LossKind::MSE) ? weighted_mean(state.y, state.w)
                                       : state.intercept;
    double resid = std::numeric_limits<double>::infinity();
    int it = 0;
    const int prox_iters = std::min(config.max_iter, 200);
    for (; it < prox_iters; ++it) {
      const Eigen::VectorXd g = grad_alpha_at(state, kind, alpha, c);
      const double gc = (kind == LossKind::Logistic)
                            ? grad_intercept_at(state, kind, alpha, c)
                            : 0.0;
      resid = std::max(hal_kkt_from(g, lambda, alpha), std::abs(gc));
      if (resid < config.grad_tol) break;
      for (Eigen::Index m = 0; m < alpha.size(); ++m)
        alpha[m] = soft(alpha[m] - g[m] / q[m], lambda / q[m]);
      if (kind == LossKind::Logistic)
        c = intercept_steps(state, kind, alpha, c, 2);
    }
    if (resid >= config.grad_tol) {
      l1_polish(state, kind, lambda, config.grad_tol, alpha, c);
      const double gc = (kind == LossKind::Logistic)
                            ? grad_intercept_at(state, kind, alpha, c)
                            : 0.0;
      resid = std::max(hal_kkt_residual(state, kind, lambda, alpha, c),
                       std::abs(gc));
    }
    fit.alpha = alpha;
    fit.intercept = c;
    fit.diagnostics.iterations = it;
    fit.diagnostics.converged = resid < config.grad_tol;
    if (!fit.diagnostics.converged) fit.diagnostics.note = "stalled";
  }
  fit.diagnostics.score_residual =
      hal_kkt_residual(state, kind, lambda, fit.alpha, fit.intercept);
  finish_diagnostics(state, kind, fit);
  return fit;
}

namespace {

// Renormalizes alpha onto the constraint and keeps the stats coherent:
// beta is linear in alpha and positive scaling preserves all signs, so only
// the norms rescale.
void renorm(double C, Eigen::VectorXd& alpha, BetaStats& st) {
  const double gamma = C / st.l1;
  alpha *= gamma;
  st.l1 = C;
  st.l2 *= gamma;
}

// Minimizes risk over the affine face {B alpha = rhs}, where the rows of B
// are the restricted constraint gradient and one coefficient-map row per
// coordinate pinned at zero. At the face optimum grad lies in the row space
// of B, which is the tangent-score stationarity the constrained estimator is
// meant to satisfy.
void face_solve(const RiskState& state, LossKind kind, const Eigen::MatrixXd& B,
                const Eigen::VectorXd& rhs, const Eigen::VectorXd& dsq,
                const SolverConfig& config, Eigen::VectorXd& alpha,
                double& c) {
  const double n = static_cast<double>(state.y.size());
  if (kind == LossKind::MSE) {
    if (unit_weights(state.w)) {
      const Eigen::VectorXd t =
          state.Z.transpose() * (state.y.array() - c).matrix();
      const Eigen::VectorXd au = (t.array() / dsq.array()).matrix();
      const Eigen::MatrixXd Bh =
          B * dsq.cwiseInverse().asDiagonal();  // B H^-1 up to scale
      Eigen::MatrixXd G = Bh * B.transpose();
      G.diagonal().array() += 1e-13 * std::max(1.0, G.trace());
      const Eigen::VectorXd nu = G.ldlt().solve(B * au - rhs);
      alpha = au - Bh.transpose() * nu;
    } else {
      Eigen::MatrixXd M = state.Z.transpose() * state.w.asDiagonal() * state.Z;
      M.diagonal().array() += 1e-12 * M.trace() / static_cast<double>(M.rows());
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
      const Eigen::VectorXd p = ldlt.solve(
          state.Z.transpose() *
          state.w.cwiseProduct((state.y.array() - c).matrix()));
      const Eigen::MatrixXd Q = ldlt.solve(B.transpose());
      Eigen::MatrixXd G = B * Q;
      G.diagonal().array() += 1e-13 * std::max(1.0, G.trace());
      const Eigen::VectorXd nu = G.ldlt().solve(B * p - rhs);
      alpha = p - Q * nu;
    }
  } else {
    // Feasibility restore, then damped Newton inside the null space of B
    // with Levenberg-Marquardt damping; the intercept rides in the step.
    // Steps stay on {B alpha = rhs} exactly, and damping keeps the search
    // direction a descent direction even where the curvature collapses.
    const Eigen::Index r = state.Z.cols();
    {
      Eigen::MatrixXd G0 = B * B.transpose();
      G0.diagonal().array() += 1e-13 * std::max(1.0, G0.trace());
      alpha += B.transpose() * G0.ldlt().solve(rhs - B * alpha);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B.transpose());
    qr.setThreshold(1e-8);
    const Eigen::Index m = r - qr.rank();
    if (m == 0) {
      c = newton_intercept(state, alpha, c, 0.1 * config.polish_tol);
      return;
    }
    const Eigen::MatrixXd N =
        Eigen::MatrixXd(qr.householderQ()).rightCols(m);
    const Eigen::MatrixXd ZN = state.Z * N;
    double nu = 0.0;
    double r_cur = risk_at(state, kind, alpha, c);
    for (int step = 0; step < 200; ++step) {
      const Eigen::VectorXd g = grad_alpha_at(state, kind, alpha, c);
      const double gc = grad_intercept_at(state, kind, alpha, c);
      const Eigen::VectorXd gr = N.transpose() * g;
      if (std::max(gr.lpNorm<Eigen::Infinity>(), std::abs(gc)) <
          0.1 * config.polish_tol)
        break;

      const Eigen::VectorXd D = logistic_curvature(state, alpha, c);
      Eigen::MatrixXd H(m + 1, m + 1);
      H.topLeftCorner(m, m) = ZN.transpose() * D.asDiagonal() * ZN;
      H.col(m).head(m) = ZN.transpose() * D;
      H.row(m).head(m) = H.col(m).head(m).transpose();
      H(m, m) = D.sum();
      const double floor = 1e-12 * std::max(1.0, H.trace());
      Eigen::VectorXd full_g(m + 1);
      full_g.head(m) = gr;
      full_g[m] = gc;

      bool moved = false;
      for (int attempt = 0; attempt < 40 && !moved; ++attempt) {
        Eigen::MatrixXd A = H;
        A.diagonal().array() += floor + nu;
        const Eigen::VectorXd sol = A.ldlt().solve(-full_g);
        const double slope = full_g.dot(sol);
        if (slope < 0.0) {
          const Eigen::VectorXd p = N * sol.head(m);
          const double pc = sol[m];
          double t = 1.0;
          for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            const double r_new =
                risk_at(state, kind, alpha + t * p, c + t * pc);
            if (r_new <= r_cur + 1e-4 * t * slope) {
              alpha += t * p;
              c += t * pc;
              r_cur = r_new;
              moved = true;
              break;
            }
          }
        }
        if (!moved) nu = std::max(10.0 * nu, 1e2 * floor);
      }
      if (!moved) break;
      nu *= 0.25;
    }
  }
}

// Active-set refinement on the constraint surface. Signs of beta are frozen
// into a face; the face minimizer is approached along straight segments that
// keep the signed sum at C exactly, coordinates whose sign would flip are
// pinned to zero one at a time (gaining a row in B), and pinned coordinates
// whose multiplier leaves the subdifferential box are released. Returns the
// pinned coordinate set.
std::vector<std::int64_t> polish_hagl(const RiskState& state,
                                      const PCWorkingModel& model,
                                      LossKind kind, double C,
                                      const SolverConfig& config,
                                      Eigen::VectorXd& alpha, double& c) {
  std::vector<std::int64_t> pinned;  // append order, aligned with rows of P
  if (model.basis.size() > config.oracle_cap) return pinned;
  const Eigen::Index r = state.Z.cols();
  const Eigen::VectorXd dsq = col_sq_norms(state.Z);
  Eigen::MatrixXd P(0, r);  // coefficient-map rows of pinned coordinates
  std::vector<char> is_pinned(static_cast<std::size_t>(model.basis.size()), 0);
  double r_cur = risk_at(state, kind, alpha, c);

  // Drops the pinned coordinate whose multiplier violates the subdifferential
  // box worst, relative to the face multiplier mu[0]. Returns whether one was
  // released.
  const auto release_worst = [&](const Eigen::VectorXd& mu) {
    const double mu0 = mu[0];
    int worst = -1;
    double worst_ratio = 1.0 + 1e-8;
    for (int k = 0; k < static_cast<int>(pinned.size()); ++k) {
      const double ratio =
          std::abs(mu[k + 1]) / std::max(std::abs(mu0), 1e-300);
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst = k;
      }
    }
    if (worst < 0) return false;
    is_pinned[static_cast<std::size_t>(pinned[worst])] = 0;
    pinned.erase(pinned.begin() + worst);
    Eigen::MatrixXd Pn(P.rows() - 1, r);
    Eigen::Index rr = 0;
    for (Eigen::Index k = 0; k < P.rows(); ++k)
      if (k != worst) Pn.row(rr++) = P.row(k);
    P = std::move(Pn);
    return true;
  };

  for (int face = 0; face < config.polish_faces; ++face) {
    Eigen::VectorXd beta = beta_coefficients(model, alpha, config.oracle_cap);
    Eigen::VectorXd stilde(beta.size());
    double l1 = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      if (is_pinned[static_cast<std::size_t>(j)]) {
        stilde[j] = 0.0;
      } else {
        stilde[j] = beta[j] > 0.0 ? 1.0 : (beta[j] < 0.0 ? -1.0 : 0.0);
        l1 += std::abs(beta[j]);
      }
    }
    if (!(l1 > 0.0)) break;
    alpha *= C / l1;
    const Eigen::VectorXd a1 =
        ((model.factors.U.transpose() * design_apply(model, stilde)).array() /
         model.factors.d.array())
            .matrix();

    Eigen::MatrixXd B(1 + P.rows(), r);
    B.row(0) = a1.transpose();
    if (P.rows() > 0) B.bottomRows(P.rows()) = P;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(B.rows());
    rhs[0] = C;

    const Eigen::VectorXd g = grad_alpha_at(state, kind, alpha, c);
    Eigen::MatrixXd G = B * B.transpose();
    G.diagonal().array() += 1e-13 * std::max(1.0, G.trace());
    const Eigen::VectorXd mu = G.ldlt().solve(B * g);
    const double resid = (g - B.transpose() * mu).norm();
    const double gc = (kind == LossKind::Logistic)
                          ? grad_intercept_at(state, kind, alpha, c)
                          : 0.0;
    if (resid < config.polish_tol && std::abs(gc) < config.polish_tol) {
      // Release test: a pinned coordinate stays only while its multiplier
      // sits inside the subdifferential box given the face multiplier mu[0].
      if (!release_worst(mu)) break;
      continue;
    }

    Eigen::VectorXd target = alpha;
    double c_target = c;
    face_solve(state, kind, B, rhs, dsq, config, target, c_target);
    const double r_target = risk_at(state, kind, target, c_target);
    if (!std::isfinite(r_target) || r_target >= r_cur) {
      // A face that admits no descent while the projected gradient is still
      // large means the pin set is too big; shed the worst pin and retry.
      if (!release_worst(mu)) break;
      continue;
    }

    const Eigen::VectorXd beta_t =
        beta_coefficients(model, target, config.oracle_cap);
    // First sign flip along the segment; the signed sum stays at C up to it.
    double t_hit = 1.0;
    Eigen::Index hit = -1;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      if (stilde[j] == 0.0) continue;
      if (stilde[j] * beta_t[j] > 0.0) continue;
      const double denom = beta[j] - beta_t[j];
      const double tj = denom != 0.0 ? beta[j] / denom : 0.0;
      if (tj < t_hit) {
        t_hit = tj;
        hit = j;
      }
    }
    if (t_hit < 0.0) t_hit = 0.0;
    alpha += t_hit * (target - alpha);
    c += t_hit * (c_target - c);
    r_cur = risk_at(state, kind, alpha, c);
    if (hit >= 0 && static_cast<Eigen::Index>(pinned.size()) < r - 1) {
      pinned.push_back(hit);
      is_pinned[static_cast<std::size_t>(hit)] = 1;
      P.conservativeResize(P.rows() + 1, r);
      P.row(P.rows() - 1) = pc_basis_row(model, hit).transpose();
    }
  }
  return pinned;
}

}  // namespace

FittedEstimator fit_hagl(const RiskState& state, const PCWorkingModel& model,
                         LossKind kind, double C,
                         const Eigen::VectorXd& alpha_init,
                         const SolverConfig& config, double intercept_init) {
  if (!(C > 0.0)) throw std::invalid_argument("fit_hagl: C must be positive");
  const Eigen::Index r = state.Z.cols();

  FittedEstimator fit;
  fit.mode = EstimatorMode::HAGL;
  fit.reg_value = C;

  double c = (kind == LossKind::MSE)
                 ? weighted_mean(state.y, state.w)
                 : (std::isnan(intercept_init) ? state.intercept
                                               : intercept_init);

  if (r == 1) {
    // The constraint set is two points; compare them directly.
    const double unit_l1 =
        beta_stats_streaming(model, Eigen::VectorXd::Ones(1)).l1;
    if (!(unit_l1 > 0.0))
      throw std::runtime_error("fit_hagl: degenerate single-component model");
    const double mag = C / unit_l1;
    double best_risk = std::numeric_limits<double>::infinity();
    for (const double s : {mag, -mag}) {
      Eigen::VectorXd a(1);
      a[0] = s;
      double ci = c;
      if (kind == LossKind::Logistic) ci = newton_intercept(state, a, ci);
      const double rr = risk_at(state, kind, a, ci);
      if (rr < best_risk) {
        best_risk = rr;
        fit.alpha = a;
        fit.intercept = ci;
      }
    }
    fit.diagnostics.converged = true;
    finish_diagnostics(state, kind, fit);
    return fit;
  }

  Eigen::VectorXd alpha = alpha_init;
  BetaStats st = beta_stats_streaming(model, alpha);
  if (!(st.l1 > 0.0))
    throw std::invalid_argument("fit_hagl: alpha_init maps to zero beta");
  renorm(C, alpha, st);
  if (kind == LossKind::Logistic) c = intercept_steps(state, kind, alpha, c, 10);
  double r_cur = risk_at(state, kind, alpha, c);

  bool converged = false;
  std::string note;
  int it = 0;
  for (; it < config.max_iter; ++it) {
    const Eigen::VectorXd a1 = constraint_gradient(model, st);
    const Eigen::VectorXd a = alpha.cwiseProduct(a1);
    const Eigen::VectorXd g = grad_alpha_at(state, kind, alpha, c);
    Eigen::VectorXd Dstar = alpha.cwiseProduct(g);
    const double an2 = a.squaredNorm();
    if (std::sqrt(an2) >= 1e-12) Dstar -= (Dstar.dot(a) / an2) * a;
    if (Dstar.squaredNorm() < config.grad_tol) {
      converged = true;
      break;
    }
    const double maxd = Dstar.lpNorm<Eigen::Infinity>();
    double delta = config.step_init;
    while (delta >= 1.0 / maxd) delta *= config.step_shrink;

    bool accepted = false;
    Eigen::VectorXd cand;
    BetaStats cst;
    double r_new = 0.0;
    for (; delta >= config.step_floor; delta *= config.step_shrink) {
      cand = alpha.cwiseProduct(
          (1.0 - delta * Dstar.array()).matrix().eval());
      cst = beta_stats_streaming(model, cand);
      if (!(cst.l1 > 0.0) || !std::isfinite(cst.l1)) continue;
      renorm(C, cand, cst);
      r_new = risk_at(state, kind, cand, c);
      if (std::isfinite(r_new) && r_new < r_cur) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      converged = true;
      note = "line search exhausted at step floor";
      break;
    }
    alpha.swap(cand);
    st = std::move(cst);
    if (kind == LossKind::Logistic) {
      c = intercept_steps(state, kind, alpha, c, 3);
      r_new = risk_at(state, kind, alpha, c);
    }
    const double drop = (r_cur - r_new) / std::max(std::abs(r_cur), 1e-12);
    r_cur = r_new;
    if (drop < config.risk_tol) {
      converged = true;
      break;
    }
  }
  if (it >= config.max_iter) {
    converged = false;
    note = "max_iter reached";
  }
  if (kind == LossKind::Logistic) c = newton_intercept(state, alpha, c);

  std::vector<std::int64_t> pins;
  if (config.polish) pins = polish_hagl(state, model, kind, C, config, alpha, c);

  st = beta_stats_streaming(model, alpha);
  if (st.l1 > 0.0) renorm(C, alpha, st);
  fit.alpha = alpha;
  fit.intercept = c;
  fit.diagnostics.iterations = it;
  fit.diagnostics.converged = converged;
  fit.diagnostics.note = note;
  if (!pins.empty()) {
    if (!fit.diagnostics.note.empty()) fit.diagnostics.note += "; ";
    fit.diagnostics.note +=
        std::to_string(pins.size()) + " coordinate(s) pinned at zero";
  }

  // Residuals measured at the returned point. With pinned coordinates the
  // stationarity residual is the gradient component outside the span of the
  // restricted constraint gradient and the pinned coefficient-map rows.
  const BetaStats final_st = beta_stats_streaming(model, alpha);
  fit.diagnostics.constraint_residual =
      std::abs(final_st.l1 - C) / std::max(C, 1e-12);
  const Eigen::VectorXd g = grad_alpha_at(state, kind, alpha, fit.intercept);
  if (pins.empty()) {
    const Eigen::VectorXd a1 = constraint_gradient(model, final_st);
    const double a1n2 = a1.squaredNorm();
    fit.diagnostics.score_residual =
        a1n2 > 0.0 ? (g - (g.dot(a1) / a1n2) * a1).norm() : g.norm();
  } else {
    const Eigen::VectorXd beta =
        beta_coefficients(model, alpha, config.oracle_cap);
    Eigen::VectorXd stilde(beta.size());
    std::vector<char> is_pinned(static_cast<std::size_t>(beta.size()), 0);
    for (const std::int64_t j : pins) is_pinned[static_cast<std::size_t>(j)] = 1;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
      stilde[j] = is_pinned[static_cast<std::size_t>(j)]
                      ? 0.0
                      : (beta[j] > 0.0 ? 1.0 : (beta[j] < 0.0 ? -1.0 : 0.0));
    Eigen::MatrixXd B(1 + static_cast<Eigen::Index>(pins.size()), r);
    B.row(0) =
        ((model.factors.U.transpose() * design_apply(model, stilde)).array() /
         model.factors.d.array())
            .matrix()
            .transpose();
    for (std::size_t k = 0; k < pins.size(); ++k)
      B.row(static_cast<Eigen::Index>(k) + 1) =
          pc_basis_row(model, pins[k]).transpose();
    Eigen::MatrixXd G = B * B.transpose();
    G.diagonal().array() += 1e-13 * std::max(1.0, G.trace());
    fit.diagnostics.score_residual =
        (g - B.transpose() * G.ldlt().solve(B * g)).norm();
  }
  finish_diagnostics(state, kind, fit);
  return fit;
}

WarmStart warm_start_hagl(const RiskState& state, const PCWorkingModel& model,
                          LossKind kind, double lambda_har,
                          const SolverConfig& config) {
  WarmStart ws;
  ws.har = fit_har(state, kind, lambda_har, config);
  if (ws.har.alpha.lpNorm<Eigen::Infinity>() < 1e-14)
    throw std::runtime_error(
        "warm_start_hagl: HAR solution is zero; decrease lambda_har");
  ws.C = beta_stats_streaming(model, ws.har.alpha).l1;
  if (!(ws.C > 0.0))
    throw std::runtime_error(
        "warm_start_hagl: HAR warm start has zero constraint level");
  return ws;
}

FittedEstimator fit_hagl_two_step(const RiskState& state,
                                  const PCWorkingModel& model, LossKind kind,
                                  double lambda_har,
                                  const SolverConfig& config) {
  const WarmStart ws = warm_start_hagl(state, model, kind, lambda_har, config);
  return fit_hagl(state, model, kind, ws.C, ws.har.alpha, config,
                  ws.har.intercept);
}

}  // namespace pcha
