#pragma once

#include <Eigen/Core>

namespace pcha {

enum class LossKind { MSE, Logistic };

// Empirical risk data on the PC design. Weights default to ones; the
// bootstrap substitutes multinomial counts (summing to n) so that refits see
// the resampled empirical measure without touching the design. Risks stay
// (1/n)-normalized either way.
struct RiskState {
  Eigen::MatrixXd Z;  // n x r
  Eigen::VectorXd y;  // logistic responses coded in {-1, +1}
  Eigen::VectorXd w;  // observation weights
  double intercept = 0.0;
};

// Builds the state for a model's training design. MSE sets the intercept to
// the (weighted) response mean; logistic starts it at zero and 0/1 responses
// are recoded to -1/+1.
RiskState make_risk_state(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                          LossKind kind);

double weighted_mean(const Eigen::VectorXd& v, const Eigen::VectorXd& w);

// (1/n) sum_i w_i loss(y_i, theta_i) at theta = Z alpha + intercept.
double risk(const RiskState& state, LossKind kind, const Eigen::VectorXd& alpha);
double risk_at(const RiskState& state, LossKind kind,
               const Eigen::VectorXd& alpha, double intercept);

// dR/dalpha. MSE: -(2/n) Z^T (w . resid); logistic: -(1/n) Z^T (w . y . s)
// with s = sigma(-y theta).
Eigen::VectorXd grad_alpha(const RiskState& state, LossKind kind,
                           const Eigen::VectorXd& alpha);
Eigen::VectorXd grad_alpha_at(const RiskState& state, LossKind kind,
                              const Eigen::VectorXd& alpha, double intercept);

double grad_intercept_at(const RiskState& state, LossKind kind,
                         const Eigen::VectorXd& alpha, double intercept);

// Gradient representer along the multiplicative paths (1 + delta h) alpha:
// D(alpha)(m) = alpha(m) * dR/dalpha(m).
Eigen::VectorXd path_gradient(const RiskState& state, LossKind kind,
                              const Eigen::VectorXd& alpha);

// Empirical score in coefficient direction f: P_n L'(theta) (sum f_m phi_m).
double score(const RiskState& state, LossKind kind,
             const Eigen::VectorXd& alpha, const Eigen::VectorXd& f);

// Loss evaluated from linear predictors directly (validation risk).
double risk_from_theta(const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                       LossKind kind);

}  // namespace pcha
