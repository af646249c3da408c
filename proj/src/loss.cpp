#include "pcha/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace pcha {

namespace {

// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t))
                  : std::exp(t) / (1.0 + std::exp(t));
}

}  // namespace

double weighted_mean(const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  const double total = w.sum();
  if (total <= 0.0) throw std::invalid_argument("weighted_mean: weight sum <= 0");
  return v.dot(w) / total;
}

RiskState make_risk_state(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                          LossKind kind) {
  RiskState state;
  state.Z = Z;
  state.w = Eigen::VectorXd::Ones(y.size());
  if (kind == LossKind::Logistic) {
    state.y.resize(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] == 1.0)
        state.y[i] = 1.0;
      else if (y[i] == 0.0 || y[i] == -1.0)
        state.y[i] = -1.0;
      else
        throw std::invalid_argument(
            "make_risk_state: logistic response must be 0/1 or -1/+1");
    }
    state.intercept = 0.0;
  } else {
    state.y = y;
    state.intercept = weighted_mean(y, state.w);
  }
  return state;
}

double risk_at(const RiskState& state, LossKind kind,
               const Eigen::VectorXd& alpha, double intercept) {
  const Eigen::Index n = state.y.size();
  const Eigen::VectorXd theta =
      (state.Z * alpha).array() + intercept;
  double acc = 0.0;
  if (kind == LossKind::MSE) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = state.y[i] - theta[i];
      acc += state.w[i] * r * r;
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      acc += state.w[i] * softplus(-state.y[i] * theta[i]);
  }
  return acc / static_cast<double>(n);
}

double risk(const RiskState& state, LossKind kind,
            const Eigen::VectorXd& alpha) {
  return risk_at(state, kind, alpha, state.intercept);
}

Eigen::VectorXd grad_alpha_at(const RiskState& state, LossKind kind,
                              const Eigen::VectorXd& alpha, double intercept) {
  const Eigen::Index n = state.y.size();
  const Eigen::VectorXd theta = (state.Z * alpha).array() + intercept;
  Eigen::VectorXd v(n);
  if (kind == LossKind::MSE) {
    v = -2.0 * state.w.cwiseProduct(state.y - theta);
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      v[i] = -state.w[i] * state.y[i] * sigmoid(-state.y[i] * theta[i]);
  }
  return state.Z.transpose() * v / static_cast<double>(n);
}

Eigen::VectorXd grad_alpha(const RiskState& state, LossKind kind,
                           const Eigen::VectorXd& alpha) {
  return grad_alpha_at(state, kind, alpha, state.intercept);
}

double grad_intercept_at(const RiskState& state, LossKind kind,
                         const Eigen::VectorXd& alpha, double intercept) {
  const Eigen::Index n = state.y.size();
  const Eigen::VectorXd theta = (state.Z * alpha).array() + intercept;
  double acc = 0.0;
  if (kind == LossKind::MSE) {
    acc = -2.0 * state.w.dot(state.y - theta);
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      acc += -state.w[i] * state.y[i] * sigmoid(-state.y[i] * theta[i]);
  }
  return acc / static_cast<double>(n);
}

Eigen::VectorXd path_gradient(const RiskState& state, LossKind kind,
                              const Eigen::VectorXd& alpha) {
  return alpha.cwiseProduct(grad_alpha(state, kind, alpha));
}

double score(const RiskState& state, LossKind kind,
             const Eigen::VectorXd& alpha, const Eigen::VectorXd& f) {
  return grad_alpha(state, kind, alpha).dot(f);
}

double risk_from_theta(const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                       LossKind kind) {
  const Eigen::Index n = y.size();
  double acc = 0.0;
  if (kind == LossKind::MSE) {
    acc = (y - theta).squaredNorm();
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double yy = (y[i] == 0.0) ? -1.0 : y[i];
      acc += softplus(-yy * theta[i]);
    }
  }
  return acc / static_cast<double>(n);
}

}  // namespace pcha
