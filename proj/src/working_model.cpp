#include "pcha/working_model.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pcha {

PCWorkingModel make_working_model(const Eigen::MatrixXd& X_raw, int max_degree,
                                  double rank_tol) {
  PCWorkingModel model;
  model.scaling = fit_scaling(X_raw);
  model.basis = make_basis(model.scaling.apply(X_raw), max_degree);
  Eigen::MatrixXd K = build_kernel_matrix(model.basis, model.basis.knots);
  model.factors = spectral_decompose(K, rank_tol);
  model.Z = model.factors.U * model.factors.d.asDiagonal();
  return model;
}

namespace {

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Walks the implicit basis one knot at a time. For each knot the visitor
// receives the subset-sum lattice T with T[s] = beta_{l,s} for every
// admissible mask s, plus the per-row active masks.
template <typename Visitor>
void scan_knots(const PCWorkingModel& model, const Eigen::VectorXd& w,
                Visitor&& visit) {
  const Eigen::Index n = model.n();
  const int d = static_cast<int>(model.basis.dim());
  const std::size_t lattice = std::size_t{1} << d;
  std::vector<double> T(lattice);
  std::vector<std::uint32_t> masks(static_cast<std::size_t>(n));
  const Eigen::MatrixXd& X = model.basis.knots;

  for (Eigen::Index l = 0; l < n; ++l) {
    std::fill(T.begin(), T.end(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::uint32_t m = 0;
      for (int j = 0; j < d; ++j)
        if (X(i, j) >= X(l, j)) m |= (1u << j);
      masks[static_cast<std::size_t>(i)] = m;
      T[m] += w[i];
    }
    // Superset sums: T[s] <- sum over masks containing s.
    for (int j = 0; j < d; ++j) {
      const std::uint32_t bit = 1u << j;
      for (std::uint32_t m = 0; m < lattice; ++m)
        if (!(m & bit)) T[m] += T[m | bit];
    }
    visit(l, T, masks);
  }
}

}  // namespace

BetaStats beta_stats_streaming(const PCWorkingModel& model,
                               const Eigen::VectorXd& alpha) {
  const Eigen::Index n = model.n();
  const int d = static_cast<int>(model.basis.dim());
  const std::size_t lattice = std::size_t{1} << d;
  const Eigen::VectorXd w =
      model.factors.U * (alpha.array() / model.factors.d.array()).matrix();

  BetaStats stats;
  stats.g = Eigen::VectorXd::Zero(n);
  double l2sq = 0.0;
  std::vector<double> S(lattice);
  std::vector<char> admissible(lattice, 0);
  for (std::uint32_t sub : model.basis.subsets) admissible[sub] = 1;

  scan_knots(model, w,
             [&](Eigen::Index, const std::vector<double>& T,
                 const std::vector<std::uint32_t>& masks) {
               std::fill(S.begin(), S.end(), 0.0);
               for (std::uint32_t s = 1; s < lattice; ++s) {
                 if (!admissible[s]) continue;
                 const double b = T[s];
                 stats.l1 += std::abs(b);
                 l2sq += b * b;
                 S[s] = sign_of(b);
               }
               // Subset sums turn per-section signs into per-row totals:
               // after the transform S[m] = sum_{s subset of m} sign(beta_s).
               for (int j = 0; j < d; ++j) {
                 const std::uint32_t bit = 1u << j;
                 for (std::uint32_t m = 0; m < lattice; ++m)
                   if (m & bit) S[m] += S[m ^ bit];
               }
               for (Eigen::Index i = 0; i < n; ++i)
                 stats.g[i] += S[masks[static_cast<std::size_t>(i)]];
             });
  stats.l2 = std::sqrt(l2sq);
  return stats;
}

Eigen::VectorXd constraint_gradient(const PCWorkingModel& model,
                                    const BetaStats& stats) {
  return ((model.factors.U.transpose() * stats.g).array() /
          model.factors.d.array())
      .matrix();
}

Eigen::VectorXd beta_coefficients(const PCWorkingModel& model,
                                  const Eigen::VectorXd& alpha,
                                  std::int64_t cap) {
  if (model.basis.size() > cap)
    throw std::runtime_error("beta_coefficients: basis size exceeds cap");
  const Eigen::VectorXd w =
      model.factors.U * (alpha.array() / model.factors.d.array()).matrix();
  const Eigen::Index S = static_cast<Eigen::Index>(model.basis.subsets.size());
  Eigen::VectorXd beta(model.basis.size());
  scan_knots(model, w,
             [&](Eigen::Index l, const std::vector<double>& T,
                 const std::vector<std::uint32_t>&) {
               for (Eigen::Index s = 0; s < S; ++s)
                 beta[l * S + s] =
                     T[model.basis.subsets[static_cast<std::size_t>(s)]];
             });
  return beta;
}

Eigen::VectorXd design_apply(const PCWorkingModel& model,
                             const Eigen::VectorXd& v) {
  const Eigen::Index n = model.n();
  const int d = static_cast<int>(model.basis.dim());
  const std::size_t lattice = std::size_t{1} << d;
  const Eigen::Index S = static_cast<Eigen::Index>(model.basis.subsets.size());
  if (v.size() != model.basis.size())
    throw std::invalid_argument("design_apply: coefficient length mismatch");
  const Eigen::MatrixXd& X = model.basis.knots;

  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  std::vector<double> T(lattice);
  for (Eigen::Index l = 0; l < n; ++l) {
    std::fill(T.begin(), T.end(), 0.0);
    for (Eigen::Index s = 0; s < S; ++s)
      T[model.basis.subsets[static_cast<std::size_t>(s)]] = v[l * S + s];
    // Subset sums: T[m] <- sum_{s subset of m} v_{l,s}.
    for (int j = 0; j < d; ++j) {
      const std::uint32_t bit = 1u << j;
      for (std::uint32_t m = 0; m < lattice; ++m)
        if (m & bit) T[m] += T[m ^ bit];
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      std::uint32_t m = 0;
      for (int j = 0; j < d; ++j)
        if (X(i, j) >= X(l, j)) m |= (1u << j);
      out[i] += T[m];
    }
  }
  return out;
}

Eigen::VectorXd basis_column(const PCWorkingModel& model, std::int64_t j) {
  const Eigen::Index n = model.n();
  const int d = static_cast<int>(model.basis.dim());
  const Eigen::Index S = static_cast<Eigen::Index>(model.basis.subsets.size());
  if (j < 0 || j >= model.basis.size())
    throw std::invalid_argument("basis_column: index out of range");
  const Eigen::Index l = j / S;
  const std::uint32_t sub = model.basis.subsets[static_cast<std::size_t>(j % S)];
  const Eigen::MatrixXd& X = model.basis.knots;
  Eigen::VectorXd phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bool on = true;
    for (int k = 0; k < d && on; ++k)
      if ((sub & (1u << k)) && X(i, k) < X(l, k)) on = false;
    phi[i] = on ? 1.0 : 0.0;
  }
  return phi;
}

Eigen::VectorXd pc_basis_row(const PCWorkingModel& model, std::int64_t j) {
  const Eigen::VectorXd phi = basis_column(model, j);
  return ((model.factors.U.transpose() * phi).array() /
          model.factors.d.array())
      .matrix();
}

Eigen::MatrixXd pc_design_at(const PCWorkingModel& model,
                             const Eigen::MatrixXd& X_raw) {
  const Eigen::MatrixXd Kx =
      kernel_cross(model.basis, model.scaling.apply(X_raw), model.basis.knots);
  return Kx * (model.factors.U *
               model.factors.d.cwiseInverse().asDiagonal());
}

Eigen::VectorXd predict(const PCWorkingModel& model,
                        const Eigen::VectorXd& alpha, double intercept,
                        const Eigen::MatrixXd& X_raw) {
  return (pc_design_at(model, X_raw) * alpha).array() + intercept;
}

}  // namespace pcha
