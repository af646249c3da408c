#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pcha/rng.hpp"
#include "pcha/solvers.hpp"
#include "pcha/spectral.hpp"
#include "pcha/working_model.hpp"

using namespace pcha;

TEST_SUITE_BEGIN("spectral_model");

TEST_CASE("two-point spectrum worked example") {
  // K = [[1,1],[1,2]] has eigenvalues (3 +- sqrt 5)/2.
  Eigen::MatrixXd K(2, 2);
  K << 1, 1, 1, 2;
  const SpectralFactors f = spectral_decompose(K);
  REQUIRE(f.rank() == 2);
  CHECK(f.d[0] * f.d[0] ==
        doctest::Approx((3.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-12));
  CHECK(f.d[1] * f.d[1] ==
        doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-12));
  CHECK(f.d[0] > f.d[1]);
  // reconstruction
  const Eigen::MatrixXd R =
      f.U * f.d.array().square().matrix().asDiagonal() * f.U.transpose();
  CHECK((R - K).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identity input gives unit spectrum") {
  const SpectralFactors f = spectral_decompose(Eigen::MatrixXd::Identity(4, 4));
  REQUIRE(f.rank() == 4);
  CHECK((f.d.array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("rank-deficient input truncates") {
  Eigen::VectorXd v(3);
  v << 1, 2, 3;
  const Eigen::MatrixXd K = v * v.transpose();  // rank one
  const SpectralFactors f = spectral_decompose(K);
  CHECK(f.rank() == 1);
  CHECK(f.d[0] * f.d[0] == doctest::Approx(v.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("asymmetric input is rejected") {
  Eigen::MatrixXd K(2, 2);
  K << 1, 0.5, 0.7, 1;
  CHECK_THROWS_AS(spectral_decompose(K), std::invalid_argument);
  CHECK_THROWS_AS(spectral_decompose(Eigen::MatrixXd::Zero(3, 3)),
                  std::runtime_error);
}

TEST_CASE("column orientation is deterministic") {
  Eigen::MatrixXd K(2, 2);
  K << 2, 0, 0, 1;
  const SpectralFactors f = spectral_decompose(K);
  CHECK(f.U(0, 0) == doctest::Approx(1.0));
  CHECK(f.U(1, 1) == doctest::Approx(1.0));
}

namespace {

struct SmallModel {
  PCWorkingModel model;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

SmallModel random_model(Rng& rng, Eigen::Index n, int d, int q = 0) {
  oracle::Instance inst = oracle::random_instance(rng, n, d);
  SmallModel out;
  out.model = make_working_model(inst.X, q);
  out.X = inst.X;
  out.y = inst.y;
  return out;
}

}  // namespace

TEST_CASE("factor columns are orthonormal and the design is orthogonal") {
  Rng rng(10);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.uniform_int(15));
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    const SmallModel sm = random_model(rng, n, d);
    const Eigen::Index r = sm.model.rank();
    const Eigen::MatrixXd UtU =
        sm.model.factors.U.transpose() * sm.model.factors.U;
    CHECK((UtU - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-8);
    const Eigen::MatrixXd ZtZ = sm.model.Z.transpose() * sm.model.Z;
    Eigen::MatrixXd off = ZtZ;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() < 1e-8);
    CHECK((ZtZ.diagonal().array() -
           sm.model.factors.d.array().square())
              .abs()
              .maxCoeff() < 1e-8);
  }
}

TEST_CASE("coefficient map preserves the Euclidean norm") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const SmallModel sm =
        random_model(rng, 4 + static_cast<Eigen::Index>(rng.uniform_int(12)),
                     1 + static_cast<int>(rng.uniform_int(3)));
    const Eigen::MatrixXd E = oracle::coefficient_map(sm.model);
    const Eigen::Index r = sm.model.rank();
    CHECK((E.transpose() * E - Eigen::MatrixXd::Identity(r, r))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
    Eigen::VectorXd alpha(r);
    for (Eigen::Index m = 0; m < r; ++m) alpha[m] = rng.gaussian();
    CHECK(std::abs((E * alpha).norm() - alpha.norm()) < 1e-8);
  }
}

TEST_CASE("streaming beta statistics agree with the materialized oracle") {
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.uniform_int(15));
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    const int q = static_cast<int>(rng.uniform_int(
        static_cast<std::uint64_t>(d) + 1));
    const SmallModel sm = random_model(rng, n, d, q);
    Eigen::VectorXd alpha(sm.model.rank());
    for (Eigen::Index m = 0; m < alpha.size(); ++m) alpha[m] = rng.gaussian();

    const BetaStats st = beta_stats_streaming(sm.model, alpha);
    const oracle::BetaStatsOracle ref = oracle::beta_stats(sm.model, alpha);
    CHECK(std::abs(st.l1 - ref.l1) < 1e-9 * std::max(1.0, ref.l1));
    CHECK(std::abs(st.l2 - ref.l2) < 1e-9 * std::max(1.0, ref.l2));
    CHECK((st.g - ref.g).cwiseAbs().maxCoeff() < 1e-9);
    const Eigen::VectorXd a1 = constraint_gradient(sm.model, st);
    CHECK((a1 - ref.a1).cwiseAbs().maxCoeff() < 1e-9);

    const Eigen::VectorXd beta = beta_coefficients(sm.model, alpha);
    const Eigen::VectorXd beta_ref = oracle::beta_of_alpha(sm.model, alpha);
    CHECK((beta - beta_ref).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("zero alpha has zero beta statistics") {
  Rng rng(13);
  const SmallModel sm = random_model(rng, 8, 2);
  const BetaStats st = beta_stats_streaming(
      sm.model, Eigen::VectorXd::Zero(sm.model.rank()));
  CHECK(st.l1 == 0.0);
  CHECK(st.l2 == 0.0);
  CHECK(st.g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("design_apply and basis helpers match the materialized design") {
  Rng rng(14);
  const SmallModel sm = random_model(rng, 9, 2);
  const Eigen::MatrixXd H =
      materialize_design(sm.model.basis, sm.model.basis.knots);
  Eigen::VectorXd v(sm.model.basis.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = rng.gaussian();
  CHECK((design_apply(sm.model, v) - H * v).cwiseAbs().maxCoeff() < 1e-10);

  const Eigen::MatrixXd E = oracle::coefficient_map(sm.model);
  for (const std::int64_t j : {std::int64_t{0}, std::int64_t{5},
                               sm.model.basis.size() - 1}) {
    CHECK((basis_column(sm.model, j) - H.col(j)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pc_basis_row(sm.model, j) - E.row(j).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("training predictions equal the linear model in Z") {
  Rng rng(15);
  const SmallModel sm = random_model(rng, 10, 2);
  Eigen::VectorXd alpha(sm.model.rank());
  for (Eigen::Index m = 0; m < alpha.size(); ++m) alpha[m] = rng.gaussian();
  const Eigen::VectorXd pred = predict(sm.model, alpha, 0.25, sm.X);
  const Eigen::VectorXd direct = (sm.model.Z * alpha).array() + 0.25;
  CHECK((pred - direct).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("prediction matches the materialized basis at new points") {
  Rng rng(16);
  const SmallModel sm = random_model(rng, 8, 2);
  Eigen::VectorXd alpha(sm.model.rank());
  for (Eigen::Index m = 0; m < alpha.size(); ++m) alpha[m] = rng.gaussian();
  Eigen::MatrixXd Xnew(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) Xnew(i, j) = rng.uniform();
  const Eigen::VectorXd beta = oracle::beta_of_alpha(sm.model, alpha);
  const Eigen::MatrixXd Hnew =
      materialize_design(sm.model.basis, sm.model.scaling.apply(Xnew));
  const Eigen::VectorXd ref = (Hnew * beta).array() + 1.5;
  const Eigen::VectorXd pred = predict(sm.model, alpha, 1.5, Xnew);
  CHECK((pred - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("PC model attains the full-design least-squares risk") {
  Rng rng(17);
  for (int rep = 0; rep < 8; ++rep) {
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.uniform_int(12));
    const int d = 1 + static_cast<int>(rng.uniform_int(3));
    oracle::Instance inst = oracle::random_instance(rng, n, d);
    const PCWorkingModel model = make_working_model(inst.X);
    const RiskState state = make_risk_state(model.Z, inst.y, LossKind::MSE);

    // PC side: unpenalized minimum via the orthogonal design.
    const FittedEstimator ls = fit_har(state, LossKind::MSE, 0.0);
    const double pc_risk = ls.diagnostics.final_risk;

    // full design side: dense least squares on H with intercept column.
    const Eigen::MatrixXd H =
        materialize_design(model.basis, model.basis.knots);
    Eigen::MatrixXd Hc(H.rows(), H.cols() + 1);
    Hc << Eigen::VectorXd::Ones(H.rows()), H;
    const Eigen::VectorXd coef =
        Hc.colPivHouseholderQr().solve(inst.y);
    const double full_risk =
        (inst.y - Hc * coef).squaredNorm() / static_cast<double>(n);
    CHECK(std::abs(pc_risk - full_risk) < 1e-7);
  }
}

TEST_SUITE_END();
