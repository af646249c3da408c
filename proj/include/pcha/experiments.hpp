#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcha/causal.hpp"
#include "pcha/cross_validation.hpp"

namespace pcha {

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

// Y = 2 sin(8 pi X^2)/X + N(0, 2^2), X ~ Uniform(0,1).
Dataset gen_oscillatory(Eigen::Index n, std::uint64_t seed);

enum class AdditiveTarget { Linear, Harmonic };

// d^{-1/2} sum x_j, or d^{-1/2} sum sin(2 pi x_j).
double additive_truth(const Eigen::RowVectorXd& x, AdditiveTarget target);

Dataset gen_additive(Eigen::Index n, int d, AdditiveTarget target,
                     double noise_sd, std::uint64_t seed);

// W1 ~ U(-2,2), W2 ~ N(0, 0.25); logit pi1 = W1 + 0.5 W2 + W1 W2 + 0.3 W2^2;
// A ~ Bernoulli(pi1); Y = 2 W1 - 2 W2^2 + W2 + W1 W2 + 0.5 + N(0, 0.25).
// The true ATE is zero. Propensities are clamped into
// [eps_pos, 1 - eps_pos] before treatment is drawn, so the stored pi1 is the
// exact sampling propensity.
CausalDataset gen_ate(Eigen::Index n, std::uint64_t seed,
                      double eps_pos = 1e-3);

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  int points = 0;
  int dropped = 0;  // nonpositive values removed before the log-log fit
};

// OLS of log(value) on log(n).
SlopeFit estimate_slope(const std::vector<std::pair<double, double>>& points);

struct StudyRecord {
  std::string study;
  std::string mode;
  int d = 0;
  Eigen::Index n = 0;
  int replicate = 0;
  std::string metric;
  double value = 0.0;
};

struct SlopeRecord {
  std::string study;
  std::string mode;
  std::string metric;
  int d = 0;
  SlopeFit fit;
};

struct AteSummaryRow {
  std::string mode;
  bool undersmoothed = false;
  double bias = 0.0;
  double true_se = 0.0;
  double bias_over_se = 0.0;
  double oracle_coverage = 0.0;
  double mean_eic_mean = 0.0;
  double mean_abs_eic_mean = 0.0;
  double mean_eic_sd = 0.0;
  int replications = 0;
};

struct StudyResult {
  std::string study;
  std::vector<StudyRecord> records;
  std::vector<SlopeRecord> slopes;
  std::vector<AteSummaryRow> ate_summary;
  std::vector<std::string> warnings;
};

struct StudyConfig {
  std::string study = "norms";  // norms | rates | ate
  std::string preset = "desk";
  std::uint64_t seed = 1;
  int threads = 1;
  int cv_folds = 3;
  int grid_size = 20;
  std::vector<int> n_grid;
  int replicates = 0;
  std::vector<std::pair<AdditiveTarget, int>> rate_panels;
  int rate_test_size = 1000;
  double rate_noise_sd = 0.3;
  int ate_n = 300;
  bool cv_per_replicate = true;  // false: freeze lambda_cv and tau at rep 1
  int undersmooth_steps = 40;
  double undersmooth_ratio = 0.85;
  double eps_pos = 1e-3;
  std::vector<EstimatorMode> modes = {EstimatorMode::HAR, EstimatorMode::HAL,
                                      EstimatorMode::HAGL};
  SolverConfig solver;
};

// Fills grids/replicates for "desk" (CI scale) or "paper" (full scale).
StudyConfig make_study_config(const std::string& study,
                              const std::string& preset, std::uint64_t seed);

StudyResult run_norm_study(const StudyConfig& config);
StudyResult run_rate_study(const StudyConfig& config);
StudyResult run_ate_study(const StudyConfig& config);
StudyResult run_study(const StudyConfig& config);

// Long-format records: study,mode,d,n,replicate,metric,value.
void write_study_csv(const StudyResult& result, const std::string& path);

}  // namespace pcha
