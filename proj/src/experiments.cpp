#include "pcha/experiments.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pcha/csv.hpp"
#include "pcha/rng.hpp"

namespace pcha {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Seed streams so that every (study, cell, replicate) draws independently and
// aggregation order never matters.
constexpr std::uint64_t kNormStream = 1000;
constexpr std::uint64_t kRateStream = 2000;
constexpr std::uint64_t kAteStream = 3000;
constexpr std::uint64_t kFoldStream = 17;
constexpr std::uint64_t kTestStream = 23;

void parallel_for(int count, int threads,
                  const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  const int t = std::min(threads, count);
  for (int k = 0; k < t; ++k) {
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

Dataset gen_oscillatory(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.X.resize(n, 1);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double x;
    do { x = rng.uniform(); } while (x == 0.0);
    data.X(i, 0) = x;
    data.y[i] = 2.0 * std::sin(8.0 * kPi * x * x) / x + rng.gaussian(0.0, 2.0);
  }
  return data;
}

double additive_truth(const Eigen::RowVectorXd& x, AdditiveTarget target) {
  const double root = std::sqrt(static_cast<double>(x.size()));
  if (target == AdditiveTarget::Linear) return x.sum() / root;
  double s = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) s += std::sin(2.0 * kPi * x[j]);
  return s / root;
}

Dataset gen_additive(Eigen::Index n, int d, AdditiveTarget target,
                     double noise_sd, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.X.resize(n, d);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) data.X(i, j) = rng.uniform();
    data.y[i] =
        additive_truth(data.X.row(i), target) + rng.gaussian(0.0, noise_sd);
  }
  return data;
}

CausalDataset gen_ate(Eigen::Index n, std::uint64_t seed, double eps_pos) {
  Rng rng(seed);
  CausalDataset data;
  data.W.resize(n, 2);
  data.A.resize(n);
  data.Y.resize(n);
  data.pi1.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w1 = rng.uniform(-2.0, 2.0);
    const double w2 = rng.gaussian(0.0, 0.5);
    const double logit = w1 + 0.5 * w2 + w1 * w2 + 0.3 * w2 * w2;
    double p1 = 1.0 / (1.0 + std::exp(-logit));
    p1 = std::min(std::max(p1, eps_pos), 1.0 - eps_pos);
    data.W(i, 0) = w1;
    data.W(i, 1) = w2;
    data.pi1[i] = p1;
    data.A[i] = rng.bernoulli(p1);
    data.Y[i] = 2.0 * w1 - 2.0 * w2 * w2 + w2 + w1 * w2 + 0.5 +
                rng.gaussian(0.0, 0.5);
  }
  return data;
}

SlopeFit estimate_slope(const std::vector<std::pair<double, double>>& points) {
  SlopeFit fit;
  std::vector<std::pair<double, double>> logs;
  for (const auto& [n, v] : points) {
    if (v > 0.0 && n > 0.0)
      logs.emplace_back(std::log(n), std::log(v));
    else
      ++fit.dropped;
  }
  fit.points = static_cast<int>(logs.size());
  if (fit.points < 3) {
    fit.slope = std::numeric_limits<double>::quiet_NaN();
    fit.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : logs) { sx += x; sy += y; }
  const double mx = sx / fit.points, my = sy / fit.points;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : logs) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0.0) {
    fit.slope = std::numeric_limits<double>::quiet_NaN();
    fit.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  fit.slope = sxy / sxx;
  double rss = 0.0;
  for (const auto& [x, y] : logs) {
    const double r = y - my - fit.slope * (x - mx);
    rss += r * r;
  }
  fit.stderr_ = fit.points > 2
                    ? std::sqrt(rss / (fit.points - 2) / sxx)
                    : 0.0;
  return fit;
}

StudyConfig make_study_config(const std::string& study,
                              const std::string& preset, std::uint64_t seed) {
  if (study != "norms" && study != "rates" && study != "ate")
    throw std::invalid_argument("unknown study '" + study +
                                "' (expected norms, rates, or ate)");
  if (preset != "desk" && preset != "paper")
    throw std::invalid_argument("unknown preset '" + preset +
                                "' (expected desk or paper)");
  StudyConfig cfg;
  cfg.study = study;
  cfg.preset = preset;
  cfg.seed = seed;
  cfg.solver.max_iter = 120;
  cfg.solver.polish_faces = 30;
  const bool paper = preset == "paper";
  if (study == "norms") {
    cfg.n_grid = paper ? std::vector<int>{100, 200, 400, 800, 1600, 3200}
                       : std::vector<int>{100, 200, 400, 800, 1600};
    cfg.replicates = paper ? 10 : 5;
  } else if (study == "rates") {
    cfg.n_grid = paper ? std::vector<int>{400, 600, 900, 1500}
                       : std::vector<int>{100, 200, 400, 800};
    cfg.replicates = paper ? 10 : 5;
    if (paper)
      cfg.rate_panels = {{AdditiveTarget::Linear, 3},
                         {AdditiveTarget::Linear, 5},
                         {AdditiveTarget::Linear, 10},
                         {AdditiveTarget::Harmonic, 3},
                         {AdditiveTarget::Harmonic, 5},
                         {AdditiveTarget::Harmonic, 10}};
    else
      cfg.rate_panels = {{AdditiveTarget::Linear, 1},
                         {AdditiveTarget::Linear, 3},
                         {AdditiveTarget::Harmonic, 3}};
  } else {
    cfg.replicates = paper ? 500 : 200;
    cfg.ate_n = 300;
  }
  return cfg;
}

namespace {

const char* target_name(AdditiveTarget t) {
  return t == AdditiveTarget::Linear ? "linear" : "harmonic";
}

double count_nonzero(const Eigen::VectorXd& alpha) {
  double c = 0.0;
  for (Eigen::Index m = 0; m < alpha.size(); ++m)
    if (std::abs(alpha[m]) > 1e-10) c += 1.0;
  return c;
}

void append_slopes(StudyResult& result, const std::string& study,
                   const std::string& mode, const std::string& metric, int d,
                   const std::vector<std::pair<double, double>>& pts) {
  SlopeRecord rec;
  rec.study = study;
  rec.mode = mode;
  rec.metric = metric;
  rec.d = d;
  rec.fit = estimate_slope(pts);
  if (rec.fit.dropped > 0)
    result.warnings.push_back(study + "/" + mode + "/" + metric + ": " +
                              std::to_string(rec.fit.dropped) +
                              " nonpositive values dropped from slope fit");
  result.slopes.push_back(std::move(rec));
}

}  // namespace

StudyResult run_norm_study(const StudyConfig& config) {
  StudyResult result;
  result.study = "norms";
  const int cells = static_cast<int>(config.n_grid.size());
  const int jobs = cells * config.replicates;
  std::vector<std::vector<StudyRecord>> slots(static_cast<std::size_t>(jobs));
  std::vector<std::vector<std::string>> warn_slots(
      static_cast<std::size_t>(jobs));

  parallel_for(jobs, config.threads, [&](int job) {
    const int n_idx = job / config.replicates;
    const int rep = job % config.replicates + 1;
    const Eigen::Index n = config.n_grid[static_cast<std::size_t>(n_idx)];
    const std::uint64_t seed_r = derive_seed(
        config.seed, kNormStream + static_cast<std::uint64_t>(n_idx),
        static_cast<std::uint64_t>(rep));
    const Dataset data = gen_oscillatory(n, seed_r);
    const CVPlan plan =
        make_folds(n, config.cv_folds, derive_seed(seed_r, kFoldStream, 0));
    CVContext ctx = make_cv_context(data.X, data.y, LossKind::MSE, plan);
    if (static_cast<int>(ctx.plan.grid.size()) != config.grid_size)
      ctx.plan.grid = default_lambda_grid(ctx.model, config.grid_size);

    auto& out = slots[static_cast<std::size_t>(job)];
    for (const EstimatorMode mode : config.modes) {
      const CVResult res = cv_select(ctx, mode, config.solver);
      const Eigen::VectorXd& alpha = res.refit.alpha;
      const BetaStats stats = beta_stats_streaming(ctx.model, alpha);
      const double a2 = alpha.norm();
      if (std::abs(stats.l2 - a2) > 1e-6 * std::max(1.0, a2))
        warn_slots[static_cast<std::size_t>(job)].push_back(
            std::string("norms: ||beta||_2 vs ||alpha||_2 mismatch for ") +
            mode_name(mode) + " at n=" + std::to_string(n));
      const auto metric = [&](const char* name, double value) {
        out.push_back({"norms", mode_name(mode), 1, n, rep, name, value});
      };
      metric("alpha_l1", alpha.lpNorm<1>());
      metric("alpha_l2", a2);
      metric("alpha_linf", alpha.lpNorm<Eigen::Infinity>());
      metric("beta_l1", stats.l1);
      metric("beta_l2", stats.l2);
      metric("j_n", count_nonzero(alpha));
      metric("selected_reg", res.selected_value);
    }
  });

  for (int job = 0; job < jobs; ++job) {
    auto& s = slots[static_cast<std::size_t>(job)];
    result.records.insert(result.records.end(), s.begin(), s.end());
    auto& w = warn_slots[static_cast<std::size_t>(job)];
    result.warnings.insert(result.warnings.end(), w.begin(), w.end());
  }

  for (const EstimatorMode mode : config.modes) {
    for (const char* metric :
         {"alpha_l1", "alpha_l2", "alpha_linf", "beta_l1", "j_n"}) {
      std::vector<std::pair<double, double>> pts;
      for (const StudyRecord& rec : result.records)
        if (rec.mode == mode_name(mode) && rec.metric == metric)
          pts.emplace_back(static_cast<double>(rec.n), rec.value);
      append_slopes(result, "norms", mode_name(mode), metric, 1, pts);
    }
  }
  return result;
}

StudyResult run_rate_study(const StudyConfig& config) {
  StudyResult result;
  result.study = "rates";
  const int panels = static_cast<int>(config.rate_panels.size());
  const int cells = static_cast<int>(config.n_grid.size());
  const int jobs = panels * cells * config.replicates;
  std::vector<std::vector<StudyRecord>> slots(static_cast<std::size_t>(jobs));

  parallel_for(jobs, config.threads, [&](int job) {
    const int p = job / (cells * config.replicates);
    const int rest = job % (cells * config.replicates);
    const int n_idx = rest / config.replicates;
    const int rep = rest % config.replicates + 1;
    const auto [target, d] = config.rate_panels[static_cast<std::size_t>(p)];
    const Eigen::Index n = config.n_grid[static_cast<std::size_t>(n_idx)];
    const std::uint64_t seed_r = derive_seed(
        config.seed,
        kRateStream + 100 * static_cast<std::uint64_t>(p) +
            static_cast<std::uint64_t>(n_idx),
        static_cast<std::uint64_t>(rep));

    const Dataset data =
        gen_additive(n, d, target, config.rate_noise_sd, seed_r);
    Rng test_rng(derive_seed(seed_r, kTestStream, 0));
    Eigen::MatrixXd Xtest(config.rate_test_size, d);
    Eigen::VectorXd psi0(config.rate_test_size);
    for (Eigen::Index i = 0; i < Xtest.rows(); ++i) {
      for (int j = 0; j < d; ++j) Xtest(i, j) = test_rng.uniform();
      psi0[i] = additive_truth(Xtest.row(i), target);
    }

    const CVPlan plan =
        make_folds(n, config.cv_folds, derive_seed(seed_r, kFoldStream, 0));
    CVContext ctx = make_cv_context(data.X, data.y, LossKind::MSE, plan);
    const Eigen::MatrixXd Ztest = pc_design_at(ctx.model, Xtest);

    const std::string study =
        std::string("rates-") + target_name(target);
    auto& out = slots[static_cast<std::size_t>(job)];
    for (const EstimatorMode mode : config.modes) {
      const CVResult res = cv_select(ctx, mode, config.solver);
      const Eigen::VectorXd theta =
          (Ztest * res.refit.alpha).array() + res.refit.intercept;
      const double mse = (theta - psi0).squaredNorm() /
                         static_cast<double>(psi0.size());
      out.push_back({study, mode_name(mode), d, n, rep, "test_mse", mse});
      out.push_back(
          {study, mode_name(mode), d, n, rep, "selected_reg",
           res.selected_value});
    }
  });

  for (auto& s : slots)
    result.records.insert(result.records.end(), s.begin(), s.end());

  for (int p = 0; p < panels; ++p) {
    const auto [target, d] = config.rate_panels[static_cast<std::size_t>(p)];
    const std::string study = std::string("rates-") + target_name(target);
    for (const EstimatorMode mode : config.modes) {
      std::vector<std::pair<double, double>> pts;
      for (const int n : config.n_grid) {
        double acc = 0.0;
        int count = 0;
        for (const StudyRecord& rec : result.records)
          if (rec.study == study && rec.d == d &&
              rec.mode == mode_name(mode) && rec.metric == "test_mse" &&
              rec.n == n) {
            acc += rec.value;
            ++count;
          }
        if (count > 0) pts.emplace_back(n, acc / count);
      }
      append_slopes(result, study, mode_name(mode), "test_mse", d, pts);
    }
  }
  return result;
}

namespace {

struct AteRepOutcome {
  double psi_cv = 0.0, eic_mean_cv = 0.0, eic_sd_cv = 0.0, lambda_cv = 0.0;
  double psi_us = 0.0, eic_mean_us = 0.0, eic_sd_us = 0.0, lambda_us = 0.0;
  double tau = 0.0;
  bool us_satisfied = false;
};

AteRepOutcome ate_one_mode(const CausalDataset& data, CVContext& ctx,
                           const OutcomeModel& om, EstimatorMode mode,
                           const StudyConfig& config, double frozen_lambda,
                           double frozen_tau) {
  AteRepOutcome out;
  double lambda_cv = frozen_lambda;
  if (std::isnan(lambda_cv)) {
    const CVResult res = cv_select(ctx, mode, config.solver);
    lambda_cv = res.selected_value;
  }
  out.lambda_cv = lambda_cv;

  const FittedEstimator cv_fit =
      fit_outcome(om, mode, lambda_cv, config.solver);
  const MuPair cv_mu = predict_mu(om, cv_fit);
  out.psi_cv = plugin_ate(cv_mu.mu1, cv_mu.mu0);
  const EICRecord cv_rec =
      eic(data, cv_mu.mu1, cv_mu.mu0, lambda_cv, config.eps_pos);
  out.eic_mean_cv = cv_rec.mean;
  out.eic_sd_cv = cv_rec.sd;

  const std::vector<double> grid = undersmooth_grid(
      lambda_cv, config.undersmooth_steps, config.undersmooth_ratio);
  const UndersmoothResult us =
      undersmooth(data, om, mode, lambda_cv, grid, config.solver,
                  config.eps_pos, frozen_tau);
  const MuPair us_mu = predict_mu(om, us.fit);
  out.psi_us = plugin_ate(us_mu.mu1, us_mu.mu0);
  out.eic_mean_us = us.record.mean;
  out.eic_sd_us = us.record.sd;
  out.lambda_us = us.lambda_star;
  out.tau = us.tau;
  out.us_satisfied = us.satisfied;
  return out;
}

}  // namespace

StudyResult run_ate_study(const StudyConfig& config) {
  StudyResult result;
  result.study = "ate";
  const int R = config.replicates;
  const int n_modes = static_cast<int>(config.modes.size());
  std::vector<std::vector<AteRepOutcome>> outcomes(
      static_cast<std::size_t>(R),
      std::vector<AteRepOutcome>(static_cast<std::size_t>(n_modes)));

  std::vector<double> frozen_lambda(static_cast<std::size_t>(n_modes),
                                    std::numeric_limits<double>::quiet_NaN());
  std::vector<double> frozen_tau(static_cast<std::size_t>(n_modes),
                                 std::numeric_limits<double>::quiet_NaN());

  const auto run_rep = [&](int rep0) {
    const int rep = rep0 + 1;
    const std::uint64_t seed_r = derive_seed(config.seed, kAteStream,
                                             static_cast<std::uint64_t>(rep));
    const CausalDataset data =
        gen_ate(config.ate_n, seed_r, config.eps_pos);
    const Eigen::MatrixXd X = stacked_design(data);
    const CVPlan plan = make_folds(X.rows(), config.cv_folds,
                                   derive_seed(seed_r, kFoldStream, 0));
    CVContext ctx = make_cv_context(X, data.Y, LossKind::MSE, plan);
    OutcomeModel om = make_outcome_model(data, ctx.model);
    for (int m = 0; m < n_modes; ++m)
      outcomes[static_cast<std::size_t>(rep0)][static_cast<std::size_t>(m)] =
          ate_one_mode(data, ctx, om, config.modes[static_cast<std::size_t>(m)],
                       config, frozen_lambda[static_cast<std::size_t>(m)],
                       frozen_tau[static_cast<std::size_t>(m)]);
  };

  int first_parallel = 0;
  if (!config.cv_per_replicate && R > 0) {
    // Once-off protocol: lambda_cv and tau frozen at the first replication.
    run_rep(0);
    for (int m = 0; m < n_modes; ++m) {
      frozen_lambda[static_cast<std::size_t>(m)] =
          outcomes[0][static_cast<std::size_t>(m)].lambda_cv;
      frozen_tau[static_cast<std::size_t>(m)] =
          outcomes[0][static_cast<std::size_t>(m)].tau;
    }
    first_parallel = 1;
  }
  parallel_for(R - first_parallel, config.threads,
               [&](int i) { run_rep(i + first_parallel); });

  const int d = 2;
  for (int rep0 = 0; rep0 < R; ++rep0) {
    for (int m = 0; m < n_modes; ++m) {
      const AteRepOutcome& o =
          outcomes[static_cast<std::size_t>(rep0)][static_cast<std::size_t>(m)];
      const char* mode = mode_name(config.modes[static_cast<std::size_t>(m)]);
      const auto metric = [&](const char* name, double value) {
        result.records.push_back(
            {"ate", mode, d, config.ate_n, rep0 + 1, name, value});
      };
      metric("ate", o.psi_cv);
      metric("eic_mean", o.eic_mean_cv);
      metric("eic_sd", o.eic_sd_cv);
      metric("lambda_cv", o.lambda_cv);
      metric("ate_us", o.psi_us);
      metric("eic_mean_us", o.eic_mean_us);
      metric("eic_sd_us", o.eic_sd_us);
      metric("lambda_us", o.lambda_us);
      metric("tau", o.tau);
      metric("us_satisfied", o.us_satisfied ? 1.0 : 0.0);
    }
  }

  for (int m = 0; m < n_modes; ++m) {
    for (const bool us : {false, true}) {
      AteSummaryRow row;
      row.mode = mode_name(config.modes[static_cast<std::size_t>(m)]);
      row.undersmoothed = us;
      row.replications = R;
      double s = 0.0;
      for (int r = 0; r < R; ++r)
        s += us ? outcomes[static_cast<std::size_t>(r)]
                      [static_cast<std::size_t>(m)].psi_us
                : outcomes[static_cast<std::size_t>(r)]
                      [static_cast<std::size_t>(m)].psi_cv;
      row.bias = s / R;  // truth is zero
      double ss = 0.0;
      for (int r = 0; r < R; ++r) {
        const AteRepOutcome& o =
            outcomes[static_cast<std::size_t>(r)][static_cast<std::size_t>(m)];
        const double psi = us ? o.psi_us : o.psi_cv;
        ss += (psi - row.bias) * (psi - row.bias);
      }
      row.true_se = R > 1 ? std::sqrt(ss / (R - 1)) : 0.0;
      row.bias_over_se = row.true_se > 0.0 ? row.bias / row.true_se : 0.0;
      int covered = 0;
      double em = 0.0, eam = 0.0, esd = 0.0;
      for (int r = 0; r < R; ++r) {
        const AteRepOutcome& o =
            outcomes[static_cast<std::size_t>(r)][static_cast<std::size_t>(m)];
        const double psi = us ? o.psi_us : o.psi_cv;
        if (std::abs(psi) <= 1.96 * row.true_se) ++covered;
        const double eic_mean = us ? o.eic_mean_us : o.eic_mean_cv;
        em += eic_mean;
        eam += std::abs(eic_mean);
        esd += us ? o.eic_sd_us : o.eic_sd_cv;
      }
      row.oracle_coverage = static_cast<double>(covered) / R;
      row.mean_eic_mean = em / R;
      row.mean_abs_eic_mean = eam / R;
      row.mean_eic_sd = esd / R;
      result.ate_summary.push_back(std::move(row));
    }
  }
  return result;
}

StudyResult run_study(const StudyConfig& config) {
  if (config.study == "norms") return run_norm_study(config);
  if (config.study == "rates") return run_rate_study(config);
  if (config.study == "ate") return run_ate_study(config);
  throw std::invalid_argument("run_study: unknown study '" + config.study +
                              "'");
}

void write_study_csv(const StudyResult& result, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(result.records.size());
  for (const StudyRecord& rec : result.records)
    rows.push_back({rec.study, rec.mode, std::to_string(rec.d),
                    std::to_string(rec.n), std::to_string(rec.replicate),
                    rec.metric, format_double(rec.value)});
  write_csv(path, {"study", "mode", "d", "n", "replicate", "metric", "value"},
            rows);
}

}  // namespace pcha
