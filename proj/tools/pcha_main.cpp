// Command-line front end: `pcha fit` for single-dataset fits (optionally with
// a treatment column, undersmoothing, and bootstrap intervals) and
// `pcha study` for the seeded simulation drivers. Exit codes: 0 success,
// 1 runtime failure, 2 usage or input error.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pcha/causal.hpp"
#include "pcha/cross_validation.hpp"
#include "pcha/csv.hpp"
#include "pcha/experiments.hpp"
#include "pcha/solvers.hpp"

using json = nlohmann::ordered_json;
using namespace pcha;

namespace {

EstimatorMode parse_mode(const std::string& s) {
  if (s == "har") return EstimatorMode::HAR;
  if (s == "hal") return EstimatorMode::HAL;
  if (s == "hagl") return EstimatorMode::HAGL;
  throw std::invalid_argument("unknown mode '" + s +
                              "'; valid: har, hal, hagl");
}

LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::MSE;
  if (s == "logistic") return LossKind::Logistic;
  throw std::invalid_argument("unknown loss '" + s + "'; valid: mse, logistic");
}

int env_threads() {
  const char* v = std::getenv("PCHA_THREADS");
  if (v == nullptr) return 1;
  const int t = std::atoi(v);
  return t >= 1 ? t : 1;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

int require_column(const CsvTable& table, const std::string& name,
                   const std::string& role) {
  const int idx = table.column(name);
  if (idx < 0)
    throw std::invalid_argument(role + " column '" + name +
                                "' not found in input header");
  return idx;
}

// All columns except the named ones, in header order.
Eigen::MatrixXd drop_columns(const CsvTable& table,
                             const std::set<int>& skip) {
  const Eigen::Index keep =
      table.cols() - static_cast<Eigen::Index>(skip.size());
  if (keep < 1)
    throw std::invalid_argument("no covariate columns left in input");
  Eigen::MatrixXd X(table.rows(), keep);
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < table.cols(); ++j)
    if (!skip.count(static_cast<int>(j))) X.col(c++) = table.values.col(j);
  return X;
}

json diagnostics_json(const FitDiagnostics& d) {
  json out;
  out["iterations"] = d.iterations;
  out["converged"] = d.converged;
  out["final_risk"] = d.final_risk;
  out["constraint_residual"] = d.constraint_residual;
  out["score_residual"] = d.score_residual;
  if (!d.note.empty()) out["note"] = d.note;
  return out;
}

struct FitArgs {
  std::string train;
  std::string mode = "hal";
  std::string loss = "mse";
  std::string response = "y";
  std::string treatment;
  std::string propensity;
  int folds = 3;
  int grid_size = 20;
  double reg = -1.0;  // < 0: select by cross-validation
  std::uint64_t seed = 1;
  int max_degree = 0;
  double rank_tol = 1e-10;
  std::string test;
  std::string predictions;
  std::string emit_beta;
  std::string summary;
  bool undersmooth = false;
  int bootstrap = 0;
  double level = 0.95;
  double eps_pos = 1e-3;
  int threads = 0;
};

json config_echo(const FitArgs& a) {
  json cfg;
  cfg["input"] = a.train;
  cfg["mode"] = a.mode;
  cfg["loss"] = a.loss;
  cfg["response"] = a.response;
  if (!a.treatment.empty()) {
    cfg["treatment"] = a.treatment;
    cfg["propensity"] = a.propensity;
    cfg["undersmooth"] = a.undersmooth;
    cfg["bootstrap"] = a.bootstrap;
    cfg["level"] = a.level;
    cfg["eps_pos"] = a.eps_pos;
  }
  cfg["folds"] = a.folds;
  cfg["grid_size"] = a.grid_size;
  if (a.reg >= 0.0) cfg["reg"] = a.reg;
  cfg["seed"] = a.seed;
  cfg["max_degree"] = a.max_degree;
  cfg["rank_tol"] = a.rank_tol;
  cfg["threads"] = a.threads;
  if (!a.test.empty()) cfg["test"] = a.test;
  if (!a.predictions.empty()) cfg["predictions"] = a.predictions;
  if (!a.emit_beta.empty()) cfg["emit_beta"] = a.emit_beta;
  return cfg;
}

void emit_summary(const FitArgs& args, const json& summary) {
  const std::string text = summary.dump(2) + "\n";
  if (args.summary.empty())
    std::cout << text;
  else
    write_text(args.summary, text);
}

// Model-shape block shared by both fit paths.
void fill_fit_block(json& out, const PCWorkingModel& model,
                    const FittedEstimator& fit) {
  const BetaStats stats = beta_stats_streaming(model, fit.alpha);
  int jn = 0;
  for (Eigen::Index m = 0; m < fit.alpha.size(); ++m)
    if (std::abs(fit.alpha[m]) > 1e-10) ++jn;
  out["selected_reg"] = fit.reg_value;
  if (fit.mode == EstimatorMode::HAGL) out["constraint_level"] = fit.reg_value;
  out["intercept"] = fit.intercept;
  out["alpha_l1"] = fit.alpha.lpNorm<1>();
  out["alpha_l2"] = fit.alpha.norm();
  out["beta_l1"] = stats.l1;
  out["j_n"] = jn;
  out["training_risk"] = fit.diagnostics.final_risk;
  out["constraint_residual"] = fit.diagnostics.constraint_residual;
  out["diagnostics"] = diagnostics_json(fit.diagnostics);
}

void write_beta_csv(const std::string& path, const PCWorkingModel& model,
                    const FittedEstimator& fit) {
  const Eigen::VectorXd beta = beta_coefficients(model, fit.alpha);
  const Eigen::Index S =
      static_cast<Eigen::Index>(model.basis.subsets.size());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(beta.size()));
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    rows.push_back({std::to_string(j / S),
                    std::to_string(model.basis.subsets[j % S]),
                    format_double(beta[j])});
  write_csv(path, {"knot", "subset_mask", "beta"}, rows);
}

void write_predictions_csv(const std::string& path,
                           const Eigen::VectorXd& pred) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(pred.size()));
  for (Eigen::Index i = 0; i < pred.size(); ++i)
    rows.push_back({format_double(pred[i])});
  write_csv(path, {"prediction"}, rows);
}

int run_fit_regression(const FitArgs& args) {
  CsvTable train;
  CsvTable test;
  EstimatorMode mode{};
  LossKind kind{};
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::MatrixXd Xtest;
  try {
    mode = parse_mode(args.mode);
    kind = parse_loss(args.loss);
    train = read_csv(args.train);
    const int yc = require_column(train, args.response, "response");
    y = train.values.col(yc);
    X = drop_columns(train, {yc});
    if (!args.test.empty()) {
      test = read_csv(args.test);
      if (test.cols() != X.cols())
        throw std::invalid_argument(
            "test file must carry exactly the covariate columns");
      Xtest = test.values;
    }
    if (args.folds < 2 || args.folds > static_cast<int>(X.rows()))
      throw std::invalid_argument("--folds must be in [2, n]");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    json out;
    out["command"] = "fit";
    out["config"] = config_echo(args);

    CVPlan plan = make_folds(X.rows(), args.folds, args.seed);
    CVContext ctx =
        make_cv_context(X, y, kind, plan, args.max_degree, args.rank_tol);
    out["n"] = static_cast<std::int64_t>(X.rows());
    out["d"] = static_cast<std::int64_t>(X.cols());
    out["rank"] = static_cast<std::int64_t>(ctx.model.rank());
    out["mode"] = args.mode;
    out["loss"] = args.loss;

    FittedEstimator fit;
    if (args.reg >= 0.0) {
      switch (mode) {
        case EstimatorMode::HAR:
          fit = fit_har(ctx.state, kind, args.reg);
          break;
        case EstimatorMode::HAL:
          fit = fit_hal(ctx.state, kind, args.reg);
          break;
        case EstimatorMode::HAGL:
          fit = fit_hagl_two_step(ctx.state, ctx.model, kind, args.reg);
          break;
      }
      out["reg_source"] = "fixed";
    } else {
      ctx.plan.grid = default_lambda_grid(ctx.model, args.grid_size);
      CVResult cv = cv_select(ctx, mode);
      fit = cv.refit;
      out["reg_source"] = "cv";
      json cvj;
      cvj["grid"] = cv.grid;
      cvj["mean_validation_risk"] = cv.mean_validation_risk;
      cvj["selected_index"] = cv.selected_index;
      cvj["selected_value"] = cv.selected_value;
      out["cv"] = cvj;
    }
    fill_fit_block(out, ctx.model, fit);

    if (!args.emit_beta.empty()) write_beta_csv(args.emit_beta, ctx.model, fit);
    if (!args.test.empty()) {
      const Eigen::VectorXd pred =
          predict(ctx.model, fit.alpha, fit.intercept, Xtest);
      const std::string path =
          args.predictions.empty() ? "predictions.csv" : args.predictions;
      write_predictions_csv(path, pred);
    }
    emit_summary(args, out);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_fit_ate(const FitArgs& args) {
  CausalDataset data;
  EstimatorMode mode{};
  try {
    mode = parse_mode(args.mode);
    if (parse_loss(args.loss) != LossKind::MSE)
      throw std::invalid_argument("treatment analysis uses --loss mse");
    const CsvTable train = read_csv(args.train);
    const int yc = require_column(train, args.response, "response");
    const int ac = require_column(train, args.treatment, "treatment");
    const int pc = require_column(train, args.propensity, "propensity");
    data.Y = train.values.col(yc);
    data.A = train.values.col(ac);
    data.pi1 = train.values.col(pc);
    data.W = drop_columns(train, {yc, ac, pc});
    if (args.folds < 2 || args.folds > static_cast<int>(data.Y.size()))
      throw std::invalid_argument("--folds must be in [2, n]");
    if (args.bootstrap != 0 && args.bootstrap < 50)
      throw std::invalid_argument("--bootstrap needs at least 50 replicates");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    json out;
    out["command"] = "fit";
    out["config"] = config_echo(args);

    const Eigen::MatrixXd S = stacked_design(data);
    CVPlan plan = make_folds(S.rows(), args.folds, args.seed);
    CVContext ctx = make_cv_context(S, data.Y, LossKind::MSE, plan,
                                    args.max_degree, args.rank_tol);
    out["n"] = static_cast<std::int64_t>(S.rows());
    out["d"] = static_cast<std::int64_t>(data.W.cols());
    out["rank"] = static_cast<std::int64_t>(ctx.model.rank());
    out["mode"] = args.mode;
    out["loss"] = args.loss;

    double lambda_cv = args.reg;
    FittedEstimator fit;
    if (args.reg >= 0.0) {
      OutcomeModel om_tmp = make_outcome_model(data, ctx.model);
      fit = fit_outcome(om_tmp, mode, args.reg);
      out["reg_source"] = "fixed";
    } else {
      ctx.plan.grid = default_lambda_grid(ctx.model, args.grid_size);
      CVResult cv = cv_select(ctx, mode);
      fit = cv.refit;
      lambda_cv = cv.selected_value;
      out["reg_source"] = "cv";
      json cvj;
      cvj["grid"] = cv.grid;
      cvj["mean_validation_risk"] = cv.mean_validation_risk;
      cvj["selected_index"] = cv.selected_index;
      cvj["selected_value"] = cv.selected_value;
      out["cv"] = cvj;
    }
    fill_fit_block(out, ctx.model, fit);

    OutcomeModel om = make_outcome_model(data, ctx.model);
    const MuPair mu = predict_mu(om, fit);
    const double psi = plugin_ate(mu.mu1, mu.mu0);
    const EICRecord rec =
        eic(data, mu.mu1, mu.mu0, lambda_cv, args.eps_pos);

    json ate;
    ate["estimate"] = psi;
    ate["eic_mean"] = rec.mean;
    ate["eic_sd"] = rec.sd;
    ate["lambda"] = lambda_cv;

    double reg_final = lambda_cv;
    if (args.undersmooth) {
      const std::vector<double> grid = undersmooth_grid(lambda_cv);
      const UndersmoothResult us = undersmooth(data, om, mode, lambda_cv, grid,
                                               SolverConfig{}, args.eps_pos);
      const MuPair mu_us = predict_mu(om, us.fit);
      json usj;
      usj["lambda"] = us.lambda_star;
      usj["estimate"] = plugin_ate(mu_us.mu1, mu_us.mu0);
      usj["eic_mean"] = us.record.mean;
      usj["eic_sd"] = us.record.sd;
      usj["tau"] = us.tau;
      usj["satisfied"] = us.satisfied;
      ate["undersmoothed"] = usj;
      reg_final = us.lambda_star;
    }
    if (args.bootstrap > 0) {
      const BootstrapInterval ci =
          bootstrap_ate(data, om, mode, reg_final, args.bootstrap,
                        args.seed, args.level);
      json bj;
      bj["replicates"] = args.bootstrap;
      bj["level"] = args.level;
      bj["lo"] = ci.lo;
      bj["hi"] = ci.hi;
      bj["skipped"] = ci.skipped;
      ate["bootstrap"] = bj;
    }
    out["ate"] = ate;

    if (!args.emit_beta.empty()) write_beta_csv(args.emit_beta, ctx.model, fit);
    emit_summary(args, out);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

struct StudyArgs {
  std::string study;
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  bool svg = false;
  bool cv_once = false;
  int threads = 0;
  int folds = 0;
  int grid_size = 0;
  int replicates = 0;
  int ate_n = 0;
  std::vector<int> n_grid;
  std::vector<std::string> modes;
};

json study_config_echo(const StudyConfig& c) {
  json cfg;
  cfg["study"] = c.study;
  cfg["preset"] = c.preset;
  cfg["seed"] = c.seed;
  cfg["threads"] = c.threads;
  cfg["cv_folds"] = c.cv_folds;
  cfg["grid_size"] = c.grid_size;
  cfg["n_grid"] = c.n_grid;
  cfg["replicates"] = c.replicates;
  std::vector<std::string> modes;
  for (const EstimatorMode m : c.modes) modes.emplace_back(mode_name(m));
  cfg["modes"] = modes;
  if (c.study == "rates") {
    std::vector<std::string> panels;
    for (const auto& [target, d] : c.rate_panels)
      panels.push_back(
          std::string(target == AdditiveTarget::Linear ? "linear" : "harmonic") +
          ":d=" + std::to_string(d));
    cfg["rate_panels"] = panels;
    cfg["rate_test_size"] = c.rate_test_size;
    cfg["rate_noise_sd"] = c.rate_noise_sd;
  }
  if (c.study == "ate") {
    cfg["ate_n"] = c.ate_n;
    cfg["cv_per_replicate"] = c.cv_per_replicate;
    cfg["undersmooth_steps"] = c.undersmooth_steps;
    cfg["undersmooth_ratio"] = c.undersmooth_ratio;
    cfg["eps_pos"] = c.eps_pos;
  }
  return cfg;
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// One panel per fitted slope: replicate-mean points on log10 axes plus the
// fitted line, nothing fancier.
std::string slopes_svg(const StudyResult& result) {
  const int W = 420, H = 300, ML = 60, MR = 20, MT = 40, MB = 45;
  std::ostringstream svg;
  const int panels = static_cast<int>(result.slopes.size());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H * panels << "\">\n";
  int py = 0;
  for (const SlopeRecord& rec : result.slopes) {
    std::map<double, std::pair<double, int>> by_n;  // n -> (sum, count)
    for (const StudyRecord& r : result.records) {
      if (r.mode != rec.mode || r.metric != rec.metric || r.d != rec.d)
        continue;
      auto& acc = by_n[static_cast<double>(r.n)];
      acc.first += r.value;
      acc.second += 1;
    }
    std::vector<std::pair<double, double>> pts;  // log10 n, log10 mean
    for (const auto& [n, acc] : by_n) {
      const double mean = acc.first / acc.second;
      if (mean > 0.0 && n > 0.0)
        pts.push_back({std::log10(n), std::log10(mean)});
    }
    double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    if (!pts.empty()) {
      xlo = xhi = pts[0].first;
      ylo = yhi = pts[0].second;
      for (const auto& [x, yv] : pts) {
        xlo = std::min(xlo, x); xhi = std::max(xhi, x);
        ylo = std::min(ylo, yv); yhi = std::max(yhi, yv);
      }
    }
    if (xhi - xlo < 1e-9) { xlo -= 0.5; xhi += 0.5; }
    if (yhi - ylo < 1e-9) { ylo -= 0.5; yhi += 0.5; }
    const double xpad = 0.06 * (xhi - xlo), ypad = 0.10 * (yhi - ylo);
    xlo -= xpad; xhi += xpad; ylo -= ypad; yhi += ypad;
    const auto px = [&](double x) {
      return ML + (x - xlo) / (xhi - xlo) * (W - ML - MR);
    };
    const auto pyv = [&](double yv) {
      return py + MT + (yhi - yv) / (yhi - ylo) * (H - MT - MB);
    };
    svg << "<rect x=\"" << ML << "\" y=\"" << py + MT << "\" width=\""
        << W - ML - MR << "\" height=\"" << H - MT - MB
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ML << "\" y=\"" << py + MT - 12
        << "\" font-size=\"13\">" << result.study << " " << rec.mode << " "
        << rec.metric << (rec.d > 1 ? " d=" + std::to_string(rec.d) : "")
        << "  slope=" << fmt3(rec.fit.slope) << " (se " << fmt3(rec.fit.stderr_)
        << ")</text>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"" << py + H - 12
        << "\" font-size=\"11\" text-anchor=\"middle\">log10 n</text>\n";
    double mx = 0, my = 0;
    for (const auto& [x, yv] : pts) { mx += x; my += yv; }
    if (!pts.empty()) { mx /= pts.size(); my /= pts.size(); }
    const double b = rec.fit.slope, a = my - b * mx;
    svg << "<line x1=\"" << px(xlo) << "\" y1=\"" << pyv(a + b * xlo)
        << "\" x2=\"" << px(xhi) << "\" y2=\"" << pyv(a + b * xhi)
        << "\" stroke=\"steelblue\"/>\n";
    for (const auto& [x, yv] : pts)
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << pyv(yv)
          << "\" r=\"3\" fill=\"crimson\"/>\n";
    py += H;
  }
  svg << "</svg>\n";
  return svg.str();
}

int run_study_cmd(const StudyArgs& args) {
  StudyConfig config;
  try {
    config = make_study_config(args.study, args.preset, args.seed);
    config.threads = args.threads > 0 ? args.threads : env_threads();
    if (args.folds > 0) config.cv_folds = args.folds;
    if (args.grid_size > 0) config.grid_size = args.grid_size;
    if (args.replicates > 0) config.replicates = args.replicates;
    if (args.ate_n > 0) config.ate_n = args.ate_n;
    if (!args.n_grid.empty()) config.n_grid = args.n_grid;
    if (args.cv_once) config.cv_per_replicate = false;
    if (!args.modes.empty()) {
      config.modes.clear();
      for (const std::string& m : args.modes)
        config.modes.push_back(parse_mode(m));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const StudyResult result = run_study(config);
    const std::string base = args.out_dir + "/" + config.study;
    const std::string records_path = base + "_records.csv";
    write_study_csv(result, records_path);

    json out;
    out["command"] = "study";
    out["study"] = config.study;
    out["config"] = study_config_echo(config);
    out["records_csv"] = records_path;
    json slopes = json::array();
    for (const SlopeRecord& rec : result.slopes) {
      json s;
      s["mode"] = rec.mode;
      s["metric"] = rec.metric;
      s["d"] = rec.d;
      s["slope"] = rec.fit.slope;
      s["stderr"] = rec.fit.stderr_;
      s["points"] = rec.fit.points;
      s["dropped"] = rec.fit.dropped;
      slopes.push_back(s);
    }
    if (!slopes.empty()) out["slopes"] = slopes;
    json rows = json::array();
    for (const AteSummaryRow& row : result.ate_summary) {
      json r;
      r["mode"] = row.mode;
      r["undersmoothed"] = row.undersmoothed;
      r["bias"] = row.bias;
      r["true_se"] = row.true_se;
      r["bias_over_se"] = row.bias_over_se;
      r["oracle_coverage"] = row.oracle_coverage;
      r["mean_eic_mean"] = row.mean_eic_mean;
      r["mean_abs_eic_mean"] = row.mean_abs_eic_mean;
      r["mean_eic_sd"] = row.mean_eic_sd;
      r["replications"] = row.replications;
      rows.push_back(r);
    }
    if (!rows.empty()) out["ate_summary"] = rows;
    out["warnings"] = result.warnings;
    write_text(base + "_summary.json", out.dump(2) + "\n");

    if (args.svg && !result.slopes.empty())
      write_text(base + "_slopes.svg", slopes_svg(result));
    std::cout << "wrote " << records_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Principal-component reductions of indicator-spline regression: "
      "ridge (har), lasso (hal), and constrained descent (hagl) fits, "
      "plus seeded simulation studies"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit one estimator on a CSV dataset (with cross-validation "
             "unless --reg is given)");
  fit->add_option("train", fit_args.train, "training CSV with header")
      ->required();
  fit->add_option("--mode", fit_args.mode, "har | hal | hagl")
      ->check(CLI::IsMember({"har", "hal", "hagl"}));
  fit->add_option("--loss", fit_args.loss, "mse | logistic")
      ->check(CLI::IsMember({"mse", "logistic"}));
  fit->add_option("--response", fit_args.response, "response column name");
  fit->add_option("--treatment", fit_args.treatment,
                  "treatment column; switches to ATE analysis");
  fit->add_option("--propensity", fit_args.propensity,
                  "known propensity column (required with --treatment)");
  fit->add_option("--folds", fit_args.folds, "cross-validation folds");
  fit->add_option("--grid-size", fit_args.grid_size,
                  "regularization grid size");
  fit->add_option("--reg", fit_args.reg,
                  "fixed regularization (lambda, or warm-start lambda for "
                  "hagl); skips cross-validation");
  fit->add_option("--seed", fit_args.seed, "master seed");
  fit->add_option("--max-degree", fit_args.max_degree,
                  "interaction-order cap (0 = all orders)");
  fit->add_option("--rank-tol", fit_args.rank_tol,
                  "relative eigenvalue cutoff");
  fit->add_option("--test", fit_args.test, "test CSV of covariates");
  fit->add_option("--predictions", fit_args.predictions,
                  "predictions output path (default predictions.csv)");
  fit->add_option("--emit-beta", fit_args.emit_beta,
                  "write full spline coefficients to this CSV");
  fit->add_option("--summary", fit_args.summary,
                  "summary JSON path (default stdout)");
  fit->add_flag("--undersmooth", fit_args.undersmooth,
                "relax the outcome penalty until the influence-curve mean "
                "clears its threshold (ATE only)");
  fit->add_option("--bootstrap", fit_args.bootstrap,
                  "bootstrap replicates for an ATE interval (0 = off)");
  fit->add_option("--level", fit_args.level, "bootstrap interval level");
  fit->add_option("--eps-pos", fit_args.eps_pos, "positivity bound");
  fit->add_option("--threads", fit_args.threads,
                  "worker threads (default: PCHA_THREADS or 1)");

  StudyArgs study_args;
  CLI::App* study = app.add_subcommand(
      "study", "Run a seeded simulation study (norms | rates | ate)");
  study->add_option("kind", study_args.study, "norms | rates | ate")
      ->required();
  study->add_option("--preset", study_args.preset, "desk | paper");
  study->add_option("--seed", study_args.seed, "master seed");
  study->add_option("--out-dir", study_args.out_dir, "output directory");
  study->add_flag("--svg", study_args.svg, "also write slope plots as SVG");
  study->add_flag("--cv-once", study_args.cv_once,
                  "freeze lambda and threshold at the first replication");
  study->add_option("--threads", study_args.threads,
                    "worker threads (default: PCHA_THREADS or 1)");
  study->add_option("--folds", study_args.folds, "cross-validation folds");
  study->add_option("--grid-size", study_args.grid_size,
                    "regularization grid size");
  study->add_option("--replicates", study_args.replicates,
                    "replications per cell");
  study->add_option("--ate-n", study_args.ate_n, "sample size per replication");
  study->add_option("--n-grid", study_args.n_grid, "comma-separated n values")
      ->delimiter(',');
  study->add_option("--modes", study_args.modes,
                    "comma-separated subset of har,hal,hagl")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (fit->parsed()) {
    if (!fit_args.treatment.empty() && fit_args.propensity.empty()) {
      std::cerr << "error: --treatment requires --propensity\n";
      return 2;
    }
    return fit_args.treatment.empty() ? run_fit_regression(fit_args)
                                      : run_fit_ate(fit_args);
  }
  return run_study_cmd(study_args);
}
