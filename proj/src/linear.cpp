#include "eblr/linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eblr/error.hpp"
#include "text.hpp"

namespace eblr {

void LassoConfig::validate() const {
  if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) {
    throw ValidationError("LASSO penalty must be a nonnegative finite number");
  }
  if (cv_folds < 2 && !lambda) throw ValidationError("cross-validation needs at least 2 folds");
  if (max_iters < 1) throw ValidationError("max_iters must be positive");
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (lambda_grid.empty() && (grid_size < 1 || !(grid_ratio > 0.0 && grid_ratio < 1.0))) {
    throw ValidationError("invalid default penalty grid");
  }
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] > 0.0)) throw ValidationError("penalty grid values must be positive");
    if (i > 0 && !(lambda_grid[i] < lambda_grid[i - 1])) {
      throw ValidationError("penalty grid must be strictly descending");
    }
  }
}

// ---------------------------------------------------------------------------
// OLS

LinearModel fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                    std::vector<std::string> column_names) {
  if (x.rows() == 0) throw FitError("cannot fit a linear model on zero rows");
  if (x.rows() != y.size()) throw FitError("design matrix and target lengths differ");

  LinearModel model;
  model.column_names = std::move(column_names);
  const Eigen::Index p = x.cols();
  const double y_mean = y.mean();
  model.standardization.mean = x.colwise().mean().transpose();
  model.standardization.scale = Eigen::VectorXd::Ones(p);
  if (p == 0) {
    model.intercept = y_mean;
    model.coefficients.resize(0);
    return model;
  }

  const Eigen::MatrixXd xc = x.rowwise() - model.standardization.mean.transpose();
  const Eigen::VectorXd yc = y.array() - y_mean;
  // Minimum-norm least squares: rank-deficient designs (duplicated or
  // collinear columns) get the smallest-norm coefficient vector.
  // The default rank threshold misses exact collinearity once centering
  // rounding has been applied, so pivots are judged relative to the largest.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(xc);
  model.coefficients = cod.solve(yc);
  model.intercept = y_mean - model.standardization.mean.dot(model.coefficients);
  return model;
}

LinearModel fit_ols(const VerticalMatrix& m) { return fit_ols(m.x, m.y, m.column_names()); }

// ---------------------------------------------------------------------------
// LASSO coordinate descent

namespace lasso {

Problem Problem::from_standardized(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                   const Eigen::Ref<const Eigen::VectorXd>& yc) {
  const double n = static_cast<double>(z.rows());
  Problem p;
  p.gram = (z.transpose() * z) / n;
  p.corr = (z.transpose() * yc) / n;
  p.y_energy = yc.squaredNorm() / n;
  return p;
}

double Problem::lambda_max() const { return corr.size() == 0 ? 0.0 : corr.cwiseAbs().maxCoeff(); }

double Problem::objective(const Eigen::VectorXd& beta, double lambda) const {
  return 0.5 * y_energy - corr.dot(beta) + 0.5 * beta.dot(gram * beta) + lambda * beta.lpNorm<1>();
}

namespace {

double soft_threshold(double v, double lambda) {
  if (v > lambda) return v - lambda;
  if (v < -lambda) return v + lambda;
  return 0.0;
}

}  // namespace

SolveResult solve(const Problem& problem, double lambda, Eigen::VectorXd& beta, int max_iters, double tol,
                  bool trace) {
  const Eigen::Index p = problem.corr.size();
  SolveResult result;
  if (p == 0) {
    result.converged = true;
    return result;
  }
  const double threshold = tol * std::max(std::sqrt(problem.y_energy), std::numeric_limits<double>::min());
  // gradient term g = gram * beta, maintained incrementally
  Eigen::VectorXd g = problem.gram * beta;
  for (int sweep = 0; sweep < max_iters; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = problem.gram(j, j);
      if (gjj <= 0.0) {
        beta(j) = 0.0;
        continue;
      }
      const double rho = problem.corr(j) - g(j) + gjj * beta(j);
      const double updated = soft_threshold(rho, lambda) / gjj;
      const double delta = updated - beta(j);
      if (delta != 0.0) {
        g += problem.gram.col(j) * delta;
        beta(j) = updated;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    result.sweeps = sweep + 1;
    if (trace) result.objective_trace.push_back(problem.objective(beta, lambda));
    if (max_delta <= threshold) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<double> default_grid(double lambda_max, int size, double ratio) {
  std::vector<double> grid;
  if (!(lambda_max > 0.0)) return {0.0};
  if (size == 1) return {lambda_max};
  const double log_hi = std::log(lambda_max);
  const double log_lo = std::log(lambda_max * ratio);
  for (int i = 0; i < size; ++i) {
    grid.push_back(std::exp(log_hi + (log_lo - log_hi) * i / (size - 1)));
  }
  grid.front() = lambda_max;
  return grid;
}

}  // namespace lasso

namespace {

struct Standardized {
  Eigen::MatrixXd z;
  Eigen::VectorXd yc;
  Standardization stats;
  double y_mean = 0.0;
};

Standardized standardize(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  Standardized s;
  const double n = static_cast<double>(x.rows());
  s.y_mean = y.mean();
  s.yc = y.array() - s.y_mean;
  s.stats.mean = x.colwise().mean().transpose();
  s.stats.scale.resize(x.cols());
  s.z.resize(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Eigen::VectorXd centered = x.col(j).array() - s.stats.mean(j);
    const double sd = std::sqrt(centered.squaredNorm() / n);
    if (sd <= 1e-12 * (1.0 + std::abs(s.stats.mean(j)))) {
      s.stats.scale(j) = 0.0;
      s.z.col(j).setZero();
    } else {
      s.stats.scale(j) = sd;
      s.z.col(j) = centered / sd;
    }
  }
  return s;
}

// Back-transforms standardized coefficients onto the original column scale.
void to_original_scale(const Standardized& s, const Eigen::VectorXd& beta, LinearModel& model) {
  model.coefficients = Eigen::VectorXd::Zero(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (s.stats.scale(j) > 0.0) model.coefficients(j) = beta(j) / s.stats.scale(j);
  }
  model.intercept = s.y_mean - s.stats.mean.dot(model.coefficients);
  model.standardization = s.stats;
}

void note_convergence(const lasso::SolveResult& r, double lambda, int max_iters, LinearModel& model) {
  if (!r.converged) {
    model.warnings.push_back("coordinate descent did not converge within " + std::to_string(max_iters) +
                             " sweeps at lambda=" + detail::format_double(lambda));
  }
}

double cross_validated_lambda(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                              const std::vector<double>& grid, const LassoConfig& cfg) {
  const Eigen::Index n = x.rows();
  const int k = cfg.cv_folds;
  std::vector<double> mse(grid.size(), 0.0);
  for (int fold = 0; fold < k; ++fold) {
    // Contiguous block in row order.
    const Eigen::Index lo = n * fold / k;
    const Eigen::Index hi = n * (fold + 1) / k;
    const Eigen::Index n_train = n - (hi - lo);
    Eigen::MatrixXd x_train(n_train, x.cols());
    Eigen::VectorXd y_train(n_train);
    x_train.topRows(lo) = x.topRows(lo);
    x_train.bottomRows(n - hi) = x.bottomRows(n - hi);
    y_train.head(lo) = y.head(lo);
    y_train.tail(n - hi) = y.tail(n - hi);

    const Standardized s = standardize(x_train, y_train);
    const auto problem = lasso::Problem::from_standardized(s.z, s.yc);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    LinearModel scratch;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      lasso::solve(problem, grid[g], beta, cfg.max_iters, cfg.tol);
      to_original_scale(s, beta, scratch);
      const Eigen::VectorXd pred =
          (x.middleRows(lo, hi - lo) * scratch.coefficients).array() + scratch.intercept;
      mse[g] += (pred - y.segment(lo, hi - lo)).squaredNorm() / static_cast<double>(hi - lo) / k;
    }
  }
  // First minimum along the descending grid, i.e. the largest penalty among ties.
  const auto best = std::min_element(mse.begin(), mse.end());
  return grid[static_cast<std::size_t>(std::distance(mse.begin(), best))];
}

}  // namespace

LinearModel fit_lasso(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                      std::vector<std::string> column_names, const LassoConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0) throw FitError("cannot fit a linear model on zero rows");
  if (x.rows() != y.size()) throw FitError("design matrix and target lengths differ");
  if (!cfg.lambda && x.rows() < cfg.cv_folds) {
    throw FitError("penalty selection needs at least " + std::to_string(cfg.cv_folds) + " rows, got " +
                   std::to_string(x.rows()));
  }

  LinearModel model;
  model.column_names = std::move(column_names);
  const Standardized s = standardize(x, y);
  const auto problem = lasso::Problem::from_standardized(s.z, s.yc);
  const double lmax = problem.lambda_max();

  std::vector<double> path;
  if (cfg.lambda) {
    // Warm-start from lambda_max down to the requested penalty.
    if (*cfg.lambda < lmax) {
      for (double l : lasso::default_grid(lmax, 20, 1e-2)) {
        if (l > *cfg.lambda) path.push_back(l);
      }
    }
    path.push_back(*cfg.lambda);
  } else {
    const std::vector<double> grid =
        cfg.lambda_grid.empty() ? lasso::default_grid(lmax, cfg.grid_size, cfg.grid_ratio) : cfg.lambda_grid;
    const double chosen = cross_validated_lambda(x, y, grid, cfg);
    for (double l : grid) {
      if (l >= chosen) path.push_back(l);
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  lasso::SolveResult last;
  for (double l : path) last = lasso::solve(problem, l, beta, cfg.max_iters, cfg.tol);
  note_convergence(last, path.back(), cfg.max_iters, model);
  model.lambda = path.back();
  to_original_scale(s, beta, model);
  return model;
}

LinearModel fit_lasso(const VerticalMatrix& m, const LassoConfig& cfg) {
  return fit_lasso(m.x, m.y, m.column_names(), cfg);
}

// ---------------------------------------------------------------------------
// Prediction

Eigen::VectorXd predict(const LinearModel& model, const VerticalMatrix& m) {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(m.rows(), model.intercept);
  for (std::size_t j = 0; j < model.column_names.size(); ++j) {
    const auto idx = m.column_index(model.column_names[j]);
    if (!idx) throw PredictionError("missing column '" + model.column_names[j] + "'");
    const double beta = model.coefficients(static_cast<Eigen::Index>(j));
    if (beta != 0.0) out += beta * m.x.col(*idx);
  }
  return out;
}

double training_mse(const LinearModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::VectorXd pred = (x * model.coefficients).array() + model.intercept;
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace eblr
