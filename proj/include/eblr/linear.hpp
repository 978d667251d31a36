#ifndef EBLR_LINEAR_HPP
#define EBLR_LINEAR_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eblr/data.hpp"

namespace eblr {

// Per-column centering and scaling applied before fitting. A scale of 0 marks
// a constant column that was dropped.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

// g(x) = intercept + coefficients' x, with coefficients on the original
// column scale and matched to input columns by name.
struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  std::vector<std::string> column_names;
  Standardization standardization;
  std::optional<double> lambda;  // penalty used, LASSO only
  std::vector<std::string> warnings;
};

struct LassoConfig {
  std::optional<double> lambda;  // nullopt selects the penalty by cross-validation
  int cv_folds = 5;
  // Descending penalties; empty means `grid_size` log-spaced values from
  // lambda_max down to lambda_max * grid_ratio.
  std::vector<double> lambda_grid;
  int grid_size = 50;
  double grid_ratio = 1e-4;
  int max_iters = 1000;
  double tol = 1e-7;

  void validate() const;
};

LinearModel fit_ols(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                    std::vector<std::string> column_names);
LinearModel fit_ols(const VerticalMatrix& m);

LinearModel fit_lasso(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                      std::vector<std::string> column_names, const LassoConfig& cfg);
LinearModel fit_lasso(const VerticalMatrix& m, const LassoConfig& cfg);

Eigen::VectorXd predict(const LinearModel& model, const VerticalMatrix& m);

// Mean squared training error of the fitted model on (x, y); columns of x in
// model order.
double training_mse(const LinearModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y);

namespace lasso {

// Standardized problem: columns of `z` have zero mean and unit population
// variance (or are all zero), `yc` is centered. Held in covariance form so a
// coordinate-descent sweep costs O(p^2) regardless of the row count.
struct Problem {
  Eigen::MatrixXd gram;   // z'z / n
  Eigen::VectorXd corr;   // z'yc / n
  double y_energy = 0.0;  // yc'yc / n

  static Problem from_standardized(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                   const Eigen::Ref<const Eigen::VectorXd>& yc);
  double lambda_max() const;
  // (1/2n)|yc - z b|^2 + lambda |b|_1
  double objective(const Eigen::VectorXd& beta, double lambda) const;
};

struct SolveResult {
  int sweeps = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // one entry per sweep when requested
};

// Coordinate descent from the warm start in `beta`. Convergence when the
// largest coefficient change in a sweep is below tol * sqrt(y_energy).
SolveResult solve(const Problem& problem, double lambda, Eigen::VectorXd& beta, int max_iters, double tol,
                  bool trace = false);

std::vector<double> default_grid(double lambda_max, int size, double ratio);

}  // namespace lasso

}  // namespace eblr

#endif  // EBLR_LINEAR_HPP
