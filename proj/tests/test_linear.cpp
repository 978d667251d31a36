#include <doctest.h>

#include <cmath>
#include <random>

#include "eblr/error.hpp"
#include "eblr/linear.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace eblr;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = z(rng);
  return x;
}

std::vector<std::string> names(Eigen::Index p) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < p; ++j) out.push_back("x" + std::to_string(j));
  return out;
}

// Standardizes like the library does, but written out independently.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const double n = double(x.rows());
  Eigen::MatrixXd z = x.rowwise() - x.colwise().mean();
  for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) /= std::sqrt(z.col(j).squaredNorm() / n);
  return {z, y.array() - y.mean()};
}

}  // namespace

TEST_CASE("OLS matches the normal equations") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd x = random_matrix(rng, 40, 4);
    const Eigen::VectorXd y = random_matrix(rng, 40, 1).col(0);
    const LinearModel m = fit_ols(x, y, names(4));
    const Eigen::VectorXd beta = testing::normal_equations(x, y);
    CHECK(m.intercept == doctest::Approx(beta(0)).epsilon(1e-9));
    for (int j = 0; j < 4; ++j) CHECK(m.coefficients(j) == doctest::Approx(beta(j + 1)).epsilon(1e-9));
  }
}

TEST_CASE("OLS on collinear columns is the minimum-norm solution") {
  Eigen::MatrixXd x(6, 2);
  x << 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0;
  Eigen::VectorXd y(6);
  y << 1, 5, 1, 5, 5, 1;
  const LinearModel m = fit_ols(x, y, names(2));
  CHECK(m.coefficients(0) == doctest::Approx(2.0));
  CHECK(m.coefficients(1) == doctest::Approx(2.0));
  CHECK(m.intercept == doctest::Approx(1.0));
}

TEST_CASE("OLS with no columns predicts the mean") {
  Eigen::VectorXd y(3);
  y << 1, 2, 6;
  const LinearModel m = fit_ols(Eigen::MatrixXd(3, 0), y, {});
  CHECK(m.intercept == doctest::Approx(3.0));
  CHECK_THROWS_AS(fit_ols(Eigen::MatrixXd(0, 0), Eigen::VectorXd(0), {}), FitError);
}

TEST_CASE("LASSO at lambda 0 equals OLS") {
  std::mt19937_64 rng(2);
  LassoConfig cfg;
  cfg.lambda = 0.0;
  cfg.tol = 1e-12;
  cfg.max_iters = 100000;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd x = random_matrix(rng, 50, 3);
    const Eigen::VectorXd y = x * Eigen::Vector3d(1.0, -2.0, 0.5) + random_matrix(rng, 50, 1).col(0);
    const LinearModel ols = fit_ols(x, y, names(3));
    const LinearModel las = fit_lasso(x, y, names(3), cfg);
    CHECK(las.warnings.empty());
    for (int j = 0; j < 3; ++j) CHECK(las.coefficients(j) == doctest::Approx(ols.coefficients(j)).epsilon(1e-7));
    CHECK(las.intercept == doctest::Approx(ols.intercept).epsilon(1e-7));
  }
}

TEST_CASE("soft-threshold closed form on one standardized column") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = random_matrix(rng, 30, 1);
  const Eigen::VectorXd y = 3.0 * x.col(0) + random_matrix(rng, 30, 1).col(0);
  const auto [z, yc] = standardize(x, y);
  const auto problem = lasso::Problem::from_standardized(z, yc);
  const double c = (z.col(0).dot(yc)) / 30.0;
  for (double lambda : {0.0, 0.1 * std::abs(c), 0.7 * std::abs(c), 2.0 * std::abs(c)}) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
    lasso::solve(problem, lambda, beta, 100, 1e-12);
    const double expected = std::copysign(std::max(std::abs(c) - lambda, 0.0), c);
    CHECK(beta(0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("LASSO solutions satisfy the optimality conditions") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::MatrixXd x = random_matrix(rng, 60, 6);
    const Eigen::VectorXd y = x.col(0) * 2.0 - x.col(3) + random_matrix(rng, 60, 1).col(0);
    const auto [z, yc] = standardize(x, y);
    const auto problem = lasso::Problem::from_standardized(z, yc);
    const double lambda = problem.lambda_max() * (0.05 + 0.1 * rep / 30.0);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(6);
    const auto r = lasso::solve(problem, lambda, beta, 10000, 1e-12);
    CHECK(r.converged);
    const Eigen::VectorXd grad = z.transpose() * (yc - z * beta) / 60.0;
    for (int j = 0; j < 6; ++j) {
      if (beta(j) != 0.0) {
        CHECK(grad(j) == doctest::Approx(lambda * (beta(j) > 0 ? 1.0 : -1.0)).epsilon(1e-6));
      } else {
        CHECK(std::abs(grad(j)) <= lambda * (1 + 1e-6));
      }
    }
  }
}

TEST_CASE("coordinate descent never increases the objective") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd x = random_matrix(rng, 40, 5);
    x.col(4) = x.col(3) * 0.9 + x.col(2) * 0.1;  // correlated columns slow convergence down
    const Eigen::VectorXd y = x.col(3) + random_matrix(rng, 40, 1).col(0);
    const auto [z, yc] = standardize(x, y);
    const auto problem = lasso::Problem::from_standardized(z, yc);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(5);
    const auto r = lasso::solve(problem, 0.01 * problem.lambda_max(), beta, 500, 1e-12, true);
    REQUIRE(r.objective_trace.size() == static_cast<std::size_t>(r.sweeps));
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-12);
    }
  }
}

TEST_CASE("L1 norm grows along the descending penalty path") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd x = random_matrix(rng, 80, 5);
    const Eigen::VectorXd y = x * Eigen::VectorXd::LinSpaced(5, -2, 2) + random_matrix(rng, 80, 1).col(0);
    const auto [z, yc] = standardize(x, y);
    const auto problem = lasso::Problem::from_standardized(z, yc);
    const auto grid = lasso::default_grid(problem.lambda_max(), 30, 1e-3);
    CHECK(grid.front() == problem.lambda_max());
    CHECK(grid.back() == doctest::Approx(problem.lambda_max() * 1e-3));
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(5);
    double previous = 0.0;
    for (double l : grid) {
      lasso::solve(problem, l, beta, 10000, 1e-12);
      CHECK(beta.lpNorm<1>() >= previous - 1e-9);
      previous = beta.lpNorm<1>();
    }
    Eigen::VectorXd at_max = Eigen::VectorXd::Zero(5);
    lasso::solve(problem, problem.lambda_max(), at_max, 100, 1e-12);
    CHECK(at_max.lpNorm<1>() == 0.0);
  }
}

TEST_CASE("cross-validated LASSO") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd x = random_matrix(rng, 200, 8);
  const Eigen::VectorXd y = 4.0 * x.col(0) - 3.0 * x.col(1) + 0.5 * random_matrix(rng, 200, 1).col(0);
  const LinearModel m = fit_lasso(x, y, names(8), LassoConfig{});
  REQUIRE(m.lambda);
  CHECK(*m.lambda > 0.0);
  CHECK(m.coefficients(0) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(m.coefficients(1) == doctest::Approx(-3.0).epsilon(0.05));
  CHECK(m.warnings.empty());
  // Deterministic.
  const LinearModel again = fit_lasso(x, y, names(8), LassoConfig{});
  CHECK(again.coefficients == m.coefficients);
}

TEST_CASE("constant columns are dropped") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 3, 2, 3, 3, 3, 4, 3, 5, 3;
  Eigen::VectorXd y(5);
  y << 2, 4, 6, 8, 10;
  LassoConfig cfg;
  cfg.lambda = 0.0;
  const LinearModel m = fit_lasso(x, y, names(2), cfg);
  CHECK(m.standardization.scale(1) == 0.0);
  CHECK(m.coefficients(1) == 0.0);
  CHECK(m.coefficients(0) == doctest::Approx(2.0));
}

TEST_CASE("non-convergence is reported as a warning") {
  std::mt19937_64 rng(8);
  Eigen::MatrixXd x = random_matrix(rng, 30, 3);
  x.col(2) = x.col(1) + 1e-3 * x.col(0);
  const Eigen::VectorXd y = x.col(1) + random_matrix(rng, 30, 1).col(0);
  LassoConfig cfg;
  cfg.lambda = 1e-6;
  cfg.max_iters = 1;
  const LinearModel m = fit_lasso(x, y, names(3), cfg);
  CHECK_FALSE(m.warnings.empty());
}

TEST_CASE("configuration validation") {
  LassoConfig cfg;
  cfg.lambda = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.cv_folds = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.lambda_grid = {0.1, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_THROWS_AS(fit_lasso(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(3), names(1), LassoConfig{}),
                  FitError);
}

TEST_CASE("prediction matches columns by name") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 2, 1, 3, 0, 4, 1;
  Eigen::VectorXd y = 2.0 * x.col(0) + 5.0 * x.col(1);
  const auto m = testing::numeric_matrix(x, y);
  const LinearModel model = fit_ols(m);
  auto swapped = m.select({"x1", "x0"});
  CHECK((predict(model, swapped) - y).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(training_mse(model, x, y) < 1e-18);
  CHECK_THROWS_AS(predict(model, m.select({"x0"})), PredictionError);
}
