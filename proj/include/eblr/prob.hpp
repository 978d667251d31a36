#ifndef EBLR_PROB_HPP
#define EBLR_PROB_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eblr/data.hpp"
#include "eblr/eblr.hpp"

namespace eblr {

inline const std::vector<double> kDefaultQuantiles{0.05, 0.25, 0.5, 0.75, 0.95};

// Empirical distribution of training residuals. Quantiles interpolate
// linearly between order statistics at zero-based position (n - 1) * rho.
class ResidualQuantiles {
 public:
  explicit ResidualQuantiles(const Eigen::Ref<const Eigen::VectorXd>& residuals);

  double quantile(double rho) const;
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

double residual_quantile(const ResidualQuantiles& rq, double rho);

struct ForecastDistribution {
  std::string series_id;
  std::int64_t timestamp = 0;
  double point = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (rho, value), rho ascending
};

// point + residual quantile at each rho; the offsets are shared by all rows.
std::vector<ForecastDistribution> predict_quantiles(const EblrModel& model, const PanelDataset& future,
                                                    std::span<const double> rhos);

struct PredictionInterval {
  std::string series_id;
  std::int64_t timestamp = 0;
  double lower = 0.0;
  double upper = 0.0;
};

// Quantile levels bounding the equal-tailed interval of coverage alpha.
std::pair<double, double> interval_levels(double alpha);

// Equal-tailed interval: quantiles at (1 - alpha) / 2 and (1 + alpha) / 2.
std::vector<PredictionInterval> prediction_interval(const EblrModel& model, const PanelDataset& future,
                                                    double alpha);

// Validates a list of quantile levels: each in (0, 1), strictly ascending.
void validate_quantile_levels(std::span<const double> rhos);

}  // namespace eblr

#endif  // EBLR_PROB_HPP
