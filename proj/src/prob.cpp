#include "eblr/prob.hpp"

#include <algorithm>
#include <cmath>

#include "eblr/error.hpp"

namespace eblr {

ResidualQuantiles::ResidualQuantiles(const Eigen::Ref<const Eigen::VectorXd>& residuals)
    : sorted_(residuals.data(), residuals.data() + residuals.size()) {
  if (sorted_.empty()) throw DomainError("residual quantiles need at least one residual");
  std::sort(sorted_.begin(), sorted_.end());
}

double ResidualQuantiles::quantile(double rho) const {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  const double pos = static_cast<double>(sorted_.size() - 1) * rho;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted_.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_[lo] + frac * (sorted_[hi] - sorted_[lo]);
}

double residual_quantile(const ResidualQuantiles& rq, double rho) { return rq.quantile(rho); }

void validate_quantile_levels(std::span<const double> rhos) {
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    if (!(rhos[i] > 0.0 && rhos[i] < 1.0)) throw DomainError("quantile levels must lie in (0, 1)");
    if (i > 0 && !(rhos[i] > rhos[i - 1])) throw DomainError("quantile levels must be strictly ascending");
  }
}

std::vector<ForecastDistribution> predict_quantiles(const EblrModel& model, const PanelDataset& future,
                                                    std::span<const double> rhos) {
  validate_quantile_levels(rhos);
  const ResidualQuantiles rq(model.training_residuals);
  std::vector<double> offsets;
  for (double rho : rhos) offsets.push_back(rq.quantile(rho));

  std::vector<ForecastDistribution> out;
  for (const auto& p : predict_point(model, future)) {
    ForecastDistribution d{p.series_id, p.timestamp, p.value, {}};
    for (std::size_t k = 0; k < rhos.size(); ++k) d.quantiles.emplace_back(rhos[k], p.value + offsets[k]);
    out.push_back(std::move(d));
  }
  return out;
}

std::pair<double, double> interval_levels(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("interval coverage must lie in (0, 1)");
  // Snap to a 1e-12 grid so alpha = 0.9 yields exactly the levels 0.05 and 0.95.
  auto snap = [](double v) { return std::round(v * 1e12) / 1e12; };
  return {snap((1.0 - alpha) / 2.0), snap((1.0 + alpha) / 2.0)};
}

std::vector<PredictionInterval> prediction_interval(const EblrModel& model, const PanelDataset& future,
                                                    double alpha) {
  const auto [lower, upper] = interval_levels(alpha);
  const std::vector<double> rhos{lower, upper};
  std::vector<PredictionInterval> out;
  for (const auto& d : predict_quantiles(model, future, rhos)) {
    out.push_back({d.series_id, d.timestamp, d.quantiles[0].second, d.quantiles[1].second});
  }
  return out;
}

}  // namespace eblr
