#ifndef EBLR_EVAL_HPP
#define EBLR_EVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eblr/data.hpp"
#include "eblr/eblr.hpp"
#include "eblr/metrics.hpp"
#include "eblr/prob.hpp"

namespace eblr {

// What each backtest window fits on its training slice.
enum class ForecastModel {
  eblr,    // fit_eblr
  linear,  // base learner on raw features, no rules
  mean,    // intercept only
};

std::string_view to_string(ForecastModel m);
ForecastModel parse_forecast_model(std::string_view text);

struct BacktestOptions {
  std::size_t n_windows = 25;
  std::size_t horizon = 14;
  std::vector<double> quantiles = kDefaultQuantiles;
  ForecastModel model = ForecastModel::eblr;
  unsigned threads = 1;
};

struct WindowResult {
  std::size_t window = 0;  // 1-based, oldest first
  std::size_t horizon = 0;
  std::int64_t first_test_timestamp = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  double nrmse = 0.0;
  double nd = 0.0;
  std::vector<double> wspl;  // one per quantile level
  double mean_wspl = 0.0;
  std::size_t rules = 0;
  std::optional<std::string> first_rule;
};

struct BacktestReport {
  ForecastModel model = ForecastModel::eblr;
  std::vector<double> quantiles;
  std::vector<WindowResult> windows;
  // Arithmetic means over windows.
  double nrmse = 0.0;
  double nd = 0.0;
  std::vector<double> wspl;
  double mean_wspl = 0.0;
  std::string config_hash;
  TimeKind time_kind = TimeKind::index;
};

// Expanding-origin windows: window k (oldest first) trains on every row before
// the origin T - (n_windows - k + 1) * horizon of each series and tests on the
// following `horizon` rows.
std::vector<TrainTestSplit> backtest_splits(const PanelDataset& ds, std::size_t n_windows, std::size_t horizon);

BacktestReport backtest(const PanelDataset& ds, const EblrConfig& cfg, const BacktestOptions& options);
BacktestReport backtest(const PanelDataset& ds, const EblrConfig& cfg, std::size_t n_windows, std::size_t horizon);

// Scores one fitted model on one test slice.
WindowResult score_window(const EblrModel& model, const PanelDataset& test, std::span<const double> quantiles);

nlohmann::json to_json(const BacktestReport& report);
// Header: window,horizon,metric,value. One row per window and metric, then
// the aggregate rows with window "mean".
void write_report_csv(const BacktestReport& report, std::ostream& out);
inline constexpr const char* kReportCsvHeader = "window,horizon,metric,value";

// Column label for a quantile level: 0.05 -> q05, 0.5 -> q50, 0.975 -> q97.5.
std::string quantile_label(double rho);

// FNV-1a over the canonical JSON of the configuration.
std::string config_hash(const EblrConfig& cfg, ForecastModel model);

}  // namespace eblr

#endif  // EBLR_EVAL_HPP
