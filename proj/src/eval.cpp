#include "eblr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "eblr/error.hpp"
#include "text.hpp"

namespace eblr {

std::string_view to_string(ForecastModel m) {
  switch (m) {
    case ForecastModel::eblr:
      return "eblr";
    case ForecastModel::linear:
      return "linear";
    case ForecastModel::mean:
      return "mean";
  }
  return "eblr";
}

ForecastModel parse_forecast_model(std::string_view text) {
  if (text == "eblr") return ForecastModel::eblr;
  if (text == "linear") return ForecastModel::linear;
  if (text == "mean") return ForecastModel::mean;
  throw ValidationError("unknown model '" + std::string(text) + "' (expected eblr, linear or mean)");
}

std::vector<TrainTestSplit> backtest_splits(const PanelDataset& ds, std::size_t n_windows, std::size_t horizon) {
  if (n_windows == 0) throw ValidationError("number of backtest windows must be positive");
  if (horizon == 0) throw ValidationError("forecast horizon must be positive");
  const std::size_t needed = n_windows * horizon + 1;
  for (const auto& s : ds.series()) {
    if (s.rows.size() < needed) {
      throw BacktestError("series '" + s.id + "' has " + std::to_string(s.rows.size()) + " rows; " +
                          std::to_string(n_windows) + " windows of horizon " + std::to_string(horizon) +
                          " need at least " + std::to_string(needed));
    }
  }
  if (ds.series().empty()) throw BacktestError("backtest needs at least one series");
  std::vector<TrainTestSplit> out;
  for (std::size_t k = 1; k <= n_windows; ++k) {
    out.push_back(split_at_origin(ds, (n_windows - k + 1) * horizon, horizon));
  }
  return out;
}

WindowResult score_window(const EblrModel& model, const PanelDataset& test, std::span<const double> quantiles) {
  const auto forecasts = predict_quantiles(model, test, quantiles);
  const auto n = static_cast<Eigen::Index>(forecasts.size());
  Eigen::VectorXd y(n);
  Eigen::VectorXd point(n);
  Eigen::MatrixXd q(n, static_cast<Eigen::Index>(quantiles.size()));
  Eigen::Index r = 0;
  for (const auto& s : test.series()) {
    for (const auto& row : s.rows) {
      y(r) = row.target;
      point(r) = forecasts[static_cast<std::size_t>(r)].point;
      for (std::size_t k = 0; k < quantiles.size(); ++k) {
        q(r, static_cast<Eigen::Index>(k)) = forecasts[static_cast<std::size_t>(r)].quantiles[k].second;
      }
      ++r;
    }
  }

  WindowResult w;
  w.test_rows = static_cast<std::size_t>(n);
  w.nrmse = nrmse(y, point);
  w.nd = nd(y, point);
  for (std::size_t k = 0; k < quantiles.size(); ++k) {
    w.wspl.push_back(wspl(y, q.col(static_cast<Eigen::Index>(k)), quantiles[k]));
  }
  if (!w.wspl.empty()) {
    for (double v : w.wspl) w.mean_wspl += v;
    w.mean_wspl /= static_cast<double>(w.wspl.size());
  }
  w.rules = model.rules.size();
  if (!model.rules.empty()) w.first_rule = model.rules.front().to_string();
  return w;
}

namespace {

EblrModel fit_for(const PanelDataset& train, const EblrConfig& cfg, ForecastModel model) {
  switch (model) {
    case ForecastModel::eblr:
      return fit_eblr(train, cfg);
    case ForecastModel::linear: {
      EblrConfig c = cfg;
      c.initial = {};
      c.include_raw_at_end = true;
      return fit_base_only(train, c);
    }
    case ForecastModel::mean: {
      EblrConfig c = cfg;
      c.initial = {};
      c.include_raw_at_end = false;
      return fit_base_only(train, c);
    }
  }
  return fit_eblr(train, cfg);
}

}  // namespace

BacktestReport backtest(const PanelDataset& ds, const EblrConfig& cfg, const BacktestOptions& options) {
  cfg.validate();
  validate_quantile_levels(options.quantiles);
  const auto splits = backtest_splits(ds, options.n_windows, options.horizon);

  BacktestReport report;
  report.model = options.model;
  report.quantiles = options.quantiles;
  report.config_hash = config_hash(cfg, options.model);
  report.time_kind = ds.time_kind();
  report.windows.resize(splits.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < splits.size(); k = next++) {
      try {
        const auto& split = splits[k];
        const EblrModel model = fit_for(split.train, cfg, options.model);
        WindowResult w = score_window(model, split.test, options.quantiles);
        w.window = k + 1;
        w.horizon = options.horizon;
        w.train_rows = split.train.num_observations();
        w.first_test_timestamp = split.test.series().front().rows.front().timestamp;
        report.windows[k] = std::move(w);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(splits.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const double count = static_cast<double>(report.windows.size());
  report.wspl.assign(options.quantiles.size(), 0.0);
  for (const auto& w : report.windows) {
    report.nrmse += w.nrmse;
    report.nd += w.nd;
    report.mean_wspl += w.mean_wspl;
    for (std::size_t k = 0; k < w.wspl.size(); ++k) report.wspl[k] += w.wspl[k];
  }
  report.nrmse /= count;
  report.nd /= count;
  report.mean_wspl /= count;
  for (double& v : report.wspl) v /= count;
  return report;
}

BacktestReport backtest(const PanelDataset& ds, const EblrConfig& cfg, std::size_t n_windows, std::size_t horizon) {
  BacktestOptions options;
  options.n_windows = n_windows;
  options.horizon = horizon;
  return backtest(ds, cfg, options);
}

std::string quantile_label(double rho) {
  const double pct = rho * 100.0;
  const double rounded = std::round(pct);
  if (std::abs(pct - rounded) < 1e-9) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "q%02d", static_cast<int>(rounded));
    return buf;
  }
  return "q" + detail::format_double(std::round(pct * 1e9) / 1e9);
}

std::string config_hash(const EblrConfig& cfg, ForecastModel model) {
  nlohmann::json j = to_json(cfg);
  j["model"] = to_string(model);
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const BacktestReport& report) {
  using nlohmann::json;
  json windows = json::array();
  for (const auto& w : report.windows) {
    json wspl = json::object();
    for (std::size_t k = 0; k < w.wspl.size(); ++k) wspl[quantile_label(report.quantiles[k])] = w.wspl[k];
    windows.push_back({{"window", w.window},
                       {"horizon", w.horizon},
                       {"first_test_timestamp", format_timestamp(w.first_test_timestamp, report.time_kind)},
                       {"train_rows", w.train_rows},
                       {"test_rows", w.test_rows},
                       {"nrmse", w.nrmse},
                       {"nd", w.nd},
                       {"wspl", wspl},
                       {"mean_wspl", w.mean_wspl},
                       {"rules", w.rules},
                       {"first_rule", w.first_rule ? json(*w.first_rule) : json(nullptr)}});
  }
  json wspl = json::object();
  for (std::size_t k = 0; k < report.wspl.size(); ++k) wspl[quantile_label(report.quantiles[k])] = report.wspl[k];
  return {{"model", to_string(report.model)},
          {"config_hash", report.config_hash},
          {"quantiles", report.quantiles},
          {"windows", windows},
          {"aggregate", {{"nrmse", report.nrmse}, {"nd", report.nd}, {"wspl", wspl}, {"mean_wspl", report.mean_wspl}}}};
}

void write_report_csv(const BacktestReport& report, std::ostream& out) {
  out << kReportCsvHeader << '\n';
  auto emit = [&](const std::string& window, std::size_t horizon, double nrmse_v, double nd_v,
                  const std::vector<double>& wspl_v, double mean_wspl_v) {
    const std::string prefix = window + "," + std::to_string(horizon) + ",";
    out << prefix << "nrmse," << detail::format_double(nrmse_v) << '\n';
    out << prefix << "nd," << detail::format_double(nd_v) << '\n';
    for (std::size_t k = 0; k < wspl_v.size(); ++k) {
      out << prefix << "wspl_" << quantile_label(report.quantiles[k]) << ',' << detail::format_double(wspl_v[k])
          << '\n';
    }
    if (!wspl_v.empty()) out << prefix << "wspl_mean," << detail::format_double(mean_wspl_v) << '\n';
  };
  std::size_t horizon = 0;
  for (const auto& w : report.windows) {
    emit(std::to_string(w.window), w.horizon, w.nrmse, w.nd, w.wspl, w.mean_wspl);
    horizon = w.horizon;
  }
  emit("mean", horizon, report.nrmse, report.nd, report.wspl, report.mean_wspl);
}

}  // namespace eblr
