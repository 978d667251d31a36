#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "eblr/data.hpp"
#include "eblr/eblr.hpp"
#include "eblr/error.hpp"
#include "eblr/eval.hpp"
#include "eblr/explain.hpp"
#include "eblr/prob.hpp"
#include "text.hpp"

namespace eblr::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) { return detail::format_double(v); }

std::string env_or(const char* name, std::string fallback) {
  if (const char* v = std::getenv(name); v != nullptr && *v != '\0') return v;
  return fallback;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Refuses to clobber existing files unless --force was given. Runs before any
// computation so a refusal leaves nothing half-written.
void check_outputs(const std::vector<fs::path>& paths, bool force) {
  std::set<fs::path> seen;
  for (const auto& p : paths) {
    if (p.empty()) continue;
    if (!seen.insert(fs::absolute(p).lexically_normal()).second) {
      throw ValidationError("output path '" + p.string() + "' is used twice");
    }
    if (!force && fs::exists(p)) {
      throw ValidationError("refusing to overwrite '" + p.string() + "' (use --force)");
    }
  }
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path() && !fs::exists(path.parent_path())) {
    throw Error("cannot write '" + path.string() + "': directory does not exist");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

// Column-role flags shared by every command that reads a panel CSV.
struct SchemaFlags {
  std::string schema_file;
  std::string series_col;
  std::string time_col;
  std::string target_col;
  std::string covariates;

  void attach(CLI::App& cmd, bool with_target = true) {
    cmd.add_option("--schema", schema_file, "JSON file mapping CSV columns to roles")->check(CLI::ExistingFile);
    cmd.add_option("--series-col", series_col, "series id column (default: series_id when present)");
    cmd.add_option("--time-col", time_col, "timestamp column (default: timestamp)");
    if (with_target) cmd.add_option("--target-col", target_col, "target column (default: target)");
    cmd.add_option("--covariates", covariates,
                   "comma list of covariate columns, each optionally name:numeric|binary|categorical");
  }

  CsvSchema build() const {
    CsvSchema s = schema_file.empty() ? CsvSchema{} : CsvSchema::from_json_file(schema_file);
    if (!series_col.empty()) s.series_id = series_col;
    if (!time_col.empty()) s.timestamp = time_col;
    if (!target_col.empty()) s.target = target_col;
    if (!covariates.empty()) {
      std::vector<CovariateSpec> specs;
      for (const auto& item : split_list(covariates)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
          specs.push_back({item, std::nullopt});
        } else {
          specs.push_back({item.substr(0, colon), parse_covariate_kind(item.substr(colon + 1))});
        }
      }
      s.covariates = std::move(specs);
    }
    return s;
  }
};

// EBLR hyper-parameters shared by train and evaluate.
struct ModelFlags {
  int f_max = 5;
  std::string base = "lasso";
  std::optional<double> lambda;
  int cv_folds = 5;
  double eta = 0.001;
  int min_leaf = 5;
  int max_depth = 8;
  std::string initial = "none";
  bool no_raw_at_end = false;
  double min_improvement = 0.0;
  bool calendar = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--f-max", f_max, "maximum number of generated rules")->capture_default_str();
    cmd.add_option("--base", base, "base learner: ols or lasso")->capture_default_str();
    cmd.add_option("--lambda", lambda, "fixed LASSO penalty (default: cross-validated)");
    cmd.add_option("--cv-folds", cv_folds, "LASSO cross-validation folds")->capture_default_str();
    cmd.add_option("--eta", eta, "tree pruning complexity parameter")->capture_default_str();
    cmd.add_option("--min-leaf", min_leaf, "minimum rows per tree leaf")->capture_default_str();
    cmd.add_option("--max-depth", max_depth, "maximum tree depth")->capture_default_str();
    cmd.add_option("--initial", initial, "starting features: none, raw, or a comma list of columns")
        ->capture_default_str();
    cmd.add_flag("--no-raw-at-end", no_raw_at_end, "skip adding raw covariates before the final refit");
    cmd.add_option("--min-improvement", min_improvement, "minimum relative train NRMSE gain per rule")
        ->capture_default_str();
    cmd.add_flag("--calendar", calendar, "derive calendar covariates from the timestamps");
  }

  EblrConfig build() const {
    EblrConfig cfg;
    if (base == "ols") {
      cfg.base.kind = BaseLearnerKind::ols;
    } else if (base == "lasso") {
      cfg.base.kind = BaseLearnerKind::lasso;
    } else {
      throw ValidationError("unknown base learner '" + base + "' (expected ols or lasso)");
    }
    cfg.base.lasso.lambda = lambda;
    cfg.base.lasso.cv_folds = cv_folds;
    cfg.f_max = f_max;
    cfg.tree.eta = eta;
    cfg.tree.min_leaf = min_leaf;
    cfg.tree.max_depth = max_depth;
    if (initial == "none") {
      cfg.initial.mode = InitialFeatures::Mode::none;
    } else if (initial == "raw") {
      cfg.initial.mode = InitialFeatures::Mode::raw;
    } else {
      cfg.initial.mode = InitialFeatures::Mode::named;
      cfg.initial.names = split_list(initial);
    }
    cfg.include_raw_at_end = !no_raw_at_end;
    cfg.min_relative_improvement = min_improvement;
    cfg.calendar_features = calendar;
    cfg.validate();
    return cfg;
  }
};

std::vector<double> parse_quantiles(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ValidationError("quantile level '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("at least one quantile level is required");
  try {
    validate_quantile_levels(out);
  } catch (const DomainError& e) {
    throw ValidationError(e.what());
  }
  return out;
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_filename(p.stem().string() + suffix);
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SynthConfig cfg;
  std::string output;
};

int cmd_synth(const SynthArgs& a, bool force, std::ostream& out) {
  a.cfg.validate();
  check_outputs({a.output}, force);
  const PanelDataset ds = generate_synthetic(a.cfg);
  write_file(a.output, [&](std::ostream& f) { write_panel_csv(ds, f); });

  const auto& rows = ds.series().front().rows;
  double sum = 0.0, lo = rows.front().target, hi = rows.front().target;
  double promo = 0.0;
  const auto promo_idx = *ds.covariate_index("isPromotion");
  for (const auto& r : rows) {
    sum += r.target;
    lo = std::min(lo, r.target);
    hi = std::max(hi, r.target);
    promo += r.covariates[promo_idx];
  }
  const double n = static_cast<double>(rows.size());
  double ss = 0.0;
  for (const auto& r : rows) ss += (r.target - sum / n) * (r.target - sum / n);
  out << "wrote " << rows.size() << " rows to " << a.output << '\n'
      << "target mean " << fmt(sum / n) << ", sd " << fmt(std::sqrt(ss / n)) << ", min " << fmt(lo) << ", max "
      << fmt(hi) << '\n'
      << "promotion days " << static_cast<std::size_t>(promo) << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string input;
  std::string output;
  std::string curve;
  SchemaFlags schema;
  ModelFlags model;
};

void write_curve(const EblrModel& model, std::ostream& f) {
  f << "iteration,train_nrmse,rule\n";
  for (const auto& rec : model.iteration_log) {
    f << rec.iteration << ',' << fmt(rec.train_nrmse) << ',';
    if (rec.rule) f << '"' << rec.rule->to_string() << '"';
    f << '\n';
  }
}

int cmd_train(const TrainArgs& a, bool force, std::ostream& out) {
  const EblrConfig cfg = a.model.build();
  const CsvSchema schema = a.schema.build();
  if (a.input.empty()) throw ValidationError("no input file (use -i or set EBLR_DATA)");
  const fs::path curve = a.curve.empty() ? sibling(a.output, ".curve.csv") : fs::path(a.curve);
  check_outputs({a.output, curve}, force);

  const PanelDataset ds = load_panel_csv(a.input, schema);
  const EblrModel model = fit_eblr(ds, cfg);
  write_file(a.output, [&](std::ostream& f) { f << to_json(model).dump(2) << '\n'; });
  write_file(curve, [&](std::ostream& f) { write_curve(model, f); });

  out << "trained on " << ds.num_observations() << " rows, " << ds.series().size() << " series\n";
  for (const auto& rec : model.iteration_log) {
    out << "  iteration " << rec.iteration << "  train NRMSE " << fmt(rec.train_nrmse);
    if (rec.rule) out << "  " << rec.rule->to_string();
    out << '\n';
  }
  out << "stopped: " << to_string(model.stop_reason) << "; model written to " << a.output << '\n';
  return kExitOk;
}

struct ForecastArgs {
  std::string model;
  std::string input;
  std::string output;
  std::string quantiles = "0.05,0.25,0.5,0.75,0.95";
  SchemaFlags schema;
};

int cmd_forecast(const ForecastArgs& a, bool force, std::ostream& out) {
  const std::vector<double> rhos = parse_quantiles(a.quantiles);
  if (a.input.empty()) throw ValidationError("no future covariate file (use -i)");
  check_outputs({a.output}, force);

  const EblrModel model = load_model(a.model);
  CsvSchema schema = a.schema.build();
  if (!schema.covariates) {
    // Read exactly the covariates the model was trained on, with their kinds.
    static const std::set<std::string> calendar{"day_of_week", "day_of_month", "month", "year", "is_weekend"};
    std::vector<CovariateSpec> specs;
    for (const auto& c : model.covariate_schema) {
      if (model.config.calendar_features && calendar.count(c.name)) continue;
      specs.push_back({c.name, c.kind});
    }
    schema.covariates = std::move(specs);
  }
  const PanelDataset future = load_panel_csv(a.input, schema, TargetColumn::optional);

  std::vector<ForecastDistribution> rows;
  if (future.num_observations() > 0) rows = predict_quantiles(model, future, rhos);

  write_file(a.output, [&](std::ostream& f) {
    f << "series_id,timestamp,point";
    for (double r : rhos) f << ',' << quantile_label(r);
    f << '\n';
    for (const auto& r : rows) {
      f << r.series_id << ',' << format_timestamp(r.timestamp, future.time_kind()) << ',' << fmt(r.point);
      for (const auto& [rho, v] : r.quantiles) f << ',' << fmt(v);
      f << '\n';
    }
  });
  out << "wrote " << rows.size() << " forecast rows to " << a.output << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string input;
  std::string output;
  std::string csv;
  std::string model = "eblr";
  std::size_t n_windows = 25;
  std::size_t horizon = 14;
  std::string quantiles = "0.05,0.25,0.5,0.75,0.95";
  SchemaFlags schema;
  ModelFlags config;
};

int cmd_evaluate(const EvaluateArgs& a, unsigned threads, bool force, std::ostream& out) {
  const EblrConfig cfg = a.config.build();
  BacktestOptions options;
  options.model = parse_forecast_model(a.model);
  options.n_windows = a.n_windows;
  options.horizon = a.horizon;
  options.quantiles = parse_quantiles(a.quantiles);
  options.threads = threads;
  if (options.n_windows == 0) throw ValidationError("--n-windows must be positive");
  if (options.horizon == 0) throw ValidationError("--horizon must be positive");
  if (a.input.empty()) throw ValidationError("no input file (use -i or set EBLR_DATA)");
  const fs::path csv = a.csv.empty() ? sibling(a.output, ".csv") : fs::path(a.csv);
  check_outputs({a.output, csv}, force);

  const PanelDataset ds = load_panel_csv(a.input, a.schema.build());
  const BacktestReport report = backtest(ds, cfg, options);
  write_file(a.output, [&](std::ostream& f) { f << to_json(report).dump(2) << '\n'; });
  write_file(csv, [&](std::ostream& f) { write_report_csv(report, f); });

  out << to_string(report.model) << " backtest over " << report.windows.size() << " windows of horizon "
      << options.horizon << '\n'
      << "  NRMSE " << fmt(report.nrmse) << "\n  ND " << fmt(report.nd) << '\n';
  if (!report.wspl.empty()) out << "  mean WSPL " << fmt(report.mean_wspl) << '\n';
  return kExitOk;
}

struct ExplainArgs {
  std::string model;
  std::string output;
  std::string rules;
  std::size_t top = 10;
};

int cmd_explain(const ExplainArgs& a, bool force, std::ostream& out, std::ostream& err) {
  if (a.top == 0) throw ValidationError("--top must be positive");
  const fs::path rules = a.rules.empty() ? sibling(a.output, ".rules.json") : fs::path(a.rules);
  check_outputs({a.output, rules}, force);

  const EblrModel model = load_model(a.model);
  if (!model.fitted()) throw ModelFormatError("model has no iteration log; it was never fitted");
  const auto scores = ranked(feature_importance(model), a.top);
  if (model.rules.empty()) err << "warning: model has no generated rules; importance file is empty\n";
  const RuleReport report = rule_report(model);

  write_file(a.output, [&](std::ostream& f) {
    f << "name,score\n";
    for (const auto& [name, score] : scores) f << name << ',' << fmt(score) << '\n';
  });
  write_file(rules, [&](std::ostream& f) { f << to_json(report).dump(2) << '\n'; });

  write_text(report, out);
  if (!scores.empty()) {
    out << "importance\n";
    for (const auto& [name, score] : scores) out << "  " << name << ": " << fmt(score) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable boosted linear regression forecasting", "eblr"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "eblr 1.0.0");

  bool force = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_flag("--force", force, "overwrite existing output files");
  app.add_option("--threads", threads, "worker threads for backtests")->check(CLI::PositiveNumber);

  SynthArgs synth;
  synth.output = env_or("EBLR_DATA", "synth.csv");
  auto* s = app.add_subcommand("synth", "write the synthetic daily-sales series as CSV");
  s->add_option("-o,--output", synth.output, "output CSV")->capture_default_str();
  s->add_option("--length", synth.cfg.length, "number of days")->capture_default_str();
  s->add_option("--seed", synth.cfg.rng_seed, "random seed")->capture_default_str();
  s->add_option("--noise-mean", synth.cfg.noise_mean, "mean of the Gaussian level noise")->capture_default_str();
  s->add_option("--noise-std", synth.cfg.noise_std, "standard deviation of the level noise")->capture_default_str();
  s->add_option("--ar1", synth.cfg.ar1, "lag-1 autoregressive coefficient")->capture_default_str();
  s->add_option("--ar2", synth.cfg.ar2, "lag-2 autoregressive coefficient")->capture_default_str();
  s->add_option("--weekend-effect", synth.cfg.weekend_effect, "added on weekend days")->capture_default_str();
  s->add_option("--promo-effect", synth.cfg.promo_effect, "added on promotion days")->capture_default_str();
  s->add_option("--interaction-effect", synth.cfg.interaction_effect, "added when a promotion falls on a weekend")->capture_default_str();
  s->add_option("--promo-probability", synth.cfg.promo_probability, "daily promotion probability")->capture_default_str();
  s->add_option("--start-date", synth.cfg.start_date, "first day, a Monday")->capture_default_str();
  s->add_flag("--propagate-effects", synth.cfg.propagate_effects,
              "feed weekend and promotion effects through the autoregression");

  TrainArgs train;
  train.input = env_or("EBLR_DATA", "");
  train.output = env_or("EBLR_MODEL", "model.json");
  auto* t = app.add_subcommand("train", "fit an EBLR model");
  t->add_option("-i,--input", train.input, "training CSV");
  t->add_option("-o,--output", train.output, "model JSON")->capture_default_str();
  t->add_option("--curve", train.curve, "learning-curve CSV (default: <model>.curve.csv)");
  train.schema.attach(*t);
  train.model.attach(*t);

  ForecastArgs forecast;
  forecast.model = env_or("EBLR_MODEL", "model.json");
  forecast.output = env_or("EBLR_FORECAST", "forecast.csv");
  auto* f = app.add_subcommand("forecast", "point and quantile forecasts for future covariates");
  f->add_option("-m,--model", forecast.model, "model JSON")->capture_default_str();
  f->add_option("-i,--input", forecast.input, "future covariate CSV");
  f->add_option("-o,--output", forecast.output, "forecast CSV")->capture_default_str();
  f->add_option("--quantiles", forecast.quantiles, "comma list of quantile levels")->capture_default_str();
  forecast.schema.attach(*f, false);

  EvaluateArgs evaluate;
  evaluate.input = env_or("EBLR_DATA", "");
  evaluate.output = env_or("EBLR_REPORT", "report.json");
  auto* e = app.add_subcommand("evaluate", "expanding-origin backtest");
  e->add_option("-i,--input", evaluate.input, "CSV with history");
  e->add_option("-o,--output", evaluate.output, "report JSON")->capture_default_str();
  e->add_option("--csv", evaluate.csv, "report CSV (default: <report>.csv)");
  e->add_option("--model", evaluate.model, "eblr, linear or mean")->capture_default_str();
  e->add_option("--n-windows", evaluate.n_windows, "number of backtest windows")->capture_default_str();
  e->add_option("--horizon", evaluate.horizon, "days per test window")->capture_default_str();
  e->add_option("--quantiles", evaluate.quantiles, "comma list of quantile levels")->capture_default_str();
  evaluate.schema.attach(*e);
  evaluate.config.attach(*e);

  ExplainArgs explain;
  explain.model = env_or("EBLR_MODEL", "model.json");
  explain.output = env_or("EBLR_IMPORTANCE", "importance.csv");
  auto* x = app.add_subcommand("explain", "rule report and feature importance");
  x->add_option("-m,--model", explain.model, "model JSON")->capture_default_str();
  x->add_option("-o,--output", explain.output, "importance CSV")->capture_default_str();
  x->add_option("--rules", explain.rules, "rule report JSON (default: <importance>.rules.json)");
  x->add_option("--top", explain.top, "number of covariates to keep")->capture_default_str();

  std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& ok) {
    return app.exit(ok, out, err);
  } catch (const CLI::ParseError& pe) {
    app.exit(pe, out, err);
    return kExitValidation;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, force, out);
    if (t->parsed()) return cmd_train(train, force, out);
    if (f->parsed()) return cmd_forecast(forecast, force, out);
    if (e->parsed()) return cmd_evaluate(evaluate, threads, force, out);
    if (x->parsed()) return cmd_explain(explain, force, out, err);
  } catch (const ValidationError& ve) {
    err << "error: " << ve.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace eblr::cli
