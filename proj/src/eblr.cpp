#include "eblr/eblr.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "eblr/error.hpp"
#include "eblr/metrics.hpp"

namespace eblr {

void EblrConfig::validate() const {
  if (f_max < 1) throw ValidationError("f_max must be at least 1");
  if (!(min_relative_improvement >= 0.0) || !std::isfinite(min_relative_improvement)) {
    throw ValidationError("min_relative_improvement must be a nonnegative number");
  }
  tree.validate();
  if (base.kind == BaseLearnerKind::lasso) base.lasso.validate();
  if (initial.mode == InitialFeatures::Mode::named && initial.names.empty()) {
    throw ValidationError("named initial features need at least one name");
  }
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::f_max_reached:
      return "f_max_reached";
    case StopReason::tree_cannot_split:
      return "tree_cannot_split";
    case StopReason::duplicate_rule:
      return "duplicate_rule";
    case StopReason::no_improvement:
      return "no_improvement";
    case StopReason::not_run:
      return "not_run";
  }
  return "not_run";
}

std::string rule_column_name(const RuleFeature& rule) { return "rule:" + rule.to_string(); }

namespace {

LinearModel fit_base(const VerticalMatrix& design, const BaseLearner& base) {
  if (base.kind == BaseLearnerKind::ols) return fit_ols(design);
  return fit_lasso(design, base.lasso);
}

std::vector<std::string> initial_columns(const VerticalMatrix& full, const InitialFeatures& initial) {
  std::vector<std::string> names;
  switch (initial.mode) {
    case InitialFeatures::Mode::none:
      break;
    case InitialFeatures::Mode::raw:
      names = full.column_names();
      break;
    case InitialFeatures::Mode::named:
      for (const auto& want : initial.names) {
        if (full.column_index(want)) {
          names.push_back(want);
          continue;
        }
        bool found = false;
        for (const auto& c : full.columns) {
          if (c.source == want) {
            names.push_back(c.name);
            found = true;
          }
        }
        if (!found) throw SchemaError("initial feature '" + want + "' is not a column or covariate");
      }
      break;
  }
  return names;
}

PanelDataset prepare(const PanelDataset& ds, const EblrConfig& cfg) {
  return cfg.calendar_features ? expand_calendar(ds) : ds;
}

void finalize(EblrModel& model, VerticalMatrix design, const VerticalMatrix& full) {
  if (model.config.include_raw_at_end) {
    for (std::size_t j = 0; j < full.columns.size(); ++j) {
      if (!design.column_index(full.columns[j].name)) {
        design.append_column(full.columns[j], full.x.col(static_cast<Eigen::Index>(j)));
      }
    }
  }
  model.final_model = fit_base(design, model.config.base);
  model.training_residuals = design.y - predict(model.final_model, design);
}

}  // namespace

EblrModel fit_eblr(const PanelDataset& train, const EblrConfig& cfg) {
  cfg.validate();
  if (train.num_observations() == 0) throw FitError("training dataset is empty");
  const PanelDataset ds = prepare(train, cfg);
  const VerticalMatrix full = vertical_matrix(ds);

  EblrModel model;
  model.config = cfg;
  model.covariate_schema = ds.schema();
  model.raw_columns = full.columns;
  model.time_kind = ds.time_kind();

  VerticalMatrix design = full.select(initial_columns(full, cfg.initial));
  LinearModel g = fit_base(design, cfg.base);
  Eigen::VectorXd fitted = predict(g, design);
  double previous = nrmse(full.y, fitted);
  model.iteration_log.push_back({0, previous, std::nullopt});

  const double y_energy = full.y.squaredNorm();
  std::set<std::string> seen;
  model.stop_reason = StopReason::f_max_reached;
  for (int i = 1; i <= cfg.f_max; ++i) {
    const Eigen::VectorXd residuals = full.y - fitted;
    // Residuals at rounding level: nothing left for a tree to explain.
    if (residuals.squaredNorm() <= 1e-24 * y_energy) {
      model.stop_reason = StopReason::tree_cannot_split;
      break;
    }
    const RegressionTree tree = fit_tree(full, residuals, cfg.tree);
    auto rule = select_worst_leaf(tree);
    if (!rule) {
      model.stop_reason = StopReason::tree_cannot_split;
      break;
    }
    rule->source_iteration = i;
    const std::string name = rule_column_name(*rule);
    if (!seen.insert(name).second) {
      model.stop_reason = StopReason::duplicate_rule;
      break;
    }

    VerticalMatrix candidate = design;
    candidate.append_column({name, ColumnKind::binary, name, {}}, rule->apply(full));
    LinearModel refit = fit_base(candidate, cfg.base);
    Eigen::VectorXd refitted = predict(refit, candidate);
    const double score = nrmse(full.y, refitted);
    const double improvement = previous > 0.0 ? (previous - score) / previous : 0.0;
    if (improvement < cfg.min_relative_improvement - 1e-12) {
      model.stop_reason = StopReason::no_improvement;
      break;
    }

    design = std::move(candidate);
    g = std::move(refit);
    fitted = std::move(refitted);
    previous = score;
    model.rules.push_back(*rule);
    model.iteration_log.push_back({i, score, *rule});
  }

  finalize(model, std::move(design), full);
  return model;
}

EblrModel fit_base_only(const PanelDataset& train, const EblrConfig& cfg) {
  cfg.validate();
  if (train.num_observations() == 0) throw FitError("training dataset is empty");
  const PanelDataset ds = prepare(train, cfg);
  const VerticalMatrix full = vertical_matrix(ds);

  EblrModel model;
  model.config = cfg;
  model.covariate_schema = ds.schema();
  model.raw_columns = full.columns;
  model.time_kind = ds.time_kind();
  finalize(model, full.select(initial_columns(full, cfg.initial)), full);
  model.iteration_log.push_back({0, nrmse(full.y, full.y - model.training_residuals), std::nullopt});
  return model;
}

VerticalMatrix model_matrix(const EblrModel& model, const PanelDataset& future) {
  PanelDataset ds = model.config.calendar_features ? expand_calendar(future) : future;
  ds = conform_to_schema(ds, model.covariate_schema);
  VerticalMatrix m = vertical_matrix(ds);
  for (const auto& rule : model.rules) {
    const std::string name = rule_column_name(rule);
    m.append_column({name, ColumnKind::binary, name, {}}, rule.apply(m));
  }
  return m;
}

std::vector<PointForecast> predict_point(const EblrModel& model, const PanelDataset& future) {
  const VerticalMatrix m = model_matrix(model, future);
  const Eigen::VectorXd values = predict(model.final_model, m);
  std::vector<PointForecast> out;
  out.reserve(m.row_keys.size());
  for (std::size_t i = 0; i < m.row_keys.size(); ++i) {
    out.push_back({m.row_keys[i].series_id, m.row_keys[i].timestamp, values(static_cast<Eigen::Index>(i))});
  }
  return out;
}

}  // namespace eblr
