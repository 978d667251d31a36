#ifndef EBLR_EBLR_HPP
#define EBLR_EBLR_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "eblr/data.hpp"
#include "eblr/linear.hpp"
#include "eblr/tree.hpp"

namespace eblr {

enum class BaseLearnerKind { ols, lasso };

struct BaseLearner {
  BaseLearnerKind kind = BaseLearnerKind::lasso;
  LassoConfig lasso;
};

// Columns the base learner starts from before any rule is generated.
struct InitialFeatures {
  enum class Mode { none, raw, named };
  Mode mode = Mode::none;
  // Matrix column names, or covariate names (expanded to all their one-hot
  // columns).
  std::vector<std::string> names;
};

struct EblrConfig {
  BaseLearner base;
  int f_max = 5;
  TreeConfig tree;
  InitialFeatures initial;
  bool include_raw_at_end = true;
  // An iteration whose refit lowers the train NRMSE by less than this
  // fraction ends the loop. 0 only stops on a worsening step.
  double min_relative_improvement = 0.0;
  // Applies expand_calendar to training and forecast data.
  bool calendar_features = false;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;                // 0 is the base fit before any rule
  double train_nrmse = 0.0;         // after refitting with this iteration's rule
  std::optional<RuleFeature> rule;  // empty for iteration 0
};

enum class StopReason { f_max_reached, tree_cannot_split, duplicate_rule, no_improvement, not_run };

std::string_view to_string(StopReason reason);

struct EblrModel {
  EblrConfig config;
  std::vector<RuleFeature> rules;
  LinearModel final_model;
  std::vector<IterationRecord> iteration_log;
  StopReason stop_reason = StopReason::not_run;
  Eigen::VectorXd training_residuals;  // y - final prediction on the training rows
  std::vector<Covariate> covariate_schema;
  std::vector<ColumnInfo> raw_columns;  // training matrix columns
  TimeKind time_kind = TimeKind::index;

  bool fitted() const { return !iteration_log.empty(); }
};

// Name of the design-matrix column holding a generated rule.
std::string rule_column_name(const RuleFeature& rule);

EblrModel fit_eblr(const PanelDataset& train, const EblrConfig& cfg);

// The configured base learner on its initial features (plus raw features when
// include_raw_at_end), without generating rules. With InitialFeatures::none
// and include_raw_at_end=false this is the intercept-only mean forecast.
EblrModel fit_base_only(const PanelDataset& train, const EblrConfig& cfg);

struct PointForecast {
  std::string series_id;
  std::int64_t timestamp = 0;
  double value = 0.0;
};

// One forecast per row of `future`, ordered by (series_id, timestamp).
std::vector<PointForecast> predict_point(const EblrModel& model, const PanelDataset& future);

// Design matrix the final linear model consumes: raw columns of `future`
// (after calendar expansion and schema conformance) plus one column per rule.
VerticalMatrix model_matrix(const EblrModel& model, const PanelDataset& future);

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const EblrModel& model);
EblrModel model_from_json(const nlohmann::json& doc);
void save_model(const EblrModel& model, const std::filesystem::path& path);
EblrModel load_model(const std::filesystem::path& path);

nlohmann::json to_json(const EblrConfig& cfg);
EblrConfig config_from_json(const nlohmann::json& doc);

}  // namespace eblr

#endif  // EBLR_EBLR_HPP
