#ifndef EBLR_EXPLAIN_HPP
#define EBLR_EXPLAIN_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eblr/eblr.hpp"

namespace eblr {

// Raw covariate -> share of the train-NRMSE reduction attributed to it.
using ImportanceScores = std::map<std::string, double>;

// Each iteration's NRMSE drop (clipped at zero) is credited in full to every
// distinct covariate its rule tests; one-hot columns count toward their
// source covariate. Totals are normalized to sum to 1.
ImportanceScores feature_importance(const EblrModel& model);

// Scores by descending value, ties by name; at most `top` entries.
std::vector<std::pair<std::string, double>> ranked(const ImportanceScores& scores, std::size_t top);

struct RuleReportEntry {
  int iteration = 0;
  std::string rule;
  double leaf_mean = 0.0;
  double leaf_share = 0.0;
  double coefficient = 0.0;  // final model, on the 0/1 scale of the rule column
  std::string effect;        // "positive", "negative" or "none"
};

struct RuleReport {
  double intercept = 0.0;
  std::vector<RuleReportEntry> rules;
  std::vector<std::pair<std::string, double>> raw_coefficients;
  std::string stop_reason;
};

RuleReport rule_report(const EblrModel& model);
nlohmann::json to_json(const RuleReport& report);
void write_text(const RuleReport& report, std::ostream& out);

struct LearningCurvePoint {
  int iteration = 0;
  double train_nrmse = 0.0;
};

std::vector<LearningCurvePoint> learning_curve(const EblrModel& model);

}  // namespace eblr

#endif  // EBLR_EXPLAIN_HPP
