#include "eblr/explain.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>

#include "eblr/error.hpp"
#include "text.hpp"

namespace eblr {

ImportanceScores feature_importance(const EblrModel& model) {
  if (!model.fitted()) throw Error("feature importance needs a fitted model");
  ImportanceScores scores;
  const auto& log = model.iteration_log;
  for (std::size_t k = 1; k < log.size(); ++k) {
    if (!log[k].rule) continue;
    const double gain = std::max(0.0, log[k - 1].train_nrmse - log[k].train_nrmse);
    std::set<std::string> covariates;
    for (const auto& c : log[k].rule->conditions) covariates.insert(c.column.source);
    for (const auto& name : covariates) scores[name] += gain;
  }
  double total = 0.0;
  for (const auto& [name, v] : scores) total += v;
  if (total > 0.0) {
    for (auto& [name, v] : scores) v /= total;
  }
  return scores;
}

std::vector<std::pair<std::string, double>> ranked(const ImportanceScores& scores, std::size_t top) {
  std::vector<std::pair<std::string, double>> out(scores.begin(), scores.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > top) out.resize(top);
  return out;
}

RuleReport rule_report(const EblrModel& model) {
  RuleReport report;
  const LinearModel& fm = model.final_model;
  report.intercept = fm.intercept;
  report.stop_reason = std::string(to_string(model.stop_reason));
  std::set<std::string> rule_columns;
  for (const auto& rule : model.rules) {
    const std::string column = rule_column_name(rule);
    rule_columns.insert(column);
    double coef = 0.0;
    for (std::size_t j = 0; j < fm.column_names.size(); ++j) {
      if (fm.column_names[j] == column) coef = fm.coefficients(static_cast<Eigen::Index>(j));
    }
    report.rules.push_back({rule.source_iteration, rule.to_string(), rule.leaf_mean, rule.leaf_share, coef,
                            coef > 0.0 ? "positive" : (coef < 0.0 ? "negative" : "none")});
  }
  for (std::size_t j = 0; j < fm.column_names.size(); ++j) {
    if (!rule_columns.count(fm.column_names[j])) {
      report.raw_coefficients.emplace_back(fm.column_names[j], fm.coefficients(static_cast<Eigen::Index>(j)));
    }
  }
  return report;
}

nlohmann::json to_json(const RuleReport& report) {
  using nlohmann::json;
  json rules = json::array();
  for (const auto& e : report.rules) {
    rules.push_back({{"iteration", e.iteration},
                     {"rule", e.rule},
                     {"leaf_mean", e.leaf_mean},
                     {"leaf_share", e.leaf_share},
                     {"coefficient", e.coefficient},
                     {"effect", e.effect}});
  }
  json raw = json::array();
  for (const auto& [name, coef] : report.raw_coefficients) raw.push_back({{"column", name}, {"coefficient", coef}});
  return {{"intercept", report.intercept},
          {"rules", rules},
          {"raw_coefficients", raw},
          {"stop_reason", report.stop_reason}};
}

void write_text(const RuleReport& report, std::ostream& out) {
  out << "intercept: " << detail::format_double(report.intercept) << '\n';
  out << "generated rules (" << report.rules.size() << ", stop: " << report.stop_reason << ")\n";
  for (const auto& e : report.rules) {
    char share[32];
    std::snprintf(share, sizeof share, "%.1f%%", 100.0 * e.leaf_share);
    out << "  [" << e.iteration << "] " << e.rule << "\n      coefficient " << detail::format_double(e.coefficient)
        << " (" << e.effect << "), leaf mean " << detail::format_double(e.leaf_mean) << ", share " << share
        << '\n';
  }
  out << "raw coefficients\n";
  for (const auto& [name, coef] : report.raw_coefficients) {
    out << "  " << name << ": " << detail::format_double(coef) << '\n';
  }
}

std::vector<LearningCurvePoint> learning_curve(const EblrModel& model) {
  std::vector<LearningCurvePoint> out;
  for (const auto& rec : model.iteration_log) out.push_back({rec.iteration, rec.train_nrmse});
  return out;
}

}  // namespace eblr
