#include <cmath>
#include <fstream>

#include "eblr/eblr.hpp"
#include "eblr/error.hpp"

namespace eblr {

using nlohmann::json;

namespace {

std::string_view time_kind_name(TimeKind k) {
  switch (k) {
    case TimeKind::index:
      return "index";
    case TimeKind::date:
      return "date";
    case TimeKind::datetime:
      return "datetime";
  }
  return "index";
}

TimeKind parse_time_kind(const std::string& s) {
  if (s == "index") return TimeKind::index;
  if (s == "date") return TimeKind::date;
  if (s == "datetime") return TimeKind::datetime;
  throw ModelFormatError("unknown time kind '" + s + "'");
}

std::string_view column_kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric:
      return "numeric";
    case ColumnKind::binary:
      return "binary";
    case ColumnKind::one_hot:
      return "one_hot";
  }
  return "numeric";
}

ColumnKind parse_column_kind(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "binary") return ColumnKind::binary;
  if (s == "one_hot") return ColumnKind::one_hot;
  throw ModelFormatError("unknown column kind '" + s + "'");
}

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::le:
      return "<=";
    case Relation::gt:
      return ">";
    case Relation::eq:
      return "=";
    case Relation::ne:
      return "!=";
  }
  return "<=";
}

Relation parse_relation(const std::string& s) {
  if (s == "<=") return Relation::le;
  if (s == ">") return Relation::gt;
  if (s == "=") return Relation::eq;
  if (s == "!=") return Relation::ne;
  throw ModelFormatError("unknown relation '" + s + "'");
}

StopReason parse_stop_reason(const std::string& s) {
  for (auto r : {StopReason::f_max_reached, StopReason::tree_cannot_split, StopReason::duplicate_rule,
                 StopReason::no_improvement, StopReason::not_run}) {
    if (to_string(r) == s) return r;
  }
  throw ModelFormatError("unknown stop reason '" + s + "'");
}

json column_json(const ColumnInfo& c) {
  json j{{"name", c.name}, {"kind", column_kind_name(c.kind)}, {"source", c.source}};
  if (c.kind == ColumnKind::one_hot) j["level"] = c.level;
  return j;
}

ColumnInfo column_from_json(const json& j) {
  ColumnInfo c;
  c.name = j.at("name").get<std::string>();
  c.kind = parse_column_kind(j.at("kind").get<std::string>());
  c.source = j.value("source", c.name);
  c.level = j.value("level", std::string{});
  return c;
}

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

json rule_json(const RuleFeature& r) {
  json conds = json::array();
  for (const auto& c : r.conditions) {
    conds.push_back({{"column", column_json(c.column)},
                     {"relation", relation_name(c.relation)},
                     {"threshold", c.threshold}});
  }
  return {{"rule", r.to_string()},
          {"iteration", r.source_iteration},
          {"leaf_mean", r.leaf_mean},
          {"leaf_share", r.leaf_share},
          {"conditions", conds}};
}

RuleFeature rule_from_json(const json& j) {
  RuleFeature r;
  r.source_iteration = j.at("iteration").get<int>();
  r.leaf_mean = j.value("leaf_mean", 0.0);
  r.leaf_share = j.value("leaf_share", 0.0);
  for (const auto& c : j.at("conditions")) {
    r.conditions.push_back({column_from_json(c.at("column")), parse_relation(c.at("relation").get<std::string>()),
                            c.at("threshold").get<double>()});
  }
  if (r.conditions.empty()) throw ModelFormatError("rule without conditions");
  const auto stored = j.at("rule").get<std::string>();
  if (stored != r.to_string()) {
    throw ModelFormatError("rule text '" + stored + "' does not match its conditions ('" + r.to_string() + "')");
  }
  return r;
}

json linear_json(const LinearModel& m) {
  json coefs = json::array();
  for (std::size_t j = 0; j < m.column_names.size(); ++j) {
    coefs.push_back({{"column", m.column_names[j]}, {"coefficient", m.coefficients(static_cast<Eigen::Index>(j))}});
  }
  json out{{"intercept", m.intercept},
           {"coefficients", coefs},
           {"standardization",
            {{"mean", vector_json(m.standardization.mean)}, {"scale", vector_json(m.standardization.scale)}}},
           {"warnings", m.warnings}};
  out["lambda"] = m.lambda ? json(*m.lambda) : json(nullptr);
  return out;
}

LinearModel linear_from_json(const json& j) {
  LinearModel m;
  m.intercept = j.at("intercept").get<double>();
  const json coefs = j.value("coefficients", json::array());
  m.coefficients.resize(static_cast<Eigen::Index>(coefs.size()));
  for (std::size_t i = 0; i < coefs.size(); ++i) {
    m.column_names.push_back(coefs[i].at("column").get<std::string>());
    m.coefficients(static_cast<Eigen::Index>(i)) = coefs[i].at("coefficient").get<double>();
  }
  if (j.contains("standardization")) {
    m.standardization.mean = vector_from_json(j["standardization"].at("mean"));
    m.standardization.scale = vector_from_json(j["standardization"].at("scale"));
  }
  if (j.contains("lambda") && !j["lambda"].is_null()) m.lambda = j["lambda"].get<double>();
  if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
  return m;
}

}  // namespace

json to_json(const EblrConfig& cfg) {
  json base{{"kind", cfg.base.kind == BaseLearnerKind::ols ? "ols" : "lasso"}};
  if (cfg.base.kind == BaseLearnerKind::lasso) {
    const auto& l = cfg.base.lasso;
    base["lambda"] = l.lambda ? json(*l.lambda) : json("auto");
    base["cv_folds"] = l.cv_folds;
    base["lambda_grid"] = l.lambda_grid;
    base["grid_size"] = l.grid_size;
    base["grid_ratio"] = l.grid_ratio;
    base["max_iters"] = l.max_iters;
    base["tol"] = l.tol;
  }
  std::string mode = "none";
  if (cfg.initial.mode == InitialFeatures::Mode::raw) mode = "raw";
  if (cfg.initial.mode == InitialFeatures::Mode::named) mode = "named";
  return {{"base_learner", base},
          {"f_max", cfg.f_max},
          {"tree", {{"eta", cfg.tree.eta}, {"min_leaf", cfg.tree.min_leaf}, {"max_depth", cfg.tree.max_depth}}},
          {"initial_features", {{"mode", mode}, {"names", cfg.initial.names}}},
          {"include_raw_at_end", cfg.include_raw_at_end},
          {"min_relative_improvement", cfg.min_relative_improvement},
          {"calendar_features", cfg.calendar_features}};
}

EblrConfig config_from_json(const json& j) {
  EblrConfig cfg;
  if (j.contains("base_learner")) {
    const auto& b = j["base_learner"];
    const auto kind = b.value("kind", std::string("lasso"));
    if (kind == "ols") {
      cfg.base.kind = BaseLearnerKind::ols;
    } else if (kind == "lasso") {
      cfg.base.kind = BaseLearnerKind::lasso;
      auto& l = cfg.base.lasso;
      if (b.contains("lambda") && b["lambda"].is_number()) l.lambda = b["lambda"].get<double>();
      l.cv_folds = b.value("cv_folds", l.cv_folds);
      l.lambda_grid = b.value("lambda_grid", l.lambda_grid);
      l.grid_size = b.value("grid_size", l.grid_size);
      l.grid_ratio = b.value("grid_ratio", l.grid_ratio);
      l.max_iters = b.value("max_iters", l.max_iters);
      l.tol = b.value("tol", l.tol);
    } else {
      throw ModelFormatError("unknown base learner '" + kind + "'");
    }
  }
  cfg.f_max = j.value("f_max", cfg.f_max);
  if (j.contains("tree")) {
    cfg.tree.eta = j["tree"].value("eta", cfg.tree.eta);
    cfg.tree.min_leaf = j["tree"].value("min_leaf", cfg.tree.min_leaf);
    cfg.tree.max_depth = j["tree"].value("max_depth", cfg.tree.max_depth);
  }
  if (j.contains("initial_features")) {
    const auto mode = j["initial_features"].value("mode", std::string("none"));
    if (mode == "raw") {
      cfg.initial.mode = InitialFeatures::Mode::raw;
    } else if (mode == "named") {
      cfg.initial.mode = InitialFeatures::Mode::named;
    } else if (mode != "none") {
      throw ModelFormatError("unknown initial feature mode '" + mode + "'");
    }
    cfg.initial.names = j["initial_features"].value("names", std::vector<std::string>{});
  }
  cfg.include_raw_at_end = j.value("include_raw_at_end", cfg.include_raw_at_end);
  cfg.min_relative_improvement = j.value("min_relative_improvement", cfg.min_relative_improvement);
  cfg.calendar_features = j.value("calendar_features", cfg.calendar_features);
  return cfg;
}

json to_json(const EblrModel& model) {
  json schema = json::array();
  for (const auto& c : model.covariate_schema) {
    json cj{{"name", c.name}, {"kind", to_string(c.kind)}};
    if (c.kind == CovariateKind::categorical) cj["levels"] = c.levels;
    schema.push_back(cj);
  }
  json raw = json::array();
  for (const auto& c : model.raw_columns) raw.push_back(column_json(c));
  json rules = json::array();
  for (const auto& r : model.rules) rules.push_back(rule_json(r));
  json log = json::array();
  for (const auto& rec : model.iteration_log) {
    log.push_back({{"iteration", rec.iteration},
                   {"train_nrmse", rec.train_nrmse},
                   {"rule", rec.rule ? json(rec.rule->to_string()) : json(nullptr)}});
  }
  return {{"schema_version", kModelSchemaVersion},
          {"config", to_json(model.config)},
          {"time_kind", time_kind_name(model.time_kind)},
          {"covariate_schema", schema},
          {"raw_columns", raw},
          {"rules", rules},
          {"final_model", linear_json(model.final_model)},
          {"iteration_log", log},
          {"stop_reason", to_string(model.stop_reason)},
          {"training_residuals", vector_json(model.training_residuals)}};
}

EblrModel model_from_json(const json& doc) {
  if (!doc.is_object()) throw ModelFormatError("model document must be a JSON object");
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    throw ModelFormatError("model document has no integer schema_version");
  }
  const int version = doc["schema_version"].get<int>();
  if (version != kModelSchemaVersion) {
    throw ModelFormatError("unsupported model schema_version " + std::to_string(version) + " (expected " +
                           std::to_string(kModelSchemaVersion) + ")");
  }
  try {
    EblrModel m;
    if (doc.contains("config")) m.config = config_from_json(doc["config"]);
    m.time_kind = parse_time_kind(doc.value("time_kind", std::string("index")));
    for (const auto& c : doc.value("covariate_schema", json::array())) {
      Covariate cov{c.at("name").get<std::string>(), parse_covariate_kind(c.at("kind").get<std::string>()), {}};
      if (cov.kind == CovariateKind::categorical) cov.levels = c.at("levels").get<std::vector<std::string>>();
      m.covariate_schema.push_back(std::move(cov));
    }
    for (const auto& c : doc.value("raw_columns", json::array())) m.raw_columns.push_back(column_from_json(c));
    for (const auto& r : doc.value("rules", json::array())) m.rules.push_back(rule_from_json(r));
    m.final_model = linear_from_json(doc.at("final_model"));
    for (const auto& rec : doc.value("iteration_log", json::array())) {
      IterationRecord ir{rec.at("iteration").get<int>(), rec.at("train_nrmse").get<double>(), std::nullopt};
      if (!rec["rule"].is_null()) {
        const auto text = rec["rule"].get<std::string>();
        for (const auto& r : m.rules) {
          if (r.source_iteration == ir.iteration && r.to_string() == text) ir.rule = r;
        }
        if (!ir.rule) throw ModelFormatError("iteration log names unknown rule '" + text + "'");
      }
      m.iteration_log.push_back(std::move(ir));
    }
    m.stop_reason = parse_stop_reason(doc.value("stop_reason", std::string("not_run")));
    m.training_residuals = vector_from_json(doc.value("training_residuals", json::array()));
    return m;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  } catch (const SchemaError& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const EblrModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

EblrModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelFormatError("cannot open model file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ModelFormatError("malformed model file " + path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace eblr
