#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "eblr/data.hpp"
#include "eblr/error.hpp"
#include "text.hpp"

namespace eblr {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

// ---------------------------------------------------------------------------
// Timestamps

std::pair<std::int64_t, TimeKind> parse_timestamp(std::string_view text) {
  text = detail::trim(text);
  if (auto idx = detail::parse_integer(text)) return {*idx, TimeKind::index};

  // YYYY-MM-DD[(T| )HH:MM[:SS]]
  auto fail = [&]() -> std::pair<std::int64_t, TimeKind> {
    throw ParseError("unrecognised timestamp '" + std::string(text) + "'");
  };
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return fail();
  const auto y = text.substr(0, 4);
  const auto mo = text.substr(5, 2);
  const auto d = text.substr(8, 2);
  if (!all_digits(y) || !all_digits(mo) || !all_digits(d)) return fail();
  const std::chrono::year_month_day ymd{std::chrono::year{std::stoi(std::string(y))},
                                        std::chrono::month{static_cast<unsigned>(std::stoi(std::string(mo)))},
                                        std::chrono::day{static_cast<unsigned>(std::stoi(std::string(d)))}};
  if (!ymd.ok()) return fail();
  const std::int64_t days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  if (text.size() == 10) return {days * kSecondsPerDay, TimeKind::date};

  if (text[10] != 'T' && text[10] != ' ') return fail();
  auto rest = text.substr(11);
  if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
  int hh = 0;
  int mm = 0;
  int ss = 0;
  if (rest.size() == 5 && rest[2] == ':' && all_digits(rest.substr(0, 2)) && all_digits(rest.substr(3, 2))) {
    hh = std::stoi(std::string(rest.substr(0, 2)));
    mm = std::stoi(std::string(rest.substr(3, 2)));
  } else if (rest.size() == 8 && rest[2] == ':' && rest[5] == ':' && all_digits(rest.substr(0, 2)) &&
             all_digits(rest.substr(3, 2)) && all_digits(rest.substr(6, 2))) {
    hh = std::stoi(std::string(rest.substr(0, 2)));
    mm = std::stoi(std::string(rest.substr(3, 2)));
    ss = std::stoi(std::string(rest.substr(6, 2)));
  } else {
    return fail();
  }
  if (hh > 23 || mm > 59 || ss > 59) return fail();
  return {days * kSecondsPerDay + hh * 3600 + mm * 60 + ss, TimeKind::datetime};
}

std::string format_timestamp(std::int64_t value, TimeKind kind) {
  if (kind == TimeKind::index) return std::to_string(value);
  std::int64_t days = value / kSecondsPerDay;
  std::int64_t secs = value % kSecondsPerDay;
  if (secs < 0) {
    secs += kSecondsPerDay;
    --days;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[32];
  if (kind == TimeKind::date) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  }
  return buf;
}

// ---------------------------------------------------------------------------
// Schema sidecar

CsvSchema CsvSchema::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed schema file " + path.string() + ": " + e.what());
  }
  CsvSchema schema;
  try {
    if (j.contains("series_id")) schema.series_id = j.at("series_id").get<std::string>();
    if (j.contains("timestamp")) schema.timestamp = j.at("timestamp").get<std::string>();
    if (j.contains("target")) schema.target = j.at("target").get<std::string>();
    if (j.contains("covariates")) {
      std::vector<CovariateSpec> specs;
      for (const auto& c : j.at("covariates")) {
        if (c.is_string()) {
          specs.push_back({c.get<std::string>(), std::nullopt});
        } else {
          CovariateSpec spec{c.at("name").get<std::string>(), std::nullopt};
          if (c.contains("kind")) spec.kind = parse_covariate_kind(c.at("kind").get<std::string>());
          specs.push_back(std::move(spec));
        }
      }
      schema.covariates = std::move(specs);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed schema file " + path.string() + ": " + e.what());
  }
  return schema;
}

// ---------------------------------------------------------------------------
// Reading

namespace {

struct RawColumn {
  std::string name;
  std::optional<CovariateKind> declared;
  std::size_t field = 0;
  std::vector<std::string> cells;
};

bool numeric_less(const std::string& a, const std::string& b) {
  return *detail::parse_double(a) < *detail::parse_double(b);
}

// Resolves a raw column to a covariate and per-row values.
std::pair<Covariate, std::vector<double>> resolve_column(const RawColumn& col) {
  std::vector<std::optional<double>> parsed;
  parsed.reserve(col.cells.size());
  bool all_numeric = true;
  for (const auto& cell : col.cells) {
    parsed.push_back(detail::parse_double(cell));
    if (!parsed.back() || !std::isfinite(*parsed.back())) all_numeric = false;
  }

  CovariateKind kind;
  if (col.declared) {
    kind = *col.declared;
  } else if (all_numeric) {
    const bool zero_one =
        std::all_of(parsed.begin(), parsed.end(), [](const auto& v) { return *v == 0.0 || *v == 1.0; });
    kind = zero_one && !parsed.empty() ? CovariateKind::binary : CovariateKind::numeric;
  } else {
    kind = CovariateKind::categorical;
  }

  Covariate cov{col.name, kind, {}};
  std::vector<double> values(col.cells.size());
  if (kind == CovariateKind::categorical) {
    std::set<std::string> distinct(col.cells.begin(), col.cells.end());
    cov.levels.assign(distinct.begin(), distinct.end());
    if (all_numeric) std::stable_sort(cov.levels.begin(), cov.levels.end(), numeric_less);
    std::map<std::string, double> index;
    for (std::size_t i = 0; i < cov.levels.size(); ++i) index[cov.levels[i]] = static_cast<double>(i);
    for (std::size_t r = 0; r < col.cells.size(); ++r) values[r] = index.at(col.cells[r]);
    return {std::move(cov), std::move(values)};
  }

  for (std::size_t r = 0; r < col.cells.size(); ++r) {
    if (!parsed[r] || !std::isfinite(*parsed[r])) {
      throw ParseError("row " + std::to_string(r + 1) + ": covariate '" + col.name + "' value '" +
                       col.cells[r] + "' is not a finite number");
    }
    if (kind == CovariateKind::binary && *parsed[r] != 0.0 && *parsed[r] != 1.0) {
      throw SchemaError("row " + std::to_string(r + 1) + ": binary covariate '" + col.name +
                        "' has value '" + col.cells[r] + "'");
    }
    values[r] = *parsed[r];
  }
  return {std::move(cov), std::move(values)};
}

}  // namespace

PanelDataset read_panel_csv(std::istream& in, const CsvSchema& schema, TargetColumn target) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV file is empty (a header row is required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);

  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(std::distance(header.begin(), it));
  };
  auto require = [&](const std::string& name) {
    auto idx = find(name);
    if (!idx) throw SchemaError("missing column '" + name + "'");
    return *idx;
  };

  std::optional<std::size_t> series_col;
  if (schema.series_id) {
    series_col = require(*schema.series_id);
  } else {
    series_col = find("series_id");
  }
  const std::size_t time_col = require(schema.timestamp);
  std::optional<std::size_t> target_col = find(schema.target);
  if (!target_col && target == TargetColumn::required) require(schema.target);

  std::vector<RawColumn> raw;
  if (schema.covariates) {
    for (const auto& spec : *schema.covariates) raw.push_back({spec.name, spec.kind, require(spec.name), {}});
  } else {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == time_col || (series_col && i == *series_col) || (target_col && i == *target_col)) continue;
      raw.push_back({header[i], std::nullopt, i, {}});
    }
  }

  std::vector<std::string> ids;
  std::vector<std::int64_t> times;
  std::vector<double> targets;
  std::optional<TimeKind> time_kind;
  std::size_t line_no = 1;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++row_no;
    const auto fields = detail::split_csv_line(line);
    const std::string where = "row " + std::to_string(row_no) + " (line " + std::to_string(line_no) + ")";
    if (fields.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    ids.push_back(series_col ? fields[*series_col] : "0");
    std::pair<std::int64_t, TimeKind> ts;
    try {
      ts = parse_timestamp(fields[time_col]);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!time_kind) {
      time_kind = ts.second;
    } else if (*time_kind != ts.second) {
      if ((*time_kind == TimeKind::index) != (ts.second == TimeKind::index)) {
        throw ParseError(where + ": mixes integer and calendar timestamps");
      }
      time_kind = TimeKind::datetime;
    }
    times.push_back(ts.first);
    if (target_col) {
      const auto v = detail::parse_double(fields[*target_col]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(where + ": target '" + fields[*target_col] + "' is not a finite number");
      }
      targets.push_back(*v);
    } else {
      targets.push_back(0.0);
    }
    for (auto& col : raw) {
      if (fields[col.field].empty()) throw ParseError(where + ": missing value for '" + col.name + "'");
      col.cells.push_back(fields[col.field]);
    }
  }

  std::vector<Covariate> covariates;
  std::vector<std::vector<double>> values;
  for (const auto& col : raw) {
    auto [cov, vals] = resolve_column(col);
    covariates.push_back(std::move(cov));
    values.push_back(std::move(vals));
  }

  std::map<std::string, Series> grouped;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto& s = grouped[ids[r]];
    s.id = ids[r];
    Observation obs{times[r], targets[r], std::vector<double>(covariates.size())};
    for (std::size_t c = 0; c < covariates.size(); ++c) obs.covariates[c] = values[c][r];
    s.rows.push_back(std::move(obs));
  }
  std::vector<Series> series;
  for (auto& [id, s] : grouped) series.push_back(std::move(s));
  return PanelDataset(std::move(covariates), std::move(series), time_kind.value_or(TimeKind::index),
                      target_col.has_value());
}

PanelDataset load_panel_csv(const std::filesystem::path& path, const CsvSchema& schema, TargetColumn target) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  return read_panel_csv(in, schema, target);
}

void write_panel_csv(const PanelDataset& ds, std::ostream& out) {
  out << "series_id,timestamp";
  if (ds.has_target()) out << ",target";
  for (const auto& cov : ds.schema()) out << ',' << detail::csv_escape(cov.name);
  out << '\n';
  for (const auto& s : ds.series()) {
    for (const auto& row : s.rows) {
      out << detail::csv_escape(s.id) << ',' << format_timestamp(row.timestamp, ds.time_kind());
      if (ds.has_target()) out << ',' << detail::format_double(row.target);
      for (std::size_t c = 0; c < ds.schema().size(); ++c) {
        const auto& cov = ds.schema()[c];
        out << ',';
        if (cov.kind == CovariateKind::categorical) {
          out << detail::csv_escape(cov.levels[static_cast<std::size_t>(row.covariates[c])]);
        } else {
          out << detail::format_double(row.covariates[c]);
        }
      }
      out << '\n';
    }
  }
}

}  // namespace eblr
