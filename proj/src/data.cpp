#include "eblr/data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "eblr/error.hpp"
#include "text.hpp"

namespace eblr {

std::string_view to_string(CovariateKind kind) {
  switch (kind) {
    case CovariateKind::numeric:
      return "numeric";
    case CovariateKind::binary:
      return "binary";
    case CovariateKind::categorical:
      return "categorical";
  }
  return "numeric";
}

CovariateKind parse_covariate_kind(std::string_view text) {
  if (text == "numeric") return CovariateKind::numeric;
  if (text == "binary") return CovariateKind::binary;
  if (text == "categorical") return CovariateKind::categorical;
  throw SchemaError("unknown covariate kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// PanelDataset

PanelDataset::PanelDataset(std::vector<Covariate> schema, std::vector<Series> series,
                           TimeKind time_kind, bool has_target)
    : schema_(std::move(schema)), time_kind_(time_kind), has_target_(has_target) {
  std::set<std::string, std::less<>> names;
  for (const auto& cov : schema_) {
    if (cov.name.empty()) throw SchemaError("covariate with empty name");
    if (!names.insert(cov.name).second) {
      throw SchemaError("duplicate covariate '" + cov.name + "'");
    }
  }

  std::erase_if(series, [](const Series& s) { return s.rows.empty(); });
  std::sort(series.begin(), series.end(),
            [](const Series& a, const Series& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].id == series[i - 1].id) {
      throw IntegrityError("duplicate series id '" + series[i].id + "'");
    }
  }

  for (auto& s : series) {
    for (const auto& row : s.rows) {
      if (row.covariates.size() != schema_.size()) {
        throw SchemaError("series '" + s.id + "': row has " +
                          std::to_string(row.covariates.size()) + " covariates, schema has " +
                          std::to_string(schema_.size()));
      }
      if (has_target_ && !std::isfinite(row.target)) {
        throw ParseError("series '" + s.id + "' at " + format_timestamp(row.timestamp, time_kind_) +
                         ": target is not finite");
      }
      for (std::size_t c = 0; c < schema_.size(); ++c) {
        const double v = row.covariates[c];
        const auto& cov = schema_[c];
        switch (cov.kind) {
          case CovariateKind::numeric:
            if (!std::isfinite(v)) {
              throw ParseError("covariate '" + cov.name + "' is not finite in series '" + s.id + "'");
            }
            break;
          case CovariateKind::binary:
            if (v != 0.0 && v != 1.0) {
              throw SchemaError("binary covariate '" + cov.name + "' has value " +
                                detail::format_double(v));
            }
            break;
          case CovariateKind::categorical:
            if (v < 0.0 || v != std::floor(v) || v >= static_cast<double>(cov.levels.size())) {
              throw SchemaError("categorical covariate '" + cov.name + "' has undeclared level index " +
                                detail::format_double(v));
            }
            break;
        }
      }
    }
    std::stable_sort(s.rows.begin(), s.rows.end(),
                     [](const Observation& a, const Observation& b) { return a.timestamp < b.timestamp; });
    for (std::size_t i = 1; i < s.rows.size(); ++i) {
      if (s.rows[i].timestamp == s.rows[i - 1].timestamp) {
        throw IntegrityError("duplicate observation (" + s.id + ", " +
                             format_timestamp(s.rows[i].timestamp, time_kind_) + ")");
      }
    }
  }

  for (const auto& s : series) {
    for (std::size_t i = 1; i < s.rows.size(); ++i) {
      const std::int64_t diff = s.rows[i].timestamp - s.rows[i - 1].timestamp;
      if (step_ == 0) step_ = diff;
      if (diff != step_) {
        throw IntegrityError("series '" + s.id + "' is not evenly spaced at " +
                             format_timestamp(s.rows[i].timestamp, time_kind_));
      }
    }
  }
  series_ = std::move(series);
}

std::size_t PanelDataset::num_observations() const {
  std::size_t n = 0;
  for (const auto& s : series_) n += s.rows.size();
  return n;
}

std::optional<std::size_t> PanelDataset::covariate_index(std::string_view name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name == name) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Calendar expansion

namespace {

using std::chrono::sys_days;
using std::chrono::year_month_day;

constexpr std::int64_t kSecondsPerDay = 86400;

sys_days to_days(std::int64_t seconds) {
  std::int64_t days = seconds / kSecondsPerDay;
  if (seconds % kSecondsPerDay < 0) --days;
  return sys_days{std::chrono::days{days}};
}

const std::vector<std::string> kWeekdays{"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};

std::vector<std::string> numbered_levels(int first, int last) {
  std::vector<std::string> out;
  for (int i = first; i <= last; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

PanelDataset expand_calendar(const PanelDataset& ds) {
  if (ds.time_kind() == TimeKind::index) {
    throw SchemaError("calendar expansion needs calendar timestamps, got an integer time index");
  }

  std::set<int> years;
  for (const auto& s : ds.series()) {
    for (const auto& row : s.rows) years.insert(static_cast<int>(year_month_day{to_days(row.timestamp)}.year()));
  }
  std::vector<std::string> year_levels;
  for (int y : years) year_levels.push_back(std::to_string(y));

  struct Added {
    Covariate cov;
    int field;  // 0 dow, 1 dom, 2 month, 3 year, 4 weekend
  };
  std::vector<Added> added;
  auto add = [&](Covariate cov, int field) {
    if (!ds.covariate_index(cov.name)) added.push_back({std::move(cov), field});
  };
  add({"day_of_week", CovariateKind::categorical, kWeekdays}, 0);
  add({"day_of_month", CovariateKind::categorical, numbered_levels(1, 31)}, 1);
  add({"month", CovariateKind::categorical, numbered_levels(1, 12)}, 2);
  add({"year", CovariateKind::categorical, year_levels}, 3);
  add({"is_weekend", CovariateKind::binary, {}}, 4);
  if (added.empty()) return ds;

  auto schema = ds.schema();
  for (const auto& a : added) schema.push_back(a.cov);

  std::vector<Series> series = ds.series();
  for (auto& s : series) {
    for (auto& row : s.rows) {
      const sys_days day = to_days(row.timestamp);
      const year_month_day ymd{day};
      const unsigned iso = std::chrono::weekday{day}.iso_encoding();  // Mon=1 .. Sun=7
      for (const auto& a : added) {
        double v = 0.0;
        switch (a.field) {
          case 0:
            v = static_cast<double>(iso - 1);
            break;
          case 1:
            v = static_cast<double>(static_cast<unsigned>(ymd.day()) - 1);
            break;
          case 2:
            v = static_cast<double>(static_cast<unsigned>(ymd.month()) - 1);
            break;
          case 3: {
            const int y = static_cast<int>(ymd.year());
            v = static_cast<double>(std::distance(years.begin(), years.find(y)));
            break;
          }
          case 4:
            v = iso >= 6 ? 1.0 : 0.0;
            break;
        }
        row.covariates.push_back(v);
      }
    }
  }
  return PanelDataset(std::move(schema), std::move(series), ds.time_kind(), ds.has_target());
}

// ---------------------------------------------------------------------------
// Schema conformance

PanelDataset conform_to_schema(const PanelDataset& ds, const std::vector<Covariate>& schema) {
  std::vector<std::size_t> source(schema.size());
  std::vector<Covariate> out_schema = schema;
  // Per categorical covariate: level index in `ds` -> level index in output.
  std::vector<std::vector<double>> remap(schema.size());

  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto idx = ds.covariate_index(schema[c].name);
    if (!idx) throw PredictionError("missing covariate '" + schema[c].name + "'");
    source[c] = *idx;
    const Covariate& have = ds.schema()[*idx];
    if (schema[c].kind != CovariateKind::categorical) continue;

    auto& levels = out_schema[c].levels;
    auto level_of = [&](const std::string& name) {
      auto it = std::find(levels.begin(), levels.end(), name);
      if (it == levels.end()) {
        levels.push_back(name);
        return static_cast<double>(levels.size() - 1);
      }
      return static_cast<double>(std::distance(levels.begin(), it));
    };
    if (have.kind == CovariateKind::categorical) {
      for (const auto& lv : have.levels) remap[c].push_back(level_of(lv));
    } else {
      // Numeric-looking categorical read without a declared kind; the levels
      // are the formatted values present in the data.
      std::set<double> values;
      for (const auto& s : ds.series()) {
        for (const auto& row : s.rows) values.insert(row.covariates[*idx]);
      }
      for (double v : values) level_of(detail::format_double(v));
    }
  }

  std::vector<Series> series;
  for (const auto& s : ds.series()) {
    Series out{s.id, {}};
    out.rows.reserve(s.rows.size());
    for (const auto& row : s.rows) {
      Observation o{row.timestamp, row.target, std::vector<double>(schema.size())};
      for (std::size_t c = 0; c < schema.size(); ++c) {
        const double v = row.covariates[source[c]];
        if (schema[c].kind != CovariateKind::categorical) {
          o.covariates[c] = v;
        } else if (ds.schema()[source[c]].kind == CovariateKind::categorical) {
          o.covariates[c] = remap[c][static_cast<std::size_t>(v)];
        } else {
          const auto& levels = out_schema[c].levels;
          const auto it = std::find(levels.begin(), levels.end(), detail::format_double(v));
          o.covariates[c] = static_cast<double>(std::distance(levels.begin(), it));
        }
      }
      out.rows.push_back(std::move(o));
    }
    series.push_back(std::move(out));
  }
  return PanelDataset(std::move(out_schema), std::move(series), ds.time_kind(), ds.has_target());
}

// ---------------------------------------------------------------------------
// Splitting

TrainTestSplit split_at_origin(const PanelDataset& ds, std::size_t from_end, std::size_t horizon) {
  if (horizon == 0) throw SplitError("horizon must be positive");
  if (from_end < horizon) throw SplitError("origin offset smaller than the horizon");
  std::vector<Series> train;
  std::vector<Series> test;
  for (const auto& s : ds.series()) {
    const std::size_t t = s.rows.size();
    if (t < from_end + 1) {
      throw SplitError("series '" + s.id + "' has " + std::to_string(t) + " rows; at least " +
                       std::to_string(from_end + 1) + " required");
    }
    const auto origin = s.rows.begin() + static_cast<std::ptrdiff_t>(t - from_end);
    train.push_back({s.id, {s.rows.begin(), origin}});
    test.push_back({s.id, {origin, origin + static_cast<std::ptrdiff_t>(horizon)}});
  }
  return {PanelDataset(ds.schema(), std::move(train), ds.time_kind(), ds.has_target()),
          PanelDataset(ds.schema(), std::move(test), ds.time_kind(), ds.has_target())};
}

TrainTestSplit split_train_test(const PanelDataset& ds, std::size_t horizon) {
  return split_at_origin(ds, horizon, horizon);
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SynthConfig::validate() const {
  if (length == 0) throw ValidationError("synthetic length must be positive");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw ValidationError("noise standard deviation must be a nonnegative finite number");
  }
  if (!(promo_probability >= 0.0 && promo_probability <= 1.0)) {
    throw ValidationError("promotion probability must lie in [0, 1]");
  }
  for (double v : {noise_mean, ar1, ar2, weekend_effect, promo_effect, interaction_effect}) {
    if (!std::isfinite(v)) throw ValidationError("synthetic parameters must be finite");
  }
  const auto [start, kind] = parse_timestamp(start_date);
  if (kind != TimeKind::date) throw ValidationError("start date must be YYYY-MM-DD");
  if (std::chrono::weekday{to_days(start)}.iso_encoding() != 1) {
    throw ValidationError("start date " + start_date + " is not a Monday");
  }
}

PanelDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const std::int64_t start = parse_timestamp(cfg.start_date).first;

  std::mt19937_64 rng(cfg.rng_seed);
  std::bernoulli_distribution promo_draw(cfg.promo_probability);
  std::normal_distribution<double> noise(cfg.noise_mean, cfg.noise_std);

  // `level` follows the AR(2) recursion from level_0 = level_1 = 0.
  std::vector<double> level(cfg.length, 0.0);
  Series series{"0", {}};
  series.rows.reserve(cfg.length);
  for (std::size_t t = 0; t < cfg.length; ++t) {
    const double weekend = (t % 7) >= 5 ? 1.0 : 0.0;
    const double promo = promo_draw(rng) ? 1.0 : 0.0;
    const double effects = cfg.interaction_effect * weekend * promo + cfg.promo_effect * promo +
                           cfg.weekend_effect * weekend;
    double y = 0.0;
    if (t >= 2) {
      const double eps = cfg.noise_std > 0.0 ? noise(rng) : cfg.noise_mean;
      level[t] = cfg.ar1 * level[t - 1] + cfg.ar2 * level[t - 2] + eps;
      if (cfg.propagate_effects) level[t] += effects;
    }
    y = cfg.propagate_effects ? level[t] : level[t] + effects;
    series.rows.push_back({start + static_cast<std::int64_t>(t) * kSecondsPerDay, y, {weekend, promo}});
  }

  std::vector<Covariate> schema{{"isWeekend", CovariateKind::binary, {}},
                                {"isPromotion", CovariateKind::binary, {}}};
  std::vector<Series> all;
  all.push_back(std::move(series));
  return PanelDataset(std::move(schema), std::move(all), TimeKind::date);
}

// ---------------------------------------------------------------------------
// Vertical matrix

std::optional<Eigen::Index> VerticalMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

std::vector<std::string> VerticalMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

void VerticalMatrix::append_column(ColumnInfo info, const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() != x.rows()) throw SchemaError("appended column has the wrong length");
  if (column_index(info.name)) throw SchemaError("duplicate column '" + info.name + "'");
  x.conservativeResize(Eigen::NoChange, x.cols() + 1);
  x.col(x.cols() - 1) = values;
  columns.push_back(std::move(info));
}

VerticalMatrix VerticalMatrix::select(const std::vector<std::string>& names) const {
  VerticalMatrix out;
  out.x.resize(x.rows(), static_cast<Eigen::Index>(names.size()));
  out.y = y;
  out.row_keys = row_keys;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto idx = column_index(names[i]);
    if (!idx) throw SchemaError("missing column '" + names[i] + "'");
    out.x.col(static_cast<Eigen::Index>(i)) = x.col(*idx);
    out.columns.push_back(columns[static_cast<std::size_t>(*idx)]);
  }
  return out;
}

VerticalMatrix vertical_matrix(const PanelDataset& ds) {
  VerticalMatrix m;
  // Column offset of each covariate in the expanded matrix.
  std::vector<Eigen::Index> offset;
  for (const auto& cov : ds.schema()) {
    offset.push_back(static_cast<Eigen::Index>(m.columns.size()));
    switch (cov.kind) {
      case CovariateKind::numeric:
        m.columns.push_back({cov.name, ColumnKind::numeric, cov.name, {}});
        break;
      case CovariateKind::binary:
        m.columns.push_back({cov.name, ColumnKind::binary, cov.name, {}});
        break;
      case CovariateKind::categorical:
        for (const auto& level : cov.levels) {
          m.columns.push_back({cov.name + "=" + level, ColumnKind::one_hot, cov.name, level});
        }
        break;
    }
  }

  const auto n = static_cast<Eigen::Index>(ds.num_observations());
  m.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m.columns.size()));
  m.y.resize(n);
  m.row_keys.reserve(static_cast<std::size_t>(n));
  Eigen::Index r = 0;
  for (const auto& s : ds.series()) {
    for (const auto& row : s.rows) {
      m.y(r) = row.target;
      m.row_keys.push_back({s.id, row.timestamp});
      for (std::size_t c = 0; c < ds.schema().size(); ++c) {
        const double v = row.covariates[c];
        if (ds.schema()[c].kind == CovariateKind::categorical) {
          m.x(r, offset[c] + static_cast<Eigen::Index>(v)) = 1.0;
        } else {
          m.x(r, offset[c]) = v;
        }
      }
      ++r;
    }
  }
  return m;
}

}  // namespace eblr
