#ifndef EBLR_DATA_HPP
#define EBLR_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace eblr {

enum class CovariateKind { numeric, binary, categorical };

std::string_view to_string(CovariateKind kind);
CovariateKind parse_covariate_kind(std::string_view text);

// Categorical covariates carry their level set; observations store the level
// index as a double.
struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::numeric;
  std::vector<std::string> levels;

  bool operator==(const Covariate&) const = default;
};

// How timestamps are interpreted. Calendar kinds store seconds since the Unix
// epoch (UTC); `index` stores the integer time index verbatim.
enum class TimeKind { index, date, datetime };

std::string format_timestamp(std::int64_t value, TimeKind kind);
// Accepts YYYY-MM-DD, YYYY-MM-DDTHH:MM[:SS] (space separator allowed) or an
// integer index.
std::pair<std::int64_t, TimeKind> parse_timestamp(std::string_view text);

struct Observation {
  std::int64_t timestamp = 0;
  double target = 0.0;
  std::vector<double> covariates;

  bool operator==(const Observation&) const = default;
};

struct Series {
  std::string id;
  std::vector<Observation> rows;

  bool operator==(const Series&) const = default;
};

// N time series over a shared covariate schema. Construction validates every
// invariant and sorts series by id and rows by timestamp; instances are
// immutable afterwards.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<Covariate> schema, std::vector<Series> series,
               TimeKind time_kind, bool has_target = true);

  const std::vector<Covariate>& schema() const { return schema_; }
  const std::vector<Series>& series() const { return series_; }
  TimeKind time_kind() const { return time_kind_; }
  // Spacing between consecutive timestamps; 0 when no series has two rows.
  std::int64_t step() const { return step_; }
  // False for future-covariate files that carry no target column.
  bool has_target() const { return has_target_; }

  std::size_t num_observations() const;
  std::optional<std::size_t> covariate_index(std::string_view name) const;

  bool operator==(const PanelDataset&) const = default;

 private:
  std::vector<Covariate> schema_;
  std::vector<Series> series_;
  TimeKind time_kind_ = TimeKind::index;
  std::int64_t step_ = 0;
  bool has_target_ = true;
};

// ---------------------------------------------------------------------------
// CSV ingestion

struct CovariateSpec {
  std::string name;
  std::optional<CovariateKind> kind;  // inferred from the column when absent
};

// Maps CSV columns to roles. With `series_id` unset, a column named
// "series_id" is used when present and the file is otherwise one series "0".
// With `covariates` unset, every remaining column is a covariate.
struct CsvSchema {
  std::optional<std::string> series_id;
  std::string timestamp = "timestamp";
  std::string target = "target";
  std::optional<std::vector<CovariateSpec>> covariates;

  static CsvSchema from_json_file(const std::filesystem::path& path);
};

enum class TargetColumn { required, optional };

PanelDataset load_panel_csv(const std::filesystem::path& path,
                            const CsvSchema& schema,
                            TargetColumn target = TargetColumn::required);
PanelDataset read_panel_csv(std::istream& in, const CsvSchema& schema,
                            TargetColumn target = TargetColumn::required);

// Long layout: series_id,timestamp,target,<covariates...>. Categoricals are
// written as level strings; the target column is omitted when the dataset has
// none.
void write_panel_csv(const PanelDataset& ds, std::ostream& out);

// ---------------------------------------------------------------------------
// Transformations

// Adds day_of_week, day_of_month, month, year (categorical) and is_weekend
// (binary). Columns already present are left alone.
PanelDataset expand_calendar(const PanelDataset& ds);

// Re-expresses `ds` over `schema`: covariates are reordered to match, and
// categorical values are remapped by level name. Levels unknown to `schema`
// are appended after the known ones. Covariates in `ds` that the schema does
// not name are dropped.
PanelDataset conform_to_schema(const PanelDataset& ds,
                               const std::vector<Covariate>& schema);

struct TrainTestSplit {
  PanelDataset train;
  PanelDataset test;
};

TrainTestSplit split_train_test(const PanelDataset& ds, std::size_t horizon);

// Per series: train = rows [0, T - from_end), test = the next `horizon` rows.
TrainTestSplit split_at_origin(const PanelDataset& ds, std::size_t from_end,
                               std::size_t horizon);

// ---------------------------------------------------------------------------
// Synthetic generator

struct SynthConfig {
  std::size_t length = 2048;
  double noise_mean = 5000.0;
  double noise_std = 150.0;
  double ar1 = -0.4;
  double ar2 = 0.5;
  double weekend_effect = 3000.0;
  double promo_effect = 1500.0;
  double interaction_effect = 5500.0;
  double promo_probability = 0.2;
  std::uint64_t rng_seed = 42;
  // false: the AR(2) recursion runs on the level/noise component and the
  // calendar and promotion effects are added on top of it. true: the effects
  // enter the recursion and are carried into later days.
  bool propagate_effects = false;
  // Day 0 of the series. Must be a Monday so the weekend cycle lines up with
  // the calendar.
  std::string start_date = "2015-06-01";

  void validate() const;
};

PanelDataset generate_synthetic(const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// Vertical (long) design matrix

enum class ColumnKind { numeric, binary, one_hot };

struct ColumnInfo {
  std::string name;    // matrix column name; "source=level" for one-hot
  ColumnKind kind = ColumnKind::numeric;
  std::string source;  // originating covariate
  std::string level;   // one-hot level, empty otherwise

  bool operator==(const ColumnInfo&) const = default;
};

struct RowKey {
  std::string series_id;
  std::int64_t timestamp = 0;

  auto operator<=>(const RowKey&) const = default;
};

struct VerticalMatrix {
  Eigen::MatrixXd x;  // rows = observations, cols = expanded covariates
  Eigen::VectorXd y;
  std::vector<ColumnInfo> columns;
  std::vector<RowKey> row_keys;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
  std::optional<Eigen::Index> column_index(std::string_view name) const;
  std::vector<std::string> column_names() const;

  void append_column(ColumnInfo info, const Eigen::Ref<const Eigen::VectorXd>& values);
  // Subset of columns by name, in the order given. Throws SchemaError when a
  // name is missing.
  VerticalMatrix select(const std::vector<std::string>& names) const;
};

VerticalMatrix vertical_matrix(const PanelDataset& ds);

}  // namespace eblr

#endif  // EBLR_DATA_HPP
