#ifndef EBLR_TESTS_HELPERS_HPP
#define EBLR_TESTS_HELPERS_HPP

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "eblr/data.hpp"

namespace testing {

// Numeric columns x0, x1, ... over a plain matrix.
inline eblr::VerticalMatrix numeric_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  eblr::VerticalMatrix m;
  m.x = x;
  m.y = y;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const std::string name = "x" + std::to_string(j);
    m.columns.push_back({name, eblr::ColumnKind::numeric, name, {}});
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) m.row_keys.push_back({"0", i});
  return m;
}

inline eblr::PanelDataset read_csv_text(const std::string& text, const eblr::CsvSchema& schema = {},
                                        eblr::TargetColumn target = eblr::TargetColumn::required) {
  std::istringstream in(text);
  return eblr::read_panel_csv(in, schema, target);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh scratch directory under the system temp dir.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("eblr_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

#endif  // EBLR_TESTS_HELPERS_HPP
