#ifndef EBLR_SRC_TEXT_HPP
#define EBLR_SRC_TEXT_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eblr::detail {

// Shortest representation that parses back to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);
std::string_view trim(std::string_view text);
// One CSV record; double quotes delimit fields containing commas or quotes.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

}  // namespace eblr::detail

#endif  // EBLR_SRC_TEXT_HPP
