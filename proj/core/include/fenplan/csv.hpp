#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fenplan {

// Shortest decimal form that parses back to the same double. CSV and JSON
// outputs both use it, so the two formats agree digit for digit.
std::string format_number(double value);

// Throws FormatError unless the whole field is a number.
double parse_number(std::string_view field);

// Comma-separated rows without quoting; blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace fenplan
