#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace aoimix {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text);

/// Splits one CSV record on commas. No quoting support; the files written
/// here never contain quotes or embedded commas.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace aoimix
