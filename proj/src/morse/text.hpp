#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace morse::text {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);
/// Fixed-point with `digits` decimals, for human-facing logs.
std::string format_fixed(double v, int digits);

/// Whole-string parse; returns false on trailing garbage or overflow.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

}  // namespace morse::text
