#pragma once

#include <string>
#include <string_view>

namespace unsee {

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
// Strict parse of a full string; throws Parse on trailing junk or non-finite.
double parse_double(std::string_view s);
unsigned long long parse_unsigned(std::string_view s);

}  // namespace unsee
