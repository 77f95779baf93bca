#include "unsee/format.hpp"

#include <charconv>
#include <cmath>

#include "unsee/error.hpp"

namespace unsee {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty(), ErrorKind::Parse,
          "not a number: '" + std::string(s) + "'");
  require(std::isfinite(v), ErrorKind::Parse, "not a finite number: '" + std::string(s) + "'");
  return v;
}

unsigned long long parse_unsigned(std::string_view s) {
  unsigned long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty(), ErrorKind::Parse,
          "not a non-negative integer: '" + std::string(s) + "'");
  return v;
}

}  // namespace unsee
