#ifndef AWE_FORMAT_HPP_
#define AWE_FORMAT_HPP_

#include <charconv>
#include <cmath>
#include <string>

namespace awe {

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" otherwise.
inline std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace awe

#endif  // AWE_FORMAT_HPP_
