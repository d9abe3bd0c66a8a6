#include "memplan/units.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <limits>

#include "memplan/error.hpp"

namespace memplan {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ValidationError("invalid batch \"" + std::string(whole) + "\"");
  return v;
}

}  // namespace

std::int64_t parse_size(std::string_view text) {
  const std::string_view s = trim(text);
  const auto bad = [&](const std::string& why) {
    return ValidationError("invalid size \"" + std::string(text) + "\": " + why);
  };

  std::size_t pos = 0;
  std::int64_t mantissa = 0;
  std::int64_t scale = 1;  // 10^(digits after the point)
  bool any_digit = false;
  bool seen_point = false;
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max() / 10;
  for (; pos < s.size(); ++pos) {
    const char c = s[pos];
    if (c == '.' && !seen_point) {
      seen_point = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) break;
    if (mantissa > kMax || scale > kMax) throw bad("too large");
    mantissa = mantissa * 10 + (c - '0');
    if (seen_point) scale *= 10;
    any_digit = true;
  }
  if (!any_digit) throw bad("no digits");

  const std::string_view unit = trim(s.substr(pos));
  std::int64_t multiplier = 0;
  if (unit.empty() || unit == "B") multiplier = 1;
  else if (unit == "KiB") multiplier = kKiB;
  else if (unit == "MiB") multiplier = kMiB;
  else if (unit == "GiB") multiplier = kGiB;
  else throw bad("unknown unit \"" + std::string(unit) + "\" (use B, KiB, MiB or GiB)");

  if (mantissa > std::numeric_limits<std::int64_t>::max() / multiplier) throw bad("too large");
  const std::int64_t numerator = mantissa * multiplier;
  if (numerator % scale != 0) throw bad("not a whole number of bytes");
  return numerator / scale;
}

BatchRange parse_batch_range(std::string_view text) {
  const std::string_view s = trim(text);
  BatchRange r;
  if (const auto colon = s.find(':'); colon != std::string_view::npos) {
    r.low = parse_int(trim(s.substr(0, colon)), text);
    r.high = parse_int(trim(s.substr(colon + 1)), text);
  } else {
    r.low = r.high = parse_int(s, text);
  }
  if (r.low < 1 || r.high < r.low)
    throw ValidationError("batch range \"" + std::string(text) + "\" must satisfy 1 <= low <= high");
  return r;
}

std::string format_bytes(std::int64_t bytes) {
  char buf[64];
  if (bytes >= kGiB) std::snprintf(buf, sizeof buf, "%.2f GiB", static_cast<double>(bytes) / kGiB);
  else if (bytes >= kMiB) std::snprintf(buf, sizeof buf, "%.2f MiB", static_cast<double>(bytes) / kMiB);
  else if (bytes >= kKiB) std::snprintf(buf, sizeof buf, "%.2f KiB", static_cast<double>(bytes) / kKiB);
  else std::snprintf(buf, sizeof buf, "%lld B", static_cast<long long>(bytes));
  return buf;
}

}  // namespace memplan
