#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace memplan {

inline constexpr std::int64_t kKiB = 1024;
inline constexpr std::int64_t kMiB = 1024 * kKiB;
inline constexpr std::int64_t kGiB = 1024 * kMiB;

// "4096", "512B", "40MiB", "10.5MiB", "1.5 GiB". The value must come out to
// a whole number of bytes; anything else throws ValidationError.
std::int64_t parse_size(std::string_view text);

struct BatchRange {
  int low = 1;
  int high = 1;
};

// "8" or "1:16". Throws ValidationError unless 1 <= low <= high.
BatchRange parse_batch_range(std::string_view text);

std::string format_bytes(std::int64_t bytes);

}  // namespace memplan
