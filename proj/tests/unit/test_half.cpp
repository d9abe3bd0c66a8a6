#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "memplan/half.hpp"

using namespace memplan;

namespace {

// binary16 value from its fields, computed in double.
double decode_fields(std::uint16_t h) {
  const int sign = (h >> 15) ? -1 : 1;
  const int exp = (h >> 10) & 0x1f;
  const int mant = h & 0x3ff;
  if (exp == 0) return sign * std::ldexp(mant, -24);
  if (exp == 31) return mant == 0 ? sign * INFINITY : NAN;
  return sign * std::ldexp(1024 + mant, exp - 25);
}

// Nearest finite binary16 by search over the sorted non-negative values,
// ties to the even pattern; anything at or beyond 65520 becomes infinity.
std::uint16_t nearest_half(float f) {
  static const std::vector<double> table = [] {
    std::vector<double> t;
    for (std::uint32_t h = 0; h < 0x7c00; ++h) t.push_back(decode_fields(static_cast<std::uint16_t>(h)));
    return t;
  }();
  const std::uint16_t sign = std::signbit(f) ? 0x8000 : 0;
  const double a = std::fabs(static_cast<double>(f));
  if (a >= 65520.0) return sign | 0x7c00;
  const auto it = std::lower_bound(table.begin(), table.end(), a);
  auto hi = static_cast<std::uint16_t>(it - table.begin());
  if (hi == 0) return sign;
  const auto lo = static_cast<std::uint16_t>(hi - 1);
  const double dlo = a - table[lo];
  const double dhi = table[hi] - a;
  if (dlo < dhi) return sign | lo;
  if (dhi < dlo) return sign | hi;
  return sign | ((lo & 1) ? hi : lo);
}

}  // namespace

TEST_CASE("every binary16 pattern decodes to its field value") {
  for (std::uint32_t h = 0; h <= 0xffff; ++h) {
    const auto bits = static_cast<std::uint16_t>(h);
    const double expected = decode_fields(bits);
    const float got = half_to_float(bits);
    if (std::isnan(expected)) {
      CHECK(std::isnan(got));
    } else {
      REQUIRE(static_cast<double>(got) == expected);
      CHECK(std::signbit(got) == static_cast<bool>(h & 0x8000));
    }
  }
}

TEST_CASE("encoding every finite half value is the identity") {
  for (std::uint32_t h = 0; h <= 0xffff; ++h) {
    if (((h >> 10) & 0x1f) == 0x1f) continue;
    const auto bits = static_cast<std::uint16_t>(h);
    REQUIRE(float_to_half(half_to_float(bits)) == bits);
  }
}

TEST_CASE("narrowing rounds to nearest, ties to even") {
  // Midpoints between neighbours are the tie cases.
  for (std::uint32_t h = 0; h < 0x7bff; h += 7) {
    const double a = decode_fields(static_cast<std::uint16_t>(h));
    const double b = decode_fields(static_cast<std::uint16_t>(h + 1));
    const auto mid = static_cast<float>((a + b) / 2);
    if (static_cast<double>(mid) != (a + b) / 2) continue;  // not representable as float
    REQUIRE(float_to_half(mid) == nearest_half(mid));
  }
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200000; ++i) {
    const auto bits = static_cast<std::uint32_t>(rng());
    const float f = std::bit_cast<float>(bits);
    if (std::isnan(f)) continue;
    const std::uint16_t expected = std::isinf(f) ? static_cast<std::uint16_t>((std::signbit(f) ? 0x8000 : 0) | 0x7c00)
                                                 : nearest_half(f);
    REQUIRE(float_to_half(f) == expected);
  }
  // Values within range of the half grid.
  for (int i = 0; i < 200000; ++i) {
    const float f = static_cast<float>(std::ldexp(static_cast<double>(rng() >> 11) * 0x1.0p-53, static_cast<int>(rng() % 44) - 28));
    REQUIRE(float_to_half(f) == nearest_half(f));
    REQUIRE(float_to_half(-f) == nearest_half(-f));
  }
}

TEST_CASE("overflow saturates and NaN stays NaN") {
  CHECK(float_to_half(65504.0f) == 0x7bff);
  CHECK(float_to_half(65519.0f) == 0x7bff);
  CHECK(float_to_half(65520.0f) == 0x7c00);
  CHECK(float_to_half(-1e9f) == 0xfc00);
  CHECK(std::isnan(half_to_float(float_to_half(NAN))));
  CHECK(round_to_half(1.0f / 3.0f) == half_to_float(0x3555));
}
