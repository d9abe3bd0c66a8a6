#include <doctest.h>

#include <cstring>
#include <random>

#include "memplan/codec.hpp"
#include "memplan/error.hpp"
#include "support.hpp"

using namespace memplan;
using namespace memplan::codec;

namespace {

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return std::uint32_t{b[at]} | std::uint32_t{b[at + 1]} << 8 | std::uint32_t{b[at + 2]} << 16 |
         std::uint32_t{b[at + 3]} << 24;
}

std::vector<CompressedTensor> samples() {
  std::mt19937_64 rng(17);
  const auto x = memplan::testing::random_activations(rng, 24, 40, 1, 80.0);
  return {
      quantize_symmetric(x, 128),
      quantize_symmetric(x, kPerChannel),
      quantize_asymmetric(x, 7),
      compress_outlier_separated(x),
      pack_bitmask(memplan::testing::random_mask(rng, 77)),
  };
}

}  // namespace

TEST_CASE("header layout") {
  const auto ct = quantize_asymmetric(ActivationMatrix(1, 3, {1, 2, 3}), 128);
  const auto bytes = serialize(ct);
  REQUIRE(bytes.size() == kHeaderBytes + 8 + 2);
  CHECK(std::memcmp(bytes.data(), "ADC1", 4) == 0);
  CHECK(bytes[4] == 1);              // asymmetric
  CHECK(read_u32(bytes, 5) == 1);    // rows
  CHECK(read_u32(bytes, 9) == 3);    // cols
  CHECK(read_u32(bytes, 13) == 128); // group size
  CHECK(read_u32(bytes, 17) == 1);   // groups
  CHECK(read_u32(bytes, 21) == 0);   // outliers
  float scale, offset;
  std::memcpy(&scale, &bytes[25], 4);
  std::memcpy(&offset, &bytes[29], 4);
  CHECK(scale == 0.125f);
  CHECK(offset == 2.0f);
  // codes -8, 0, 7 -> 0x08, 0x07 (second byte holds code 7 in its low nibble)
  CHECK(bytes[33] == 0x08);
  CHECK(bytes[34] == 0x07);
}

TEST_CASE("serialization round trips every scheme") {
  for (const auto& ct : samples()) {
    const auto bytes = serialize(ct);
    CHECK(bytes.size() == kHeaderBytes + payload_bytes(ct));
    CHECK(deserialize(bytes) == ct);
  }
}

TEST_CASE("outlier values are stored column by column as FP16") {
  std::mt19937_64 rng(3);
  const auto x = memplan::testing::random_activations(rng, 16, 64, 1, 100.0);
  const auto ct = compress_outlier_separated(x);
  REQUIRE(ct.outliers.channel_indices.size() == 1);
  const auto col = ct.outliers.channel_indices[0];
  const auto bytes = serialize(ct);
  const std::size_t values_at = bytes.size() - 2 * 16;
  CHECK(read_u32(bytes, values_at - 4) == col);
  for (std::uint32_t r = 0; r < 16; ++r) {
    const std::uint16_t h = static_cast<std::uint16_t>(bytes[values_at + 2 * r] | bytes[values_at + 2 * r + 1] << 8);
    CHECK(half_to_float(h) == x.at(r, col));
  }
}

TEST_CASE("corrupt containers are rejected") {
  for (const auto& ct : samples()) {
    const auto good = serialize(ct);

    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, kHeaderBytes - 1, good.size() - 1})
      CHECK_THROWS_AS(deserialize(std::span(good.data(), cut)), CorruptPayload);

    auto extra = good;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize(extra), CorruptPayload);

    auto magic = good;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize(magic), CorruptPayload);

    auto tag = good;
    tag[4] = 9;
    CHECK_THROWS_AS(deserialize(tag), CorruptPayload);

    auto groups = good;
    groups[17] ^= 0x01;
    CHECK_THROWS_AS(deserialize(groups), CorruptPayload);

    // An absurd shape must fail on size, not by allocating.
    auto huge = good;
    huge[5] = huge[6] = huge[7] = huge[8] = 0xff;
    CHECK_THROWS_AS(deserialize(huge), CorruptPayload);
  }
}

TEST_CASE("outlier indices must be sorted and in range") {
  std::mt19937_64 rng(5);
  const auto x = memplan::testing::random_activations(rng, 8, 64, 2, 100.0);
  auto ct = compress_outlier_separated(x);
  REQUIRE(ct.outliers.channel_indices.size() == 2);
  auto swapped = ct;
  std::swap(swapped.outliers.channel_indices[0], swapped.outliers.channel_indices[1]);
  CHECK_THROWS_AS(deserialize(serialize(swapped)), CorruptPayload);
  auto out_of_range = ct;
  out_of_range.outliers.channel_indices[1] = 64;
  CHECK_THROWS_AS(deserialize(serialize(out_of_range)), CorruptPayload);
}
