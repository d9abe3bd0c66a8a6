#pragma once

// Layer-specific activation codecs: 4-bit symmetric / asymmetric group
// quantization, outlier-separated quantization, and dropout-mask bit packing.
//
// Tensors are treated as row-major (row = token, column = channel) and, for
// grouping purposes, as one flat array. Codes are 4-bit two's complement,
// two per byte, earlier element in the low nibble.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "memplan/profile.hpp"

namespace memplan::codec {

class ActivationMatrix {
 public:
  // Throws ValidationError on a shape mismatch and NonFiniteInput if any value
  // is NaN or infinite.
  ActivationMatrix(std::uint32_t rows, std::uint32_t cols, std::vector<float> values);

  static ActivationMatrix zeros(std::uint32_t rows, std::uint32_t cols);

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  float at(std::uint32_t r, std::uint32_t c) const noexcept {
    return values_[static_cast<std::size_t>(r) * cols_ + c];
  }
  std::span<const float> values() const noexcept { return values_; }

  bool operator==(const ActivationMatrix&) const = default;

 private:
  std::uint32_t rows_;
  std::uint32_t cols_;
  std::vector<float> values_;
};

enum class Scheme : std::uint8_t {
  SymmetricGroup = 0,
  AsymmetricGroup = 1,
  OutlierSeparated = 2,
  BitMask = 3,
};

std::string_view to_string(Scheme scheme) noexcept;
std::optional<Scheme> parse_scheme(std::string_view name) noexcept;

// group_size value meaning "one group per column".
inline constexpr std::uint32_t kPerChannel = 0;
inline constexpr std::uint32_t kDefaultGroupSize = 128;
inline constexpr double kDefaultZThreshold = 3.0;

struct QuantGroup {
  float scale = 0.0f;
  std::optional<float> offset;  // asymmetric only

  bool operator==(const QuantGroup&) const = default;
};

// Raw channels pulled out before quantization. Values are binary16 bit
// patterns, column-major: all rows of channel_indices[0], then the next.
struct OutlierPack {
  std::vector<std::uint32_t> channel_indices;
  std::vector<std::uint16_t> channel_values;

  bool empty() const noexcept { return channel_indices.empty(); }
  bool operator==(const OutlierPack&) const = default;
};

struct CompressedTensor {
  Scheme scheme = Scheme::SymmetricGroup;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t group_size = kDefaultGroupSize;
  std::vector<QuantGroup> groups;
  // Nibble-packed codes for quantized schemes, LSB-first bits for BitMask.
  std::vector<std::uint8_t> packed;
  OutlierPack outliers;

  std::size_t element_count() const noexcept { return static_cast<std::size_t>(rows) * cols; }
  bool operator==(const CompressedTensor&) const = default;
};

// Scheme plus parameters applied to one layer kind.
struct SchemeChoice {
  Scheme scheme = Scheme::SymmetricGroup;
  std::uint32_t group_size = kDefaultGroupSize;
  double z_threshold = kDefaultZThreshold;

  bool operator==(const SchemeChoice&) const = default;
};

SchemeChoice scheme_for(LayerKind kind) noexcept;

// Number of quantization groups for a shape. group_size == kPerChannel gives
// one group per column.
std::size_t group_count(std::uint32_t rows, std::uint32_t cols, std::uint32_t group_size) noexcept;

std::vector<double> channel_abs_sums(const ActivationMatrix& x);

// Channels whose absolute-sum Z-score exceeds z_threshold, sorted. Uses the
// population standard deviation; returns nothing when all sums are equal.
std::vector<std::uint32_t> detect_outlier_channels(const ActivationMatrix& x,
                                                   double z_threshold = kDefaultZThreshold);

CompressedTensor quantize_symmetric(const ActivationMatrix& x,
                                    std::uint32_t group_size = kDefaultGroupSize);
CompressedTensor quantize_asymmetric(const ActivationMatrix& x,
                                     std::uint32_t group_size = kDefaultGroupSize);

// Throws TooManyOutliers when more than half of the channels are flagged.
CompressedTensor compress_outlier_separated(const ActivationMatrix& x,
                                            double z_threshold = kDefaultZThreshold,
                                            std::uint32_t group_size = kDefaultGroupSize);

// Throws NonBinaryMask if any byte is not 0 or 1.
CompressedTensor pack_bitmask(std::span<const std::uint8_t> mask);
std::vector<std::uint8_t> unpack_bitmask(const CompressedTensor& ct);

// Inverse of the quantized schemes. A BitMask tensor decodes to a 1 x n
// matrix of 0/1 values. Throws CorruptPayload on malformed input.
ActivationMatrix dequantize(const CompressedTensor& ct);

// Dispatches on choice.scheme. BitMask requires every value to be 0 or 1.
CompressedTensor compress(const ActivationMatrix& x, const SchemeChoice& choice);

// Throws CorruptPayload describing the first inconsistency.
void check_well_formed(const CompressedTensor& ct);

// Bytes the compressed data occupies (scales, offsets, codes, outliers),
// excluding the fixed container header.
std::size_t payload_bytes(const CompressedTensor& ct) noexcept;
// Size of the uncompressed source: 2 bytes per FP16 element, 1 per mask byte.
std::size_t original_bytes(const CompressedTensor& ct) noexcept;
double compression_ratio(const CompressedTensor& ct) noexcept;

// Closed-form payload size; payload_bytes(ct) always equals this.
std::size_t expected_payload_bytes(Scheme scheme, std::uint32_t rows, std::uint32_t cols,
                                   std::uint32_t group_size, std::size_t outlier_count) noexcept;

// Compressed / original size for an outlier-separated tensor with the given
// number of outlier channels. Drives CRate updates from outlier counts.
double outlier_separated_rate(std::uint32_t rows, std::uint32_t cols, std::size_t outlier_count,
                              std::uint32_t group_size = kDefaultGroupSize) noexcept;

struct CodecMeasurement {
  double compress_ms = 0.0;
  double decompress_ms = 0.0;
  double ratio = 0.0;
  // compressed / original, ready for OperatorProfile::compression_rate.
  double rate = 0.0;
  std::size_t outlier_count = 0;
};

CodecMeasurement measure_codec(const ActivationMatrix& x, const SchemeChoice& choice,
                               int repeats = 1);

// Container format: "ADC1" header, group scales/offsets, packed payload,
// outlier indices and values. All integers little-endian.
inline constexpr std::size_t kHeaderBytes = 25;
std::vector<std::uint8_t> serialize(const CompressedTensor& ct);
CompressedTensor deserialize(std::span<const std::uint8_t> bytes);

}  // namespace memplan::codec
