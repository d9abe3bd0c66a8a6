#include "memplan/codec.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "memplan/error.hpp"
#include "memplan/half.hpp"
#include "parallel.hpp"

namespace memplan::codec {

namespace {

using Index = std::int64_t;

struct Range {
  Index begin = 0;
  Index end = 0;
  Index stride = 1;
};

// Elements of group g in the flat row-major array. Per-channel groups walk
// one column with stride `cols`, so no transpose is ever materialized.
Range group_range(const CompressedTensor& ct, std::size_t g) {
  const auto n = static_cast<Index>(ct.element_count());
  if (ct.group_size == kPerChannel) return {static_cast<Index>(g), n, static_cast<Index>(ct.cols)};
  const auto gs = static_cast<Index>(ct.group_size);
  const Index begin = static_cast<Index>(g) * gs;
  return {begin, std::min(n, begin + gs), 1};
}

std::int8_t clip_code(double q) {
  return static_cast<std::int8_t>(std::clamp(q, -8.0, 7.0));
}

std::int8_t symmetric_code(float x, float scale) {
  if (scale == 0.0f) return 0;
  return clip_code(std::nearbyint(static_cast<double>(x) / static_cast<double>(scale)));
}

std::int8_t asymmetric_code(float x, float scale, float offset) {
  if (scale == 0.0f) return 0;
  return clip_code(std::nearbyint((static_cast<double>(x) - static_cast<double>(offset)) /
                                  static_cast<double>(scale)));
}

std::vector<std::uint8_t> pack_nibbles(const std::vector<std::int8_t>& codes) {
  const auto bytes = static_cast<Index>((codes.size() + 1) / 2);
  const auto n = static_cast<Index>(codes.size());
  std::vector<std::uint8_t> packed(static_cast<std::size_t>(bytes));
  MEMPLAN_PARALLEL_FOR
  for (Index b = 0; b < bytes; ++b) {
    const Index lo = 2 * b;
    std::uint8_t byte = static_cast<std::uint8_t>(codes[lo]) & 0x0fu;
    if (lo + 1 < n) byte |= static_cast<std::uint8_t>((static_cast<std::uint8_t>(codes[lo + 1]) & 0x0fu) << 4);
    packed[b] = byte;
  }
  return packed;
}

std::int8_t nibble_at(const std::vector<std::uint8_t>& packed, Index e) {
  const std::uint8_t byte = packed[static_cast<std::size_t>(e / 2)];
  const std::uint8_t nib = (e % 2 == 0) ? (byte & 0x0fu) : (byte >> 4);
  return static_cast<std::int8_t>(nib >= 8 ? static_cast<int>(nib) - 16 : static_cast<int>(nib));
}

CompressedTensor make_shell(Scheme scheme, const ActivationMatrix& x, std::uint32_t group_size) {
  CompressedTensor ct;
  ct.scheme = scheme;
  ct.rows = x.rows();
  ct.cols = x.cols();
  ct.group_size = group_size;
  ct.groups.resize(group_count(x.rows(), x.cols(), group_size));
  return ct;
}

CompressedTensor quantize_symmetric_values(std::span<const float> values, CompressedTensor ct) {
  const auto groups = static_cast<Index>(ct.groups.size());
  std::vector<std::int8_t> codes(values.size());
  MEMPLAN_PARALLEL_FOR
  for (Index g = 0; g < groups; ++g) {
    const Range r = group_range(ct, static_cast<std::size_t>(g));
    float amax = 0.0f;
    for (Index e = r.begin; e < r.end; e += r.stride) amax = std::max(amax, std::fabs(values[e]));
    const float scale = amax / 8.0f;
    ct.groups[g].scale = scale;
    for (Index e = r.begin; e < r.end; e += r.stride) codes[e] = symmetric_code(values[e], scale);
  }
  ct.packed = pack_nibbles(codes);
  return ct;
}

CompressedTensor pack_bits(std::span<const std::uint8_t> mask, std::uint32_t rows,
                           std::uint32_t cols) {
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] > 1)
      throw NonBinaryMask("mask byte " + std::to_string(i) + " is " + std::to_string(mask[i]) +
                          ", expected 0 or 1");
  CompressedTensor ct;
  ct.scheme = Scheme::BitMask;
  ct.rows = rows;
  ct.cols = cols;
  ct.group_size = 0;
  const auto n = static_cast<Index>(mask.size());
  const Index bytes = (n + 7) / 8;
  ct.packed.assign(static_cast<std::size_t>(bytes), 0);
  MEMPLAN_PARALLEL_FOR
  for (Index b = 0; b < bytes; ++b) {
    std::uint8_t byte = 0;
    const Index end = std::min<Index>(8, n - 8 * b);
    for (Index bit = 0; bit < end; ++bit) byte |= static_cast<std::uint8_t>(mask[8 * b + bit] << bit);
    ct.packed[b] = byte;
  }
  return ct;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

ActivationMatrix::ActivationMatrix(std::uint32_t rows, std::uint32_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0)
    throw ValidationError("activation matrix needs rows >= 1 and cols >= 1");
  if (values_.size() != static_cast<std::size_t>(rows_) * cols_)
    throw ValidationError("activation matrix has " + std::to_string(values_.size()) +
                          " values for shape " + std::to_string(rows_) + "x" + std::to_string(cols_));
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw NonFiniteInput("non-finite activation at flat index " + std::to_string(i));
}

ActivationMatrix ActivationMatrix::zeros(std::uint32_t rows, std::uint32_t cols) {
  return ActivationMatrix(rows, cols, std::vector<float>(static_cast<std::size_t>(rows) * cols, 0.0f));
}

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::SymmetricGroup: return "symmetric";
    case Scheme::AsymmetricGroup: return "asymmetric";
    case Scheme::OutlierSeparated: return "outlier";
    case Scheme::BitMask: return "bitmask";
  }
  return "symmetric";
}

std::optional<Scheme> parse_scheme(std::string_view name) noexcept {
  for (auto s : {Scheme::SymmetricGroup, Scheme::AsymmetricGroup, Scheme::OutlierSeparated,
                 Scheme::BitMask})
    if (name == to_string(s)) return s;
  return std::nullopt;
}

SchemeChoice scheme_for(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Linear:
    case LayerKind::LayerNorm:
    case LayerKind::Gelu:
      return {Scheme::OutlierSeparated, kDefaultGroupSize, kDefaultZThreshold};
    case LayerKind::QkvMatrix:
      return {Scheme::SymmetricGroup, kPerChannel, kDefaultZThreshold};
    case LayerKind::Softmax:
    case LayerKind::Score:
      return {Scheme::AsymmetricGroup, kDefaultGroupSize, kDefaultZThreshold};
    case LayerKind::DropoutMask:
      return {Scheme::BitMask, 0, kDefaultZThreshold};
    case LayerKind::Other:
      break;
  }
  return {Scheme::SymmetricGroup, kDefaultGroupSize, kDefaultZThreshold};
}

std::size_t group_count(std::uint32_t rows, std::uint32_t cols, std::uint32_t group_size) noexcept {
  if (group_size == kPerChannel) return cols;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  return (n + group_size - 1) / group_size;
}

std::vector<double> channel_abs_sums(const ActivationMatrix& x) {
  // Column blocks keep each thread on contiguous row segments while every
  // column is still summed in row order, matching the serial result exactly.
  constexpr Index kBlock = 64;
  const Index cols = x.cols();
  const Index rows = x.rows();
  const Index blocks = (cols + kBlock - 1) / kBlock;
  const auto v = x.values();
  std::vector<double> sums(static_cast<std::size_t>(cols), 0.0);
  MEMPLAN_PARALLEL_FOR
  for (Index b = 0; b < blocks; ++b) {
    const Index c0 = b * kBlock;
    const Index c1 = std::min(cols, c0 + kBlock);
    for (Index r = 0; r < rows; ++r) {
      const float* row = v.data() + r * cols;
      for (Index c = c0; c < c1; ++c) sums[c] += std::fabs(static_cast<double>(row[c]));
    }
  }
  return sums;
}

std::vector<std::uint32_t> detect_outlier_channels(const ActivationMatrix& x, double z_threshold) {
  if (!(z_threshold > 0.0)) throw ValidationError("z_threshold must be > 0");
  const auto sums = channel_abs_sums(x);
  const auto [lo, hi] = std::minmax_element(sums.begin(), sums.end());
  if (*lo == *hi) return {};

  const double n = static_cast<double>(sums.size());
  const double mean = std::accumulate(sums.begin(), sums.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : sums) ss += (s - mean) * (s - mean);
  const double sigma = std::sqrt(ss / n);
  if (sigma == 0.0) return {};

  std::vector<std::uint32_t> flagged;
  for (std::size_t i = 0; i < sums.size(); ++i)
    if ((sums[i] - mean) / sigma > z_threshold) flagged.push_back(static_cast<std::uint32_t>(i));
  return flagged;
}

CompressedTensor quantize_symmetric(const ActivationMatrix& x, std::uint32_t group_size) {
  return quantize_symmetric_values(x.values(), make_shell(Scheme::SymmetricGroup, x, group_size));
}

CompressedTensor quantize_asymmetric(const ActivationMatrix& x, std::uint32_t group_size) {
  CompressedTensor ct = make_shell(Scheme::AsymmetricGroup, x, group_size);
  const auto values = x.values();
  const auto groups = static_cast<Index>(ct.groups.size());
  std::vector<std::int8_t> codes(values.size());
  MEMPLAN_PARALLEL_FOR
  for (Index g = 0; g < groups; ++g) {
    const Range r = group_range(ct, static_cast<std::size_t>(g));
    float mn = std::numeric_limits<float>::infinity();
    float mx = -std::numeric_limits<float>::infinity();
    for (Index e = r.begin; e < r.end; e += r.stride) {
      mn = std::min(mn, values[e]);
      mx = std::max(mx, values[e]);
    }
    const auto offset = static_cast<float>((static_cast<double>(mx) + mn) / 2.0);
    const auto scale = static_cast<float>((static_cast<double>(mx) - mn) / 16.0);
    ct.groups[g] = {scale, offset};
    for (Index e = r.begin; e < r.end; e += r.stride) codes[e] = asymmetric_code(values[e], scale, offset);
  }
  ct.packed = pack_nibbles(codes);
  return ct;
}

CompressedTensor compress_outlier_separated(const ActivationMatrix& x, double z_threshold,
                                            std::uint32_t group_size) {
  const auto flagged = detect_outlier_channels(x, z_threshold);
  if (2 * flagged.size() > x.cols()) throw TooManyOutliers(flagged.size(), x.cols());

  const Index rows = x.rows();
  const Index cols = x.cols();
  std::vector<float> working(x.values().begin(), x.values().end());
  OutlierPack pack;
  pack.channel_indices = flagged;
  pack.channel_values.resize(flagged.size() * static_cast<std::size_t>(rows));
  const auto k = static_cast<Index>(flagged.size());
  MEMPLAN_PARALLEL_FOR
  for (Index j = 0; j < k; ++j) {
    const Index c = flagged[j];
    for (Index r = 0; r < rows; ++r) {
      float& v = working[r * cols + c];
      pack.channel_values[j * rows + r] = float_to_half(v);
      v = 0.0f;
    }
  }
  for (std::size_t j = 0; j < pack.channel_values.size(); ++j)
    if ((pack.channel_values[j] & 0x7c00u) == 0x7c00u)
      throw NonFiniteInput("outlier value exceeds the binary16 range in channel " +
                           std::to_string(flagged[j / rows]));

  CompressedTensor ct = quantize_symmetric_values(working, make_shell(Scheme::OutlierSeparated, x, group_size));
  ct.outliers = std::move(pack);
  return ct;
}

CompressedTensor pack_bitmask(std::span<const std::uint8_t> mask) {
  return pack_bits(mask, 1, static_cast<std::uint32_t>(mask.size()));
}

std::vector<std::uint8_t> unpack_bitmask(const CompressedTensor& ct) {
  if (ct.scheme != Scheme::BitMask) throw CorruptPayload("unpack_bitmask needs a BitMask tensor");
  check_well_formed(ct);
  const auto n = static_cast<Index>(ct.element_count());
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n));
  MEMPLAN_PARALLEL_FOR
  for (Index i = 0; i < n; ++i) mask[i] = (ct.packed[i / 8] >> (i % 8)) & 1u;
  return mask;
}

ActivationMatrix dequantize(const CompressedTensor& ct) {
  check_well_formed(ct);
  if (ct.scheme == Scheme::BitMask) {
    const auto bits = unpack_bitmask(ct);
    return ActivationMatrix(ct.rows, ct.cols, std::vector<float>(bits.begin(), bits.end()));
  }

  std::vector<float> out(ct.element_count());
  const auto groups = static_cast<Index>(ct.groups.size());
  MEMPLAN_PARALLEL_FOR
  for (Index g = 0; g < groups; ++g) {
    const Range r = group_range(ct, static_cast<std::size_t>(g));
    const double scale = ct.groups[g].scale;
    const double offset = ct.groups[g].offset.value_or(0.0f);
    for (Index e = r.begin; e < r.end; e += r.stride)
      out[e] = static_cast<float>(nibble_at(ct.packed, e) * scale + offset);
  }

  const Index rows = ct.rows;
  const Index cols = ct.cols;
  const auto k = static_cast<Index>(ct.outliers.channel_indices.size());
  for (Index j = 0; j < k; ++j) {
    const Index c = ct.outliers.channel_indices[j];
    for (Index r = 0; r < rows; ++r) out[r * cols + c] = half_to_float(ct.outliers.channel_values[j * rows + r]);
  }
  return ActivationMatrix(ct.rows, ct.cols, std::move(out));
}

CompressedTensor compress(const ActivationMatrix& x, const SchemeChoice& choice) {
  switch (choice.scheme) {
    case Scheme::SymmetricGroup: return quantize_symmetric(x, choice.group_size);
    case Scheme::AsymmetricGroup: return quantize_asymmetric(x, choice.group_size);
    case Scheme::OutlierSeparated:
      return compress_outlier_separated(x, choice.z_threshold, choice.group_size);
    case Scheme::BitMask: {
      std::vector<std::uint8_t> mask(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const float v = x.values()[i];
        if (v != 0.0f && v != 1.0f)
          throw NonBinaryMask("value at flat index " + std::to_string(i) + " is not 0 or 1");
        mask[i] = v == 1.0f ? 1 : 0;
      }
      return pack_bits(mask, x.rows(), x.cols());
    }
  }
  throw ValidationError("unknown scheme");
}

void check_well_formed(const CompressedTensor& ct) {
  const std::size_t n = ct.element_count();
  if (ct.scheme == Scheme::BitMask) {
    if (!ct.groups.empty() || !ct.outliers.empty())
      throw CorruptPayload("bitmask tensor carries quantization groups or outliers");
    if (ct.packed.size() != (n + 7) / 8)
      throw CorruptPayload("bitmask payload has " + std::to_string(ct.packed.size()) +
                           " bytes, expected " + std::to_string((n + 7) / 8));
    if (n % 8 != 0 && (ct.packed.back() >> (n % 8)) != 0)
      throw CorruptPayload("bitmask padding bits are not zero");
    return;
  }

  if (ct.scheme != Scheme::SymmetricGroup && ct.scheme != Scheme::AsymmetricGroup &&
      ct.scheme != Scheme::OutlierSeparated)
    throw CorruptPayload("unknown scheme tag " + std::to_string(static_cast<int>(ct.scheme)));
  if (ct.rows == 0 || ct.cols == 0) throw CorruptPayload("quantized tensor has an empty shape");
  const std::size_t expected_groups = group_count(ct.rows, ct.cols, ct.group_size);
  if (ct.groups.size() != expected_groups)
    throw CorruptPayload("group count " + std::to_string(ct.groups.size()) + " does not match shape (expected " +
                         std::to_string(expected_groups) + ")");
  const bool asym = ct.scheme == Scheme::AsymmetricGroup;
  for (std::size_t g = 0; g < ct.groups.size(); ++g) {
    const auto& grp = ct.groups[g];
    if (!std::isfinite(grp.scale) || grp.scale < 0.0f)
      throw CorruptPayload("group " + std::to_string(g) + " has an invalid scale");
    if (grp.offset.has_value() != asym)
      throw CorruptPayload("group " + std::to_string(g) + " offset presence does not match scheme");
    if (grp.offset && !std::isfinite(*grp.offset))
      throw CorruptPayload("group " + std::to_string(g) + " has a non-finite offset");
  }
  if (ct.packed.size() != (n + 1) / 2)
    throw CorruptPayload("code payload has " + std::to_string(ct.packed.size()) + " bytes, expected " +
                         std::to_string((n + 1) / 2));
  if (n % 2 == 1 && (ct.packed.back() >> 4) != 0)
    throw CorruptPayload("code padding nibble is not zero");

  const auto& idx = ct.outliers.channel_indices;
  if (ct.scheme != Scheme::OutlierSeparated && !ct.outliers.empty())
    throw CorruptPayload("outlier channels present on a non outlier-separated tensor");
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= ct.cols) throw CorruptPayload("outlier channel index out of range");
    if (j > 0 && idx[j] <= idx[j - 1]) throw CorruptPayload("outlier channel indices not strictly increasing");
  }
  if (ct.outliers.channel_values.size() != idx.size() * ct.rows)
    throw CorruptPayload("outlier value count does not match indices x rows");
  for (auto h : ct.outliers.channel_values)
    if ((h & 0x7c00u) == 0x7c00u) throw CorruptPayload("non-finite outlier value");
}

std::size_t expected_payload_bytes(Scheme scheme, std::uint32_t rows, std::uint32_t cols,
                                   std::uint32_t group_size, std::size_t outlier_count) noexcept {
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  switch (scheme) {
    case Scheme::BitMask: return (n + 7) / 8;
    case Scheme::SymmetricGroup: return 4 * group_count(rows, cols, group_size) + (n + 1) / 2;
    case Scheme::AsymmetricGroup: return 8 * group_count(rows, cols, group_size) + (n + 1) / 2;
    case Scheme::OutlierSeparated:
      return 4 * group_count(rows, cols, group_size) + (n + 1) / 2 + 4 * outlier_count +
             2 * static_cast<std::size_t>(rows) * outlier_count;
  }
  return 0;
}

std::size_t payload_bytes(const CompressedTensor& ct) noexcept {
  std::size_t bytes = ct.packed.size();
  for (const auto& g : ct.groups) bytes += g.offset ? 8 : 4;
  bytes += 4 * ct.outliers.channel_indices.size() + 2 * ct.outliers.channel_values.size();
  return bytes;
}

std::size_t original_bytes(const CompressedTensor& ct) noexcept {
  return ct.scheme == Scheme::BitMask ? ct.element_count() : 2 * ct.element_count();
}

double compression_ratio(const CompressedTensor& ct) noexcept {
  const auto payload = payload_bytes(ct);
  return payload == 0 ? 1.0 : static_cast<double>(original_bytes(ct)) / static_cast<double>(payload);
}

double outlier_separated_rate(std::uint32_t rows, std::uint32_t cols, std::size_t outlier_count,
                              std::uint32_t group_size) noexcept {
  const double original = 2.0 * static_cast<double>(rows) * cols;
  return static_cast<double>(expected_payload_bytes(Scheme::OutlierSeparated, rows, cols, group_size,
                                                    outlier_count)) /
         original;
}

CodecMeasurement measure_codec(const ActivationMatrix& x, const SchemeChoice& choice, int repeats) {
  repeats = std::max(1, repeats);
  CodecMeasurement m;
  m.compress_ms = std::numeric_limits<double>::infinity();
  m.decompress_ms = std::numeric_limits<double>::infinity();
  for (int i = 0; i < repeats; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    CompressedTensor ct = compress(x, choice);
    m.compress_ms = std::min(m.compress_ms, elapsed_ms(t0));

    t0 = std::chrono::steady_clock::now();
    if (ct.scheme == Scheme::BitMask) {
      auto bits = unpack_bitmask(ct);
      (void)bits;
    } else {
      auto restored = dequantize(ct);
      (void)restored;
    }
    m.decompress_ms = std::min(m.decompress_ms, elapsed_ms(t0));

    m.ratio = compression_ratio(ct);
    m.rate = static_cast<double>(payload_bytes(ct)) / static_cast<double>(original_bytes(ct));
    m.outlier_count = ct.outliers.channel_indices.size();
  }
  return m;
}

}  // namespace memplan::codec
