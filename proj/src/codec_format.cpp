#include <bit>
#include <cstring>
#include <string>

#include "memplan/codec.hpp"
#include "memplan/error.hpp"

namespace memplan::codec {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'C', '1'};

class Writer {
 public:
  explicit Writer(std::size_t reserve) { bytes_.reserve(reserve); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<std::uint8_t> raw(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptPayload("truncated compressed tensor");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const CompressedTensor& ct) {
  check_well_formed(ct);
  Writer w(kHeaderBytes + payload_bytes(ct));
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(static_cast<std::uint8_t>(ct.scheme));
  w.u32(ct.rows);
  w.u32(ct.cols);
  w.u32(ct.group_size);
  w.u32(static_cast<std::uint32_t>(ct.groups.size()));
  w.u32(static_cast<std::uint32_t>(ct.outliers.channel_indices.size()));
  for (const auto& g : ct.groups) {
    w.f32(g.scale);
    if (g.offset) w.f32(*g.offset);
  }
  w.raw(ct.packed);
  for (auto idx : ct.outliers.channel_indices) w.u32(idx);
  for (auto h : ct.outliers.channel_values) w.u16(h);
  return w.take();
}

CompressedTensor deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  for (char c : kMagic)
    if (r.u8() != static_cast<std::uint8_t>(c)) throw CorruptPayload("bad magic, expected ADC1");

  CompressedTensor ct;
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Scheme::BitMask))
    throw CorruptPayload("unknown scheme tag " + std::to_string(tag));
  ct.scheme = static_cast<Scheme>(tag);
  ct.rows = r.u32();
  ct.cols = r.u32();
  ct.group_size = r.u32();
  const std::uint32_t groups = r.u32();
  const std::uint32_t outliers = r.u32();

  const std::size_t n = ct.element_count();
  const bool bitmask = ct.scheme == Scheme::BitMask;
  if (!bitmask && groups != group_count(ct.rows, ct.cols, ct.group_size))
    throw CorruptPayload("header group_count does not match shape");
  if (bitmask && (groups != 0 || outliers != 0))
    throw CorruptPayload("bitmask header declares groups or outliers");
  if (outliers > ct.cols) throw CorruptPayload("more outlier channels than columns");

  // Reject before allocating anything sized from the header.
  const std::size_t expected = expected_payload_bytes(ct.scheme, ct.rows, ct.cols, ct.group_size, outliers);
  if (r.remaining() != expected)
    throw CorruptPayload("payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                         std::to_string(expected));

  const bool asym = ct.scheme == Scheme::AsymmetricGroup;
  ct.groups.reserve(groups);
  for (std::uint32_t g = 0; g < groups; ++g) {
    QuantGroup q;
    q.scale = r.f32();
    if (asym) q.offset = r.f32();
    ct.groups.push_back(q);
  }
  ct.packed = r.raw(bitmask ? (n + 7) / 8 : (n + 1) / 2);
  ct.outliers.channel_indices.reserve(outliers);
  for (std::uint32_t j = 0; j < outliers; ++j) ct.outliers.channel_indices.push_back(r.u32());
  const std::size_t values = static_cast<std::size_t>(outliers) * ct.rows;
  ct.outliers.channel_values.reserve(values);
  for (std::size_t j = 0; j < values; ++j) ct.outliers.channel_values.push_back(r.u16());

  check_well_formed(ct);
  return ct;
}

}  // namespace memplan::codec
