#include "memplan/codec_reference.hpp"

#include <algorithm>
#include <cmath>

#include "memplan/error.hpp"
#include "memplan/half.hpp"

namespace memplan::codec::reference {

namespace {

// Flat indices belonging to group g.
std::vector<std::size_t> members(std::uint32_t rows, std::uint32_t cols, std::uint32_t group_size,
                                 std::size_t g) {
  std::vector<std::size_t> out;
  if (group_size == kPerChannel) {
    for (std::uint32_t r = 0; r < rows; ++r) out.push_back(static_cast<std::size_t>(r) * cols + g);
  } else {
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    for (std::size_t e = g * group_size; e < std::min(n, (g + 1) * group_size); ++e) out.push_back(e);
  }
  return out;
}

void put_code(std::vector<std::uint8_t>& packed, std::size_t e, int code) {
  const auto nib = static_cast<std::uint8_t>(code & 0xf);
  if (e % 2 == 0)
    packed[e / 2] = static_cast<std::uint8_t>((packed[e / 2] & 0xf0u) | nib);
  else
    packed[e / 2] = static_cast<std::uint8_t>((packed[e / 2] & 0x0fu) | (nib << 4));
}

int get_code(const std::vector<std::uint8_t>& packed, std::size_t e) {
  int nib = (e % 2 == 0) ? (packed[e / 2] & 0xf) : (packed[e / 2] >> 4);
  return nib > 7 ? nib - 16 : nib;
}

int round_clip(double q) {
  const double r = std::nearbyint(q);
  return static_cast<int>(std::min(7.0, std::max(-8.0, r)));
}

}  // namespace

std::vector<double> channel_abs_sums(const ActivationMatrix& x) {
  std::vector<double> sums(x.cols(), 0.0);
  for (std::uint32_t r = 0; r < x.rows(); ++r)
    for (std::uint32_t c = 0; c < x.cols(); ++c) sums[c] += std::fabs(static_cast<double>(x.at(r, c)));
  return sums;
}

CompressedTensor quantize_symmetric(const ActivationMatrix& x, std::uint32_t group_size) {
  CompressedTensor ct;
  ct.scheme = Scheme::SymmetricGroup;
  ct.rows = x.rows();
  ct.cols = x.cols();
  ct.group_size = group_size;
  ct.packed.assign((x.size() + 1) / 2, 0);
  const auto v = x.values();
  for (std::size_t g = 0; g < group_count(x.rows(), x.cols(), group_size); ++g) {
    const auto idx = members(x.rows(), x.cols(), group_size, g);
    float amax = 0.0f;
    for (auto e : idx) amax = std::max(amax, std::fabs(v[e]));
    const float scale = amax / 8.0f;
    ct.groups.push_back({scale, std::nullopt});
    for (auto e : idx) {
      const int code = scale == 0.0f ? 0 : round_clip(static_cast<double>(v[e]) / scale);
      put_code(ct.packed, e, code);
    }
  }
  return ct;
}

CompressedTensor quantize_asymmetric(const ActivationMatrix& x, std::uint32_t group_size) {
  CompressedTensor ct;
  ct.scheme = Scheme::AsymmetricGroup;
  ct.rows = x.rows();
  ct.cols = x.cols();
  ct.group_size = group_size;
  ct.packed.assign((x.size() + 1) / 2, 0);
  const auto v = x.values();
  for (std::size_t g = 0; g < group_count(x.rows(), x.cols(), group_size); ++g) {
    const auto idx = members(x.rows(), x.cols(), group_size, g);
    float mn = v[idx.front()];
    float mx = v[idx.front()];
    for (auto e : idx) {
      mn = std::min(mn, v[e]);
      mx = std::max(mx, v[e]);
    }
    const auto offset = static_cast<float>((static_cast<double>(mx) + static_cast<double>(mn)) / 2.0);
    const auto scale = static_cast<float>((static_cast<double>(mx) - static_cast<double>(mn)) / 16.0);
    ct.groups.push_back({scale, offset});
    for (auto e : idx) {
      const int code = scale == 0.0f
                           ? 0
                           : round_clip((static_cast<double>(v[e]) - static_cast<double>(offset)) / scale);
      put_code(ct.packed, e, code);
    }
  }
  return ct;
}

ActivationMatrix dequantize(const CompressedTensor& ct) {
  check_well_formed(ct);
  std::vector<float> out(ct.element_count(), 0.0f);
  if (ct.scheme == Scheme::BitMask) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>((ct.packed[i / 8] >> (i % 8)) & 1);
    return ActivationMatrix(ct.rows, ct.cols, std::move(out));
  }
  for (std::size_t g = 0; g < ct.groups.size(); ++g) {
    const double scale = ct.groups[g].scale;
    const double offset = ct.groups[g].offset ? *ct.groups[g].offset : 0.0;
    for (auto e : members(ct.rows, ct.cols, ct.group_size, g))
      out[e] = static_cast<float>(get_code(ct.packed, e) * scale + offset);
  }
  for (std::size_t j = 0; j < ct.outliers.channel_indices.size(); ++j) {
    const std::uint32_t c = ct.outliers.channel_indices[j];
    for (std::uint32_t r = 0; r < ct.rows; ++r)
      out[static_cast<std::size_t>(r) * ct.cols + c] = half_to_float(ct.outliers.channel_values[j * ct.rows + r]);
  }
  return ActivationMatrix(ct.rows, ct.cols, std::move(out));
}

CompressedTensor pack_bitmask(std::span<const std::uint8_t> mask) {
  CompressedTensor ct;
  ct.scheme = Scheme::BitMask;
  ct.rows = 1;
  ct.cols = static_cast<std::uint32_t>(mask.size());
  ct.group_size = 0;
  ct.packed.assign((mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 1) throw NonBinaryMask("mask byte is not 0 or 1");
    if (mask[i]) ct.packed[i / 8] = static_cast<std::uint8_t>(ct.packed[i / 8] | (1u << (i % 8)));
  }
  return ct;
}

std::vector<std::uint8_t> unpack_bitmask(const CompressedTensor& ct) {
  check_well_formed(ct);
  std::vector<std::uint8_t> out(ct.element_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (ct.packed[i / 8] >> (i % 8)) & 1;
  return out;
}

}  // namespace memplan::codec::reference
