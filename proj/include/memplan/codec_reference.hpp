#pragma once

// Serial, element-at-a-time versions of the codec kernels. Tests compare the
// parallel kernels against these bit for bit; the benchmark times both.

#include <cstdint>
#include <span>
#include <vector>

#include "memplan/codec.hpp"

namespace memplan::codec::reference {

std::vector<double> channel_abs_sums(const ActivationMatrix& x);
CompressedTensor quantize_symmetric(const ActivationMatrix& x, std::uint32_t group_size);
CompressedTensor quantize_asymmetric(const ActivationMatrix& x, std::uint32_t group_size);
ActivationMatrix dequantize(const CompressedTensor& ct);
CompressedTensor pack_bitmask(std::span<const std::uint8_t> mask);
std::vector<std::uint8_t> unpack_bitmask(const CompressedTensor& ct);

}  // namespace memplan::codec::reference
