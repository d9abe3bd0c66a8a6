#pragma once

// Generators and independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "memplan/codec.hpp"
#include "memplan/half.hpp"

namespace memplan::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline std::uint32_t uniform_u32(std::mt19937_64& rng, std::uint32_t lo, std::uint32_t hi) {
  return lo + static_cast<std::uint32_t>(rng() % (hi - lo + 1));
}

// Gaussian activations rounded to FP16, with `loud` randomly placed channels
// scaled by `gain`.
inline codec::ActivationMatrix random_activations(std::mt19937_64& rng, std::uint32_t rows, std::uint32_t cols,
                                                  std::uint32_t loud = 0, double gain = 40.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> col_gain(cols, 1.0);
  std::vector<std::uint32_t> idx(cols);
  for (std::uint32_t i = 0; i < cols; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::uint32_t i = 0; i < std::min(loud, cols); ++i) col_gain[idx[i]] = gain;
  std::vector<float> v(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c)
      v[static_cast<std::size_t>(r) * cols + c] = round_to_half(static_cast<float>(normal(rng) * col_gain[c]));
  return {rows, cols, std::move(v)};
}

// Values in (0, 1), like softmax outputs.
inline codec::ActivationMatrix random_probabilities(std::mt19937_64& rng, std::uint32_t rows, std::uint32_t cols) {
  std::vector<float> v(static_cast<std::size_t>(rows) * cols);
  for (auto& x : v) x = round_to_half(static_cast<float>(uniform(rng, 1e-4, 1.0)));
  return {rows, cols, std::move(v)};
}

inline std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::uint8_t> m(n);
  for (auto& b : m) b = static_cast<std::uint8_t>(rng() & 1u);
  return m;
}

// Straight from the definition: per-channel absolute sums, their mean and
// population deviation, and every channel whose score exceeds the threshold.
inline std::vector<std::uint32_t> zscore_oracle(const codec::ActivationMatrix& x, double threshold) {
  const std::uint32_t cols = x.cols();
  std::vector<double> s(cols, 0.0);
  for (std::uint32_t c = 0; c < cols; ++c)
    for (std::uint32_t r = 0; r < x.rows(); ++r) s[c] += std::fabs(static_cast<double>(x.at(r, c)));
  double total = 0.0;
  for (std::uint32_t c = 0; c < cols; ++c) total += s[c];
  const double mu = total / cols;
  double var = 0.0;
  for (std::uint32_t c = 0; c < cols; ++c) var += (s[c] - mu) * (s[c] - mu);
  const double sigma = std::sqrt(var / cols);
  std::vector<std::uint32_t> out;
  if (sigma == 0.0) return out;
  for (std::uint32_t c = 0; c < cols; ++c)
    if ((s[c] - mu) / sigma > threshold) out.push_back(c);
  return out;
}

// Group of flat element i for a tensor's layout.
inline std::size_t group_of(const codec::CompressedTensor& ct, std::size_t i) {
  if (ct.group_size == codec::kPerChannel) return i % ct.cols;
  return i / ct.group_size;
}

}  // namespace memplan::testing
