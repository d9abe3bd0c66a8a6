// Serial reference kernels against the OpenMP ones on square FP16 tensors.

#include <benchmark/benchmark.h>

#include <random>

#include "memplan/codec.hpp"
#include "memplan/codec_reference.hpp"
#include "memplan/half.hpp"

using namespace memplan;
using namespace memplan::codec;

namespace {

ActivationMatrix activations(std::uint32_t n) {
  std::mt19937_64 rng(n);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> v(std::size_t{n} * n);
  for (auto& x : v) x = round_to_half(normal(rng));
  return {n, n, std::move(v)};
}

std::vector<std::uint8_t> mask(std::uint32_t n) {
  std::mt19937_64 rng(n);
  std::vector<std::uint8_t> m(std::size_t{n} * n);
  for (auto& b : m) b = static_cast<std::uint8_t>(rng() & 1u);
  return m;
}

void set_bytes(benchmark::State& state, std::uint32_t n) {
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * n * n * 2);
}

void BM_SymmetricReference(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto x = activations(n);
  for (auto _ : state) benchmark::DoNotOptimize(reference::quantize_symmetric(x, kDefaultGroupSize));
  set_bytes(state, n);
}

void BM_SymmetricParallel(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto x = activations(n);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_symmetric(x, kDefaultGroupSize));
  set_bytes(state, n);
}

void BM_AsymmetricReference(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto x = activations(n);
  for (auto _ : state) benchmark::DoNotOptimize(reference::quantize_asymmetric(x, kDefaultGroupSize));
  set_bytes(state, n);
}

void BM_AsymmetricParallel(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto x = activations(n);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_asymmetric(x, kDefaultGroupSize));
  set_bytes(state, n);
}

void BM_DequantizeReference(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto ct = quantize_symmetric(activations(n), kDefaultGroupSize);
  for (auto _ : state) benchmark::DoNotOptimize(reference::dequantize(ct));
  set_bytes(state, n);
}

void BM_DequantizeParallel(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto ct = quantize_symmetric(activations(n), kDefaultGroupSize);
  for (auto _ : state) benchmark::DoNotOptimize(dequantize(ct));
  set_bytes(state, n);
}

void BM_ChannelSumsReference(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto x = activations(n);
  for (auto _ : state) benchmark::DoNotOptimize(reference::channel_abs_sums(x));
  set_bytes(state, n);
}

void BM_ChannelSumsParallel(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto x = activations(n);
  for (auto _ : state) benchmark::DoNotOptimize(channel_abs_sums(x));
  set_bytes(state, n);
}

void BM_BitmaskReference(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto m = mask(n);
  for (auto _ : state) benchmark::DoNotOptimize(reference::pack_bitmask(m));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * n * n);
}

void BM_BitmaskParallel(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto m = mask(n);
  for (auto _ : state) benchmark::DoNotOptimize(pack_bitmask(m));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * n * n);
}

}  // namespace

#define MEMPLAN_SIZES ->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond)

BENCHMARK(BM_SymmetricReference) MEMPLAN_SIZES;
BENCHMARK(BM_SymmetricParallel) MEMPLAN_SIZES;
BENCHMARK(BM_AsymmetricReference) MEMPLAN_SIZES;
BENCHMARK(BM_AsymmetricParallel) MEMPLAN_SIZES;
BENCHMARK(BM_DequantizeReference) MEMPLAN_SIZES;
BENCHMARK(BM_DequantizeParallel) MEMPLAN_SIZES;
BENCHMARK(BM_ChannelSumsReference) MEMPLAN_SIZES;
BENCHMARK(BM_ChannelSumsParallel) MEMPLAN_SIZES;
BENCHMARK(BM_BitmaskReference) MEMPLAN_SIZES;
BENCHMARK(BM_BitmaskParallel) MEMPLAN_SIZES;

BENCHMARK_MAIN();
