#include "memplan/scenarios.hpp"

#include <cmath>
#include <random>

#include "memplan/codec.hpp"
#include "memplan/planner.hpp"
#include "memplan/units.hpp"

namespace memplan::scenarios {

namespace {

OperatorProfile op(int id, std::string name, LayerKind kind, std::int64_t mem, double recompute_ms,
                   double codec_ms, double rate) {
  return {id, std::move(name), kind, mem, recompute_ms, codec_ms / 2, codec_ms / 2, rate};
}

std::int64_t mib(double v) { return static_cast<std::int64_t>(std::llround(v * kMiB)); }

// Size ratio a layer's codec reaches on an FP16 tensor of rows x cols.
double codec_rate(LayerKind kind, std::uint32_t rows, std::uint32_t cols, double outlier_fraction = 0.01) {
  const auto choice = codec::scheme_for(kind);
  const double elements = static_cast<double>(rows) * cols;
  if (choice.scheme == codec::Scheme::BitMask)
    return static_cast<double>(codec::expected_payload_bytes(choice.scheme, rows, cols, 0, 0)) / elements;
  const auto k = static_cast<std::size_t>(std::llround(outlier_fraction * cols));
  const std::size_t outliers = choice.scheme == codec::Scheme::OutlierSeparated ? k : 0;
  return static_cast<double>(codec::expected_payload_bytes(choice.scheme, rows, cols, choice.group_size, outliers)) /
         (2.0 * elements);
}

// 53-bit uniform in [0, 1); independent of the standard library's
// distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

std::vector<OperatorProfile> table1_operators() {
  return {
      op(1, "T1", LayerKind::Gelu, mib(96), 0.36, 0.37, 24.0 / 96.0),
      op(2, "T2", LayerKind::Linear, mib(42), 1.02, 0.16, 11.8 / 42.0),
      op(3, "T3", LayerKind::Linear, mib(42), 0.58, 0.16, 11.8 / 42.0),
      op(4, "T4", LayerKind::Softmax, mib(10.5), 0.04, 0.04, 2.6 / 10.5),
  };
}

ModelProfile table1_profile() {
  ModelProfile p;
  p.operators = table1_operators();
  p.n_layers = 1;
  p.mem_budget_bytes = mib(256);
  p.base_step_time_ms = 10.0;
  return p;
}

ModelProfile planner_example() {
  ModelProfile p;
  p.operators.push_back(op(1, "block_input", LayerKind::LayerNorm, mib(8), 0.10, 0.06, 0.25));
  for (auto t : table1_operators()) {
    t.id += 1;
    p.operators.push_back(std::move(t));
  }
  p.n_layers = 1;
  p.static_mem_bytes = 0;
  p.mem_budget_bytes = mib(40);
  p.base_step_time_ms = 10.0;
  return p;
}

ModelProfile evolution_example() {
  // 42 MiB of FP16 = 21504 rows of 1024 channels; 3% outlier channels at the
  // start of training.
  constexpr std::uint32_t rows = 21504;
  const double start_rate = codec::outlier_separated_rate(rows, kEvolutionChannels, 31);
  ModelProfile p;
  p.operators.push_back(op(1, "block_input", LayerKind::Other, mib(8), 0.10, 0.06, 0.265625));
  const char* names[] = {"attn_qkv", "attn_out", "mlp_fc1", "mlp_fc2", "mlp_proj"};
  for (int i = 0; i < 5; ++i) p.operators.push_back(op(i + 2, names[i], LayerKind::Linear, mib(42), 1.0, 0.2, start_rate));
  p.n_layers = 24;
  p.static_mem_bytes = 4 * kGiB;
  p.mem_budget_bytes = p.static_mem_bytes + 24 * mib(62);
  p.base_step_time_ms = 100.0;
  return p;
}

ModelProfile gpt345m_like() {
  ModelProfile p;
  p.operators = {
      op(1, "ln_in", LayerKind::LayerNorm, mib(2), 0.020, 0.010, 0.2813),
      op(2, "qkv", LayerKind::QkvMatrix, mib(3), 0.060, 0.012, 0.2502),
      op(3, "attn_score", LayerKind::Score, mib(2), 0.030, 0.009, 0.28125),
      op(4, "attn_softmax", LayerKind::Softmax, mib(2), 0.015, 0.009, 0.28125),
      op(5, "attn_dropout_mask", LayerKind::DropoutMask, mib(1), 0.004, 0.003, 0.125),
      op(6, "attn_dense", LayerKind::Linear, mib(1), 0.020, 0.005, 0.2813),
      op(7, "ln_post", LayerKind::LayerNorm, mib(1), 0.006, 0.005, 0.2813),
      op(8, "mlp_fc1", LayerKind::Linear, mib(1), 0.040, 0.005, 0.2813),
      op(9, "mlp_gelu", LayerKind::Gelu, mib(1), 0.008, 0.005, 0.2813),
      op(10, "mlp_fc2", LayerKind::Linear, mib(1), 0.040, 0.005, 0.2813),
  };
  p.n_layers = 24;
  p.static_mem_bytes = 6 * kGiB;
  // 61.5 checkpoint-only blocks per sample fit: 8 retain-all, 61 full-recompute.
  p.mem_budget_bytes = p.static_mem_bytes + 24 * mib(123);
  p.base_step_time_ms = 30.0;
  return p;
}

ModelProfile gpt117m_like() {
  ModelProfile p;
  p.operators = {
      op(1, "ln_in", LayerKind::LayerNorm, mib(2), 0.010, 0.006, 0.2813),
      op(2, "qkv", LayerKind::QkvMatrix, mib(0.75), 0.015, 0.004, 0.2502),
      op(3, "attn_softmax", LayerKind::Softmax, mib(0.5), 0.006, 0.003, 0.28125),
      op(4, "attn_dropout_mask", LayerKind::DropoutMask, mib(0.25), 0.002, 0.001, 0.125),
      op(5, "attn_dense", LayerKind::Linear, mib(0.25), 0.005, 0.002, 0.2813),
      op(6, "ln_post", LayerKind::LayerNorm, mib(0.25), 0.002, 0.002, 0.2813),
      op(7, "mlp_fc1", LayerKind::Linear, mib(0.25), 0.010, 0.002, 0.2813),
      op(8, "mlp_gelu", LayerKind::Gelu, mib(0.25), 0.003, 0.002, 0.2813),
      op(9, "mlp_fc2", LayerKind::Linear, mib(0.25), 0.010, 0.002, 0.2813),
  };
  p.n_layers = 12;
  p.static_mem_bytes = 2 * kGiB;
  // 136.5 checkpoints per sample: 57 retain-all, 136 full-recompute.
  p.mem_budget_bytes = p.static_mem_bytes + 12 * mib(273);
  p.base_step_time_ms = 12.0;
  return p;
}

ModelProfile realistic_block() {
  constexpr std::uint32_t tokens = 8 * 1024;
  constexpr std::uint32_t hidden = 1024;
  constexpr std::uint32_t heads = 16;
  constexpr std::uint32_t seq = 1024;
  struct Row {
    const char* name;
    LayerKind kind;
    std::uint32_t rows;
    std::uint32_t cols;
    double flops_per_elem;  // drives recompute time
  };
  const std::uint32_t score_rows = 8 * heads * seq;
  const Row rows[] = {
      {"block_input", LayerKind::Other, tokens, hidden, 1},
      {"ln1", LayerKind::LayerNorm, tokens, hidden, 8},
      {"q_proj", LayerKind::Linear, tokens, hidden, 2048},
      {"k_proj", LayerKind::Linear, tokens, hidden, 2048},
      {"v_proj", LayerKind::Linear, tokens, hidden, 2048},
      {"q_heads", LayerKind::QkvMatrix, tokens, hidden, 1},
      {"k_heads_t", LayerKind::QkvMatrix, tokens, hidden, 1},
      {"v_heads", LayerKind::QkvMatrix, tokens, hidden, 1},
      {"attn_scores", LayerKind::Score, score_rows, seq, 128},
      {"attn_scaled", LayerKind::Score, score_rows, seq, 1},
      {"attn_masked", LayerKind::Score, score_rows, seq, 1},
      {"attn_softmax", LayerKind::Softmax, score_rows, seq, 6},
      {"attn_dropout_mask", LayerKind::DropoutMask, score_rows, seq, 1},
      {"attn_dropout", LayerKind::Softmax, score_rows, seq, 1},
      {"attn_context", LayerKind::QkvMatrix, tokens, hidden, 2048},
      {"context_merge", LayerKind::Other, tokens, hidden, 1},
      {"attn_out_proj", LayerKind::Linear, tokens, hidden, 2048},
      {"attn_out_bias", LayerKind::Other, tokens, hidden, 1},
      {"attn_out_dropout_mask", LayerKind::DropoutMask, tokens, hidden, 1},
      {"residual1", LayerKind::Other, tokens, hidden, 1},
      {"ln2", LayerKind::LayerNorm, tokens, hidden, 8},
      {"mlp_fc1", LayerKind::Linear, tokens, 4 * hidden, 2048},
      {"mlp_fc1_bias", LayerKind::Other, tokens, 4 * hidden, 1},
      {"mlp_gelu", LayerKind::Gelu, tokens, 4 * hidden, 14},
      {"mlp_fc2", LayerKind::Linear, tokens, hidden, 8192},
      {"mlp_fc2_bias", LayerKind::Other, tokens, hidden, 1},
      {"mlp_dropout_mask", LayerKind::DropoutMask, tokens, hidden, 1},
      {"mlp_dropout", LayerKind::Other, tokens, hidden, 1},
      {"residual2", LayerKind::Other, tokens, hidden, 1},
      {"block_output_ln", LayerKind::LayerNorm, tokens, hidden, 8},
  };

  // Roughly a V100: 100 TFLOP/s for matmuls, 800 GB/s for elementwise work,
  // codecs at about a third of memory bandwidth.
  constexpr double flops_per_ms = 100e9;
  constexpr double bytes_per_ms = 800e6;
  ModelProfile p;
  int id = 1;
  for (const auto& r : rows) {
    const double elements = static_cast<double>(r.rows) * r.cols;
    const bool mask = r.kind == LayerKind::DropoutMask;
    const auto mem = static_cast<std::int64_t>(elements) * (mask ? 1 : 2);
    const double recompute = std::max(elements * r.flops_per_elem / flops_per_ms, 2.0 * mem / bytes_per_ms);
    const double codec = 6.0 * mem / bytes_per_ms;
    p.operators.push_back(op(id++, r.name, r.kind, mem, recompute, codec, codec_rate(r.kind, r.rows, r.cols)));
  }
  p.n_layers = 24;
  p.static_mem_bytes = 6 * kGiB;
  p.mem_budget_bytes = 32 * kGiB;
  p.base_step_time_ms = 900.0;
  return p;
}

ModelProfile recompute_heavy() {
  // Recomputing ops 2..6 costs 1.75 ms per block; 24 blocks add 42 ms to a
  // 108 ms step: 42 / 150 = 0.28.
  ModelProfile p;
  p.operators = {
      op(1, "block_input", LayerKind::Other, mib(16), 0.05, 0.06, 0.265625),
      op(2, "ln1", LayerKind::LayerNorm, mib(16), 0.05, 0.06, 0.2813),
      op(3, "attn_qkv", LayerKind::Linear, mib(48), 0.55, 0.18, 0.2813),
      op(4, "attn_out", LayerKind::Linear, mib(16), 0.30, 0.06, 0.2813),
      op(5, "mlp_fc1", LayerKind::Linear, mib(64), 0.60, 0.24, 0.2813),
      op(6, "mlp_gelu", LayerKind::Gelu, mib(64), 0.25, 0.24, 0.2813),
  };
  p.n_layers = 24;
  p.static_mem_bytes = 2 * kGiB;
  p.mem_budget_bytes = 16 * kGiB;
  p.base_step_time_ms = 108.0;
  return p;
}

ModelProfile random_profile(std::uint64_t seed, const RandomProfileOptions& opts) {
  std::mt19937_64 rng(seed);
  ModelProfile p;
  const auto time = [&](double lo, double hi) {
    const double v = lo + (hi - lo) * unit(rng);
    return opts.coarse_times ? std::max(0.01, std::round(v * 100.0) / 100.0) : v;
  };
  constexpr LayerKind kinds[] = {LayerKind::Linear,  LayerKind::LayerNorm, LayerKind::Gelu,
                                 LayerKind::QkvMatrix, LayerKind::Softmax, LayerKind::Score,
                                 LayerKind::DropoutMask, LayerKind::Other};
  for (std::size_t i = 0; i < opts.n_operators; ++i) {
    OperatorProfile o;
    o.id = static_cast<int>(i + 1);
    o.name = "op" + std::to_string(i + 1);
    o.kind = kinds[rng() % std::size(kinds)];
    o.mem_bytes = uniform_int(rng, kKiB, 64 * kMiB);
    o.compute_time_ms = time(0.01, 2.0);
    const double codec = time(0.02, 0.8);
    o.compress_time_ms = codec / 2;
    o.decompress_time_ms = codec / 2;
    o.compression_rate = 0.1 + 0.8 * unit(rng);
    p.operators.push_back(std::move(o));
  }
  p.n_layers = static_cast<int>(uniform_int(rng, 1, std::max(1, opts.max_layers)));
  p.static_mem_bytes = uniform_int(rng, 0, kGiB);
  p.reference_batch = 1;
  p.base_step_time_ms = time(5.0, 200.0);

  p.mem_budget_bytes = p.static_mem_bytes;  // placeholder so the helpers below accept p
  const std::int64_t lo = min_total_bytes(p);
  std::int64_t hi = p.static_mem_bytes;
  for (const auto& o : p.operators) hi += p.n_layers * o.mem_bytes;
  p.mem_budget_bytes = uniform_int(rng, lo, hi);
  return p;
}

std::vector<NamedScenario> all() {
  return {
      {"table1", &table1_profile},
      {"planner_example", &planner_example},
      {"evolution_example", &evolution_example},
      {"gpt345m_like", &gpt345m_like},
      {"gpt117m_like", &gpt117m_like},
      {"realistic_block", &realistic_block},
      {"recompute_heavy", &recompute_heavy},
  };
}

}  // namespace memplan::scenarios
