#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "memplan/profile.hpp"

// Built-in profiles used by tests, the benchmark and the files under data/.
namespace memplan::scenarios {

// The four tensors of the motivating bandwidth table (T1..T4) as operators
// 1..4. Times are in ms; the single "compression time" column is split evenly
// between compress and decompress.
std::vector<OperatorProfile> table1_operators();
// Same rows as a 4-operator profile with a loose budget.
ModelProfile table1_profile();

// A checkpoint operator followed by T1..T4: one layer, no static memory,
// 40 MiB budget, 10 ms base step.
ModelProfile planner_example();

// Six operators whose best plan depends on how many outlier channels the
// five Linear outputs carry: at the early-training outlier level only four
// fit compressed, once outliers settle all five do. Hidden size 1024.
ModelProfile evolution_example();
inline constexpr std::uint32_t kEvolutionChannels = 1024;

// Per-sample profiles (reference batch 1) whose max-batch table matches the
// published retain-all / full-recompute ratios of the two GPT sizes.
ModelProfile gpt345m_like();
ModelProfile gpt117m_like();

// Thirty operators of one GPT block at batch 8, sequence 1024, hidden 1024.
ModelProfile realistic_block();

// Full recomputation of every non-checkpoint operator costs 28% of the
// resulting iteration time.
ModelProfile recompute_heavy();

struct RandomProfileOptions {
  std::size_t n_operators = 6;
  int max_layers = 4;
  // Draw times on a 0.01 ms grid so that ties are common.
  bool coarse_times = false;
};

// Seeded random profile. The budget is drawn between the smallest possible
// footprint and the retain-all footprint, so the profile is always feasible.
ModelProfile random_profile(std::uint64_t seed, const RandomProfileOptions& opts = {});

struct NamedScenario {
  std::string_view name;
  ModelProfile (*make)();
};

// Every fixed scenario with the file stem it is shipped under in data/.
std::vector<NamedScenario> all();

}  // namespace memplan::scenarios
