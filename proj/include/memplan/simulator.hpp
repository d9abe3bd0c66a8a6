#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "memplan/planner.hpp"
#include "memplan/profile.hpp"

namespace memplan {

struct SimOptions {
  // When set, base step time follows b / eff(b) with eff(b) = b / (b + k),
  // normalized to the reference batch: small batches underuse the device.
  // Unset means base time is strictly linear in batch.
  std::optional<double> efficiency_k;
};

inline constexpr double kDefaultEfficiencyK = 2.0;

struct StepReport {
  int batch = 0;
  double iteration_ms = 0.0;
  // Per-block overhead times n_layers.
  double overhead_ms = 0.0;
  std::int64_t peak_bytes = 0;
  double throughput_samples_per_s = 0.0;
};

// Base (unoptimized) iteration time of `p` rescaled to `batch`.
double base_step_time(const ModelProfile& p, int batch, const SimOptions& opts = {});

// Replays one iteration of `plan` at `batch`. Throws InfeasiblePlan if the
// plan's footprint at that batch exceeds the budget.
StepReport simulate_step(const ModelProfile& p, const Plan& plan, int batch, const SimOptions& opts = {});

enum class Strategy : std::uint8_t {
  RetainAll,
  FullRecompute,
  AllCompress,
  Optimal,
};

inline constexpr std::array kAllStrategies{Strategy::RetainAll, Strategy::FullRecompute,
                                           Strategy::AllCompress, Strategy::Optimal};

std::string_view to_string(Strategy s) noexcept;

// Plan the strategy produces for `p` (already at the batch of interest), or
// nullopt when it does not fit the budget.
std::optional<Plan> plan_for(const ModelProfile& p, Strategy s);

// Largest batch whose strategy plan fits the budget; 0 if batch 1 does not.
int max_feasible_batch(const ModelProfile& p, Strategy s);
inline constexpr int kMaxSearchBatch = 1 << 20;

struct SweepRow {
  Strategy strategy;
  StepReport report;
};

// Step reports for every (batch, strategy) that fits, sorted by batch then
// strategy. Batches are evaluated in parallel.
std::vector<SweepRow> sweep(const ModelProfile& p, int batch_lo, int batch_hi,
                            std::span<const Strategy> strategies, const SimOptions& opts = {});

// ---------------------------------------------------------------------------
// Outlier drift.

struct DriftSample {
  std::int64_t iteration = 0;
  std::uint32_t outlier_count = 0;
  double crate = 0.0;
};

struct DriftSeries {
  int operator_id = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<DriftSample> samples;  // samples[t - 1] is iteration t
};

struct DriftTrace {
  std::vector<DriftSeries> series;

  const DriftSeries* find(int operator_id) const noexcept;
  std::int64_t iterations() const noexcept;
};

// Outlier-channel fraction follows
//   settle + (start - settle) * exp(-t / decay_iterations)
// plus a smooth AR(1) disturbance whose amplitude decays as 1/sqrt(t).
struct DriftRegime {
  double start_fraction = 0.03;
  double settle_fraction = 0.006;
  double amplitude = 0.02;
  double decay_iterations = 60.0;
  double smoothing = 0.9;

  static DriftRegime constant(double fraction) { return {fraction, fraction, 0.0, 1.0, 0.0}; }
};

struct DriftTarget {
  int operator_id = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

// Tracked operators of `p` viewed as rows x cols FP16 tensors with `cols`
// channels. Throws ValidationError if mem_bytes is not a whole number of rows.
std::vector<DriftTarget> drift_targets(const ModelProfile& p, std::span<const LayerKind> kinds,
                                       std::uint32_t cols);

// Seeded and deterministic. Each target gets an independent stream.
DriftTrace generate_drift(std::uint64_t seed, std::int64_t iterations, std::span<const DriftTarget> targets,
                          const DriftRegime& regime = {});

// Single-series convenience form.
DriftTrace generate_drift(std::uint64_t seed, std::int64_t iterations, std::uint32_t rows, std::uint32_t cols,
                          const DriftRegime& regime = {});

}  // namespace memplan
