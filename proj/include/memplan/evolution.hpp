#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "memplan/planner.hpp"
#include "memplan/profile.hpp"
#include "memplan/simulator.hpp"

namespace memplan {

std::vector<LayerKind> default_tracked_kinds();

// Decides which iterations re-measure outliers. Tracking happens at
// 1, 2, 4, ... doubling the gap each time until it reaches max_interval,
// then every max_interval iterations. The backoff never resets.
class TrackingSchedule {
 public:
  static constexpr std::int64_t kDefaultMaxInterval = 512;
  static constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

  // max_interval must be a power of two.
  explicit TrackingSchedule(std::int64_t max_interval = kDefaultMaxInterval,
                            std::vector<LayerKind> tracked = default_tracked_kinds());

  // Tracks iteration 1 only.
  static TrackingSchedule first_only(std::vector<LayerKind> tracked = default_tracked_kinds());

  // True exactly on tracking iterations; advances the schedule past `iter`.
  // Throws OutOfOrderIteration unless iter exceeds every earlier call.
  bool is_tracking_iteration(std::int64_t iter);

  std::int64_t next_tracking_iteration() const noexcept { return next_; }
  std::int64_t current_interval() const noexcept { return interval_; }
  std::int64_t max_interval() const noexcept { return max_interval_; }
  const std::vector<LayerKind>& tracked_kinds() const noexcept { return tracked_; }
  bool tracks(LayerKind kind) const noexcept;

 private:
  void advance();

  std::int64_t next_ = 1;
  std::int64_t interval_ = 1;
  std::int64_t max_interval_;
  std::int64_t last_seen_ = 0;
  bool first_only_ = false;
  std::vector<LayerKind> tracked_;
};

// Tracking iterations in [1, up_to] for a fresh schedule.
std::vector<std::int64_t> tracking_iterations(std::int64_t max_interval, std::int64_t up_to);

struct CrateDelta {
  int operator_id = 0;
  double old_rate = 0.0;
  double new_rate = 0.0;
};

struct EvolutionEntry {
  std::int64_t iteration = 0;
  bool tracked = false;
  bool resolved = false;
  bool changed = false;
  double objective_ms_old = 0.0;
  double objective_ms_new = 0.0;
  // Wall time of the re-solve; zero on normal iterations.
  double wall_ms = 0.0;
  std::vector<CrateDelta> crate_deltas;
};

struct EvolveOutcome {
  ModelProfile profile;  // with compression rates as last measured
  Plan plan;
  EvolutionEntry entry;
};

// One iteration of policy evolution. Normal iterations return the inputs
// untouched. Tracking iterations refresh the compression rate of tracked
// operators from `drift`, re-solve, and adopt the new plan only if it is
// strictly cheaper or the old one no longer fits. Throws Infeasible when
// neither fits.
EvolveOutcome evolve_step(const ModelProfile& p, const Plan& plan, const DriftTrace& drift, std::int64_t iter,
                          TrackingSchedule& sched);

// `p` with every operator that has a drift series set to its compression
// rate at `iter`.
ModelProfile profile_at(const ModelProfile& p, const DriftTrace& drift, std::int64_t iter);

struct EvolutionResult {
  std::vector<EvolutionEntry> log;  // one entry per iteration
  Plan initial_plan;
  Plan final_plan;
  // Per-iteration throughput averaged over the run; an iteration whose plan
  // no longer fits the true footprint counts as zero.
  double adaptive_mean_throughput = 0.0;
  double static_mean_throughput = 0.0;
  // Adaptive with each re-solve's wall time added to its iteration.
  double adaptive_mean_throughput_charged = 0.0;
  double adaptive_overhead_ms = 0.0;
  double static_overhead_ms = 0.0;
  double resolve_wall_ms = 0.0;
  std::int64_t adaptive_oom_iterations = 0;
  std::int64_t static_oom_iterations = 0;
  std::int64_t tracking_iterations = 0;
  std::int64_t plan_changes = 0;

  double improvement() const noexcept {
    return static_mean_throughput > 0.0 ? adaptive_mean_throughput / static_mean_throughput : 0.0;
  }
};

// Runs `iterations` training steps at the reference batch, comparing the
// evolving plan against the plan solved once from `p`.
EvolutionResult run_evolution(const ModelProfile& p, std::int64_t iterations, const DriftTrace& drift,
                              TrackingSchedule sched);

}  // namespace memplan
