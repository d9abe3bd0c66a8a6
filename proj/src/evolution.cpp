#include "memplan/evolution.hpp"

#include <algorithm>
#include <bit>
#include <chrono>

#include "memplan/error.hpp"

namespace memplan {

std::vector<LayerKind> default_tracked_kinds() {
  return {LayerKind::Linear, LayerKind::LayerNorm, LayerKind::Gelu};
}

TrackingSchedule::TrackingSchedule(std::int64_t max_interval, std::vector<LayerKind> tracked)
    : max_interval_(max_interval), tracked_(std::move(tracked)) {
  if (max_interval < 1 || !std::has_single_bit(static_cast<std::uint64_t>(max_interval)))
    throw ValidationError("max_interval must be a power of two, got " + std::to_string(max_interval));
}

TrackingSchedule TrackingSchedule::first_only(std::vector<LayerKind> tracked) {
  TrackingSchedule s(1, std::move(tracked));
  s.first_only_ = true;
  return s;
}

bool TrackingSchedule::tracks(LayerKind kind) const noexcept {
  return std::find(tracked_.begin(), tracked_.end(), kind) != tracked_.end();
}

void TrackingSchedule::advance() {
  if (first_only_) {
    next_ = kNever;
    interval_ = kNever;
    return;
  }
  interval_ = std::min(next_, max_interval_);
  next_ += interval_;
}

bool TrackingSchedule::is_tracking_iteration(std::int64_t iter) {
  if (iter <= last_seen_)
    throw OutOfOrderIteration("iteration " + std::to_string(iter) + " after iteration " +
                              std::to_string(last_seen_));
  last_seen_ = iter;
  while (next_ < iter) advance();
  if (next_ != iter) return false;
  advance();
  return true;
}

std::vector<std::int64_t> tracking_iterations(std::int64_t max_interval, std::int64_t up_to) {
  TrackingSchedule s(max_interval);
  std::vector<std::int64_t> out;
  for (std::int64_t t = 1; t <= up_to; ++t)
    if (s.is_tracking_iteration(t)) out.push_back(t);
  return out;
}

ModelProfile profile_at(const ModelProfile& p, const DriftTrace& drift, std::int64_t iter) {
  ModelProfile out = p;
  for (auto& op : out.operators) {
    const auto* series = drift.find(op.id);
    if (!series) continue;
    if (iter < 1 || iter > static_cast<std::int64_t>(series->samples.size()))
      throw ValidationError("drift for operator id " + std::to_string(op.id) + " does not cover iteration " +
                            std::to_string(iter));
    op.compression_rate = series->samples[static_cast<std::size_t>(iter - 1)].crate;
  }
  return out;
}

EvolveOutcome evolve_step(const ModelProfile& p, const Plan& plan, const DriftTrace& drift, std::int64_t iter,
                          TrackingSchedule& sched) {
  EvolveOutcome out{p, plan, {}};
  out.entry.iteration = iter;
  out.entry.objective_ms_old = plan.objective_ms;
  out.entry.objective_ms_new = plan.objective_ms;
  if (!sched.is_tracking_iteration(iter)) return out;

  out.entry.tracked = true;
  for (auto& op : out.profile.operators) {
    if (!sched.tracks(op.kind)) continue;
    const auto* series = drift.find(op.id);
    if (!series || iter > static_cast<std::int64_t>(series->samples.size()))
      throw ValidationError("drift does not cover tracked operator id " + std::to_string(op.id) +
                            " at iteration " + std::to_string(iter));
    const double rate = series->samples[static_cast<std::size_t>(iter - 1)].crate;
    if (rate != op.compression_rate) out.entry.crate_deltas.push_back({op.id, op.compression_rate, rate});
    op.compression_rate = rate;
  }

  const auto start = std::chrono::steady_clock::now();
  Plan old_plan = evaluate_plan(out.profile, plan.choices);
  old_plan.solver = plan.solver;
  const bool old_fits = old_plan.total_bytes <= out.profile.mem_budget_bytes;
  out.entry.objective_ms_old = old_plan.objective_ms;
  out.entry.resolved = true;
  try {
    Plan fresh = solve(out.profile);
    out.entry.objective_ms_new = fresh.objective_ms;
    if (!old_fits || fresh.objective_ms < old_plan.objective_ms) {
      out.plan = std::move(fresh);
      out.entry.changed = out.plan.choices != plan.choices;
    } else {
      out.plan = std::move(old_plan);
    }
  } catch (const Infeasible&) {
    if (!old_fits) throw;
    out.plan = std::move(old_plan);
  }
  out.entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

EvolutionResult run_evolution(const ModelProfile& p, std::int64_t iterations, const DriftTrace& drift,
                              TrackingSchedule sched) {
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  EvolutionResult result;
  result.initial_plan = solve(p);
  result.log.reserve(static_cast<std::size_t>(iterations));

  ModelProfile believed = p;
  Plan adaptive = result.initial_plan;
  const int batch = p.reference_batch;
  double adaptive_sum = 0.0;
  double static_sum = 0.0;
  double charged_sum = 0.0;

  for (std::int64_t t = 1; t <= iterations; ++t) {
    EvolveOutcome step = evolve_step(believed, adaptive, drift, t, sched);
    believed = std::move(step.profile);
    adaptive = std::move(step.plan);
    if (step.entry.tracked) ++result.tracking_iterations;
    if (step.entry.changed) ++result.plan_changes;
    result.resolve_wall_ms += step.entry.wall_ms;

    const ModelProfile actual = profile_at(p, drift, t);
    try {
      const StepReport r = simulate_step(actual, adaptive, batch);
      adaptive_sum += r.throughput_samples_per_s;
      result.adaptive_overhead_ms += r.overhead_ms;
      const double charged_ms = r.iteration_ms + step.entry.wall_ms;
      charged_sum += charged_ms > 0.0 ? batch / (charged_ms / 1000.0) : 0.0;
    } catch (const InfeasiblePlan&) {
      ++result.adaptive_oom_iterations;
    }
    try {
      const StepReport r = simulate_step(actual, result.initial_plan, batch);
      static_sum += r.throughput_samples_per_s;
      result.static_overhead_ms += r.overhead_ms;
    } catch (const InfeasiblePlan&) {
      ++result.static_oom_iterations;
    }
    result.log.push_back(std::move(step.entry));
  }

  const auto n = static_cast<double>(iterations);
  result.adaptive_mean_throughput = adaptive_sum / n;
  result.static_mean_throughput = static_sum / n;
  result.adaptive_mean_throughput_charged = charged_sum / n;
  result.final_plan = adaptive;
  return result;
}

}  // namespace memplan
