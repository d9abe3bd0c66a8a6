#include "memplan/simulator.hpp"

#include <exception>

#include "memplan/error.hpp"
#include "parallel.hpp"

namespace memplan {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::RetainAll: return "retain-all";
    case Strategy::FullRecompute: return "full-recompute";
    case Strategy::AllCompress: return "all-compress";
    case Strategy::Optimal: return "optimal";
  }
  return "optimal";
}

double base_step_time(const ModelProfile& p, int batch, const SimOptions& opts) {
  if (opts.efficiency_k) {
    const double k = *opts.efficiency_k;
    return p.base_step_time_ms * (batch + k) / (p.reference_batch + k);
  }
  // Same factor scale_profile applies, so the two stay bit-identical.
  return p.base_step_time_ms * (static_cast<double>(batch) / p.reference_batch);
}

StepReport simulate_step(const ModelProfile& p, const Plan& plan, int batch, const SimOptions& opts) {
  if (plan.choices.size() != p.size())
    throw ValidationError("plan has " + std::to_string(plan.choices.size()) + " choices for " +
                          std::to_string(p.size()) + " operators");
  if (plan.choices.front() == PolicyChoice::Recompute)
    throw ValidationError("checkpoint operator 1 cannot be recomputed");

  const ModelProfile scaled = scale_profile(p, batch);
  const std::int64_t total = scaled.static_mem_bytes + plan_activation_bytes(scaled, plan.choices);
  if (total > scaled.mem_budget_bytes) throw InfeasiblePlan(total, scaled.mem_budget_bytes, batch);

  StepReport r;
  r.batch = batch;
  r.overhead_ms = plan_objective(scaled, plan.choices) * p.n_layers;
  r.iteration_ms = base_step_time(p, batch, opts) + r.overhead_ms;
  r.peak_bytes = total;
  r.throughput_samples_per_s = r.iteration_ms > 0.0 ? batch / (r.iteration_ms / 1000.0) : 0.0;
  return r;
}

std::optional<Plan> plan_for(const ModelProfile& p, Strategy s) {
  std::vector<PolicyChoice> choices(p.size(), PolicyChoice::Retain);
  switch (s) {
    case Strategy::RetainAll: break;
    case Strategy::FullRecompute:
      std::fill(choices.begin() + 1, choices.end(), PolicyChoice::Recompute);
      break;
    case Strategy::AllCompress: std::fill(choices.begin(), choices.end(), PolicyChoice::Compress); break;
    case Strategy::Optimal:
      try {
        return solve(p);
      } catch (const Infeasible&) {
        return std::nullopt;
      }
  }
  Plan plan = evaluate_plan(p, std::move(choices));
  if (plan.total_bytes > p.mem_budget_bytes) return std::nullopt;
  return plan;
}

int max_feasible_batch(const ModelProfile& p, Strategy s) {
  // The checkpoint always occupies at least one byte.
  if (p.mem_budget_bytes <= p.static_mem_bytes) return 0;
  const auto fits = [&](int b) { return plan_for(scale_profile(p, b), s).has_value(); };
  if (!fits(1)) return 0;
  // Memory is non-decreasing in batch: bracket, then bisect.
  int lo = 1;
  int hi = 2;
  while (hi <= kMaxSearchBatch && fits(hi)) {
    lo = hi;
    hi *= 2;
  }
  if (hi > kMaxSearchBatch) {
    hi = kMaxSearchBatch + 1;
    if (fits(kMaxSearchBatch)) return kMaxSearchBatch;
  }
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (fits(mid)) lo = mid;
    else hi = mid;
  }
  return lo;
}

std::vector<SweepRow> sweep(const ModelProfile& p, int batch_lo, int batch_hi,
                            std::span<const Strategy> strategies, const SimOptions& opts) {
  if (batch_lo < 1 || batch_hi < batch_lo)
    throw ValidationError("batch range must satisfy 1 <= low <= high");
  const int count = batch_hi - batch_lo + 1;
  std::vector<std::vector<SweepRow>> per_batch(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));

  MEMPLAN_PARALLEL_FOR_DYNAMIC
  for (int i = 0; i < count; ++i) {
    try {
      const int b = batch_lo + i;
      const ModelProfile scaled = scale_profile(p, b);
      for (auto s : strategies) {
        auto plan = plan_for(scaled, s);
        if (!plan) continue;
        per_batch[i].push_back({s, simulate_step(p, *plan, b, opts)});
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<SweepRow> rows;
  for (auto& chunk : per_batch) {
    std::stable_sort(chunk.begin(), chunk.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.strategy < b.strategy; });
    rows.insert(rows.end(), chunk.begin(), chunk.end());
  }
  return rows;
}

}  // namespace memplan
