#include <doctest.h>

#include "memplan/codec.hpp"
#include "memplan/error.hpp"
#include "memplan/evolution.hpp"
#include "memplan/scenarios.hpp"
#include "memplan/units.hpp"

using namespace memplan;
using PC = PolicyChoice;

namespace {

// Drift for one 1024 x 1024 operator: `before` outlier channels up to and
// including iteration `switch_at`, `after` from then on.
DriftSeries step_series(int operator_id, std::int64_t iterations, std::int64_t switch_at, std::uint32_t before,
                        std::uint32_t after) {
  DriftSeries s{operator_id, 1024, 1024, {}};
  for (std::int64_t t = 1; t <= iterations; ++t) {
    const std::uint32_t k = t <= switch_at ? before : after;
    s.samples.push_back({t, k, codec::outlier_separated_rate(1024, 1024, k)});
  }
  return s;
}

}  // namespace

TEST_CASE("tracking doubles its interval") {
  CHECK(tracking_iterations(512, 20) == std::vector<std::int64_t>{1, 2, 4, 8, 16});
  CHECK(tracking_iterations(4, 20) == std::vector<std::int64_t>{1, 2, 4, 8, 12, 16, 20});
  CHECK(tracking_iterations(1, 5) == std::vector<std::int64_t>{1, 2, 3, 4, 5});

  TrackingSchedule s(8);
  CHECK(s.is_tracking_iteration(1));
  CHECK(s.current_interval() == 1);
  CHECK(s.next_tracking_iteration() == 2);
  CHECK_FALSE(s.is_tracking_iteration(3));
  CHECK(s.is_tracking_iteration(4));
  CHECK(s.next_tracking_iteration() == 8);
  CHECK(s.is_tracking_iteration(8));
  CHECK(s.current_interval() == 8);
  CHECK(s.next_tracking_iteration() == 16);
}

TEST_CASE("schedule misuse") {
  TrackingSchedule s;
  CHECK(s.is_tracking_iteration(5) == false);
  CHECK_THROWS_AS(s.is_tracking_iteration(3), OutOfOrderIteration);
  CHECK_THROWS_AS(s.is_tracking_iteration(5), OutOfOrderIteration);
  CHECK_THROWS_AS(TrackingSchedule(6), ValidationError);
  CHECK_THROWS_AS(TrackingSchedule(0), ValidationError);

  auto once = TrackingSchedule::first_only();
  CHECK(once.is_tracking_iteration(1));
  for (int t = 2; t < 5000; ++t) REQUIRE_FALSE(once.is_tracking_iteration(t));
}

TEST_CASE("tracked kinds are configurable") {
  const TrackingSchedule s;
  CHECK(s.tracks(LayerKind::Linear));
  CHECK(s.tracks(LayerKind::LayerNorm));
  CHECK(s.tracks(LayerKind::Gelu));
  CHECK_FALSE(s.tracks(LayerKind::Softmax));
  const TrackingSchedule only_gelu(512, {LayerKind::Gelu});
  CHECK_FALSE(only_gelu.tracks(LayerKind::Linear));
}

TEST_CASE("normal iterations leave the plan alone") {
  const auto p = scenarios::evolution_example();
  const auto trace = generate_drift(1, 10, drift_targets(p, default_tracked_kinds(), 1024));
  const Plan plan = solve(p);
  TrackingSchedule s;
  (void)evolve_step(p, plan, trace, 1, s);
  (void)evolve_step(p, plan, trace, 2, s);
  const auto out = evolve_step(p, plan, trace, 3, s);
  CHECK_FALSE(out.entry.tracked);
  CHECK_FALSE(out.entry.resolved);
  CHECK(out.entry.wall_ms == 0.0);
  CHECK(out.plan.choices == plan.choices);
  CHECK(out.profile == p);
}

TEST_CASE("better compression flips an operator to compress") {
  ModelProfile p;
  p.operators = {
      {1, "input", LayerKind::Other, kMiB, 0.1, 0.03, 0.03, 0.5},
      {2, "dense", LayerKind::Linear, 2 * kMiB, 0.5, 0.2, 0.2, codec::outlier_separated_rate(1024, 1024, 400)},
  };
  p.mem_budget_bytes = 1700000;
  p.base_step_time_ms = 10.0;
  DriftTrace trace{{step_series(2, 10, 3, 400, 0)}};

  const Plan initial = solve(p);
  CHECK(initial.choices == std::vector{PC::Retain, PC::Recompute});
  CHECK(brute_force(p).choices == initial.choices);
  const auto later = profile_at(p, trace, 5);
  CHECK(brute_force(later).choices == std::vector{PC::Retain, PC::Compress});

  TrackingSchedule s;
  Plan plan = initial;
  ModelProfile believed = p;
  for (std::int64_t t = 1; t <= 4; ++t) {
    auto out = evolve_step(believed, plan, trace, t, s);
    believed = out.profile;
    plan = out.plan;
    if (t < 4) {
      CHECK_FALSE(out.entry.changed);
    } else {
      CHECK(out.entry.changed);
      CHECK(out.entry.objective_ms_old == doctest::Approx(0.5));
      CHECK(out.entry.objective_ms_new == doctest::Approx(0.4));
      REQUIRE(out.entry.crate_deltas.size() == 1);
      CHECK(out.entry.crate_deltas[0].operator_id == 2);
    }
  }
  CHECK(plan.choices == std::vector{PC::Retain, PC::Compress});
}

TEST_CASE("worse compression forces a re-plan at equal cost") {
  ModelProfile p;
  p.operators = {
      {1, "input", LayerKind::Other, kMiB, 0.1, 0.03, 0.03, 0.5},
      {2, "dense", LayerKind::Linear, 2 * kMiB, 0.5, 0.2, 0.2, codec::outlier_separated_rate(1024, 1024, 0)},
      {3, "other", LayerKind::Other, 2 * kMiB, 0.5, 0.2, 0.2, 0.3},
  };
  p.mem_budget_bytes = 3800000;
  p.base_step_time_ms = 10.0;
  DriftTrace trace{{step_series(2, 10, 1, 0, 400)}};

  const Plan initial = solve(p);
  CHECK(initial.choices == std::vector{PC::Retain, PC::Compress, PC::Retain});

  TrackingSchedule s;
  (void)evolve_step(p, initial, trace, 1, s);
  const auto out = evolve_step(p, initial, trace, 2, s);
  CHECK(out.entry.changed);
  CHECK(out.entry.objective_ms_new == out.entry.objective_ms_old);
  CHECK(out.plan.choices == std::vector{PC::Retain, PC::Retain, PC::Compress});
  CHECK(out.plan.total_bytes <= p.mem_budget_bytes);
}

TEST_CASE("re-planning surfaces infeasibility when nothing fits") {
  ModelProfile p;
  p.operators = {{1, "input", LayerKind::Linear, 2 * kMiB, 0.1, 0.1, 0.1,
                  codec::outlier_separated_rate(1024, 1024, 0)}};
  p.mem_budget_bytes = 600000;
  DriftTrace trace{{step_series(1, 4, 1, 0, 400)}};
  const Plan plan = solve(p);
  TrackingSchedule s;
  (void)evolve_step(p, plan, trace, 1, s);
  CHECK_THROWS_AS(evolve_step(p, plan, trace, 2, s), Infeasible);
}

TEST_CASE("steady outliers never change the plan") {
  const auto p = scenarios::evolution_example();
  const auto targets = drift_targets(p, default_tracked_kinds(), 1024);
  const auto trace = generate_drift(0, 1000, targets, DriftRegime::constant(0.03));
  const auto r = run_evolution(p, 1000, trace, TrackingSchedule());
  CHECK(r.plan_changes == 0);
  CHECK(r.final_plan.choices == r.initial_plan.choices);
  CHECK(r.adaptive_mean_throughput == r.static_mean_throughput);
}

TEST_CASE("evolution under the default regime") {
  const auto p = scenarios::evolution_example();
  const auto targets = drift_targets(p, default_tracked_kinds(), 1024);
  const auto trace = generate_drift(5, 1000, targets);
  const auto r = run_evolution(p, 1000, trace, TrackingSchedule());

  REQUIRE(r.log.size() == 1000);
  std::int64_t tracked = 0, resolved = 0;
  for (const auto& e : r.log) {
    tracked += e.tracked;
    resolved += e.resolved;
    if (e.changed) CHECK(e.tracked);
    if (!e.tracked) CHECK(e.wall_ms == 0.0);
  }
  CHECK(tracked == r.tracking_iterations);
  CHECK(resolved == tracked);
  CHECK(tracked == static_cast<std::int64_t>(tracking_iterations(512, 1000).size()));
  CHECK(r.plan_changes >= 1);
  CHECK(r.improvement() > 1.05);
  CHECK(r.adaptive_mean_throughput_charged <= r.adaptive_mean_throughput);
  CHECK(r.adaptive_overhead_ms <= r.static_overhead_ms + r.resolve_wall_ms);
}

TEST_CASE("the planner example has no room to improve") {
  const auto p = scenarios::planner_example();
  const auto targets = drift_targets(p, default_tracked_kinds(), 1024);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto trace = generate_drift(seed, 300, targets);
    const auto r = run_evolution(p, 300, trace, TrackingSchedule());
    CHECK(r.adaptive_mean_throughput >= r.static_mean_throughput);
  }
}

TEST_CASE("tracking only once freezes the plan after the first iteration") {
  const auto p = scenarios::evolution_example();
  const auto targets = drift_targets(p, default_tracked_kinds(), 1024);
  const auto trace = generate_drift(2, 400, targets);
  const auto r = run_evolution(p, 400, trace, TrackingSchedule::first_only());
  CHECK(r.tracking_iterations == 1);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    CHECK_FALSE(r.log[i].tracked);
    CHECK_FALSE(r.log[i].changed);
  }

  const auto flat = generate_drift(2, 400, targets, DriftRegime::constant(0.03));
  const auto same = run_evolution(p, 400, flat, TrackingSchedule::first_only());
  CHECK(same.adaptive_mean_throughput == same.static_mean_throughput);
}

TEST_CASE("evolution needs drift for every tracked operator") {
  const auto p = scenarios::evolution_example();
  DriftTrace empty;
  CHECK_THROWS_AS(run_evolution(p, 10, empty, TrackingSchedule()), ValidationError);
  const auto short_trace = generate_drift(1, 5, drift_targets(p, default_tracked_kinds(), 1024));
  CHECK_THROWS_AS(run_evolution(p, 10, short_trace, TrackingSchedule()), ValidationError);
  CHECK_THROWS_AS(run_evolution(p, 0, short_trace, TrackingSchedule()), ValidationError);
}
