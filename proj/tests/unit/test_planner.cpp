#include <doctest.h>

#include <cmath>

#include "memplan/error.hpp"
#include "memplan/planner.hpp"
#include "memplan/scenarios.hpp"
#include "memplan/units.hpp"

using namespace memplan;
using PC = PolicyChoice;

TEST_CASE("the five-operator example") {
  const auto p = scenarios::planner_example();
  const Plan plan = solve(p);
  CHECK(plan.choices == std::vector{PC::Retain, PC::Recompute, PC::Compress, PC::Compress, PC::Recompute});
  CHECK(plan.objective_ms == doctest::Approx(0.72).epsilon(1e-12));
  CHECK(plan.total_bytes <= p.mem_budget_bytes);
  CHECK(plan.activation_bytes == 8 * kMiB + 2 * compressed_bytes(p.operators[2]));
  CHECK_FALSE(verify(p, plan).has_value());

  const Plan bf = brute_force(p);
  CHECK(bf.choices == plan.choices);
  CHECK(bf.objective_ms == plan.objective_ms);
}

TEST_CASE("loose budget retains everything") {
  auto p = scenarios::planner_example();
  p.mem_budget_bytes = 1 * kGiB;
  const Plan plan = solve(p);
  CHECK(plan.choices == std::vector<PC>(5, PC::Retain));
  CHECK(plan.objective_ms == 0.0);

  ModelProfile single;
  single.operators = {{1, "x", LayerKind::Other, 100, 1.0, 0.5, 0.5, 0.5}};
  single.mem_budget_bytes = 1000;
  CHECK(solve(single).choices == std::vector{PC::Retain});
}

TEST_CASE("infeasibility threshold is the compressed checkpoint") {
  auto p = scenarios::planner_example();
  p.static_mem_bytes = 1000;
  const std::int64_t floor = p.static_mem_bytes + compressed_bytes(p.operators[0]);
  CHECK(min_total_bytes(p) == floor);
  p.mem_budget_bytes = floor;
  const Plan tight = solve(p);
  CHECK(tight.choices == std::vector{PC::Compress, PC::Recompute, PC::Recompute, PC::Recompute, PC::Recompute});
  p.mem_budget_bytes = floor - 1;
  try {
    solve(p);
    FAIL("expected Infeasible");
  } catch (const Infeasible& e) {
    CHECK(e.min_total_bytes() == floor);
    CHECK(e.budget_bytes() == floor - 1);
  }
  CHECK_THROWS_AS(brute_force(p), Infeasible);
}

TEST_CASE("memory counts every layer") {
  auto p = scenarios::planner_example();
  p.n_layers = 3;
  p.mem_budget_bytes = 3 * 40 * kMiB;
  const Plan plan = solve(p);
  CHECK(plan.activation_bytes == 3 * plan_activation_bytes(scenarios::planner_example(), plan.choices));
  CHECK(plan.choices == solve(scenarios::planner_example()).choices);
}

TEST_CASE("ties prefer less memory, then recompute at the first operator") {
  ModelProfile p;
  // Operators 2 and 3 cost the same either way; only one can stay.
  p.operators = {
      {1, "a", LayerKind::Other, 10, 1.0, 0.5, 0.5, 0.5},
      {2, "b", LayerKind::Other, 10, 1.0, 0.5, 0.5, 0.5},
      {3, "c", LayerKind::Other, 10, 1.0, 0.5, 0.5, 0.5},
  };
  p.mem_budget_bytes = 20;
  // 1.0 per discarded op either way; recompute frees more memory than compress.
  const Plan plan = solve(p);
  CHECK(plan.objective_ms == 1.0);
  CHECK(plan.choices == std::vector{PC::Retain, PC::Recompute, PC::Retain});
  CHECK(brute_force(p).choices == plan.choices);
}

TEST_CASE("solver agrees with enumeration on random instances") {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    scenarios::RandomProfileOptions opts;
    opts.n_operators = 1 + seed % 8;
    opts.coarse_times = seed % 2 == 0;
    const auto p = scenarios::random_profile(seed, opts);
    const Plan a = solve(p);
    const Plan b = brute_force(p);
    REQUIRE(a.objective_ms == b.objective_ms);
    REQUIRE(a.choices == b.choices);
    REQUIRE_FALSE(verify(p, a).has_value());
  }
}

TEST_CASE("solver is deterministic") {
  const auto p = scenarios::realistic_block();
  const Plan a = solve(p);
  const Plan b = solve(p);
  CHECK(a.choices == b.choices);
  CHECK(a.objective_ms == b.objective_ms);
  CHECK(a.solver.nodes == b.solver.nodes);
}

TEST_CASE("enumeration refuses large instances") {
  scenarios::RandomProfileOptions opts;
  opts.n_operators = 13;
  CHECK_THROWS_AS(brute_force(scenarios::random_profile(1, opts)), TooLarge);
}

TEST_CASE("verify reports the first broken constraint") {
  const auto p = scenarios::planner_example();
  const Plan good = solve(p);
  CHECK_FALSE(verify(p, good).has_value());

  Plan bad = good;
  bad.choices.pop_back();
  auto v = verify(p, bad);
  REQUIRE(v);
  CHECK(v->constraint == Constraint::OnePolicyPerOperator);

  bad = evaluate_plan(p, {PC::Recompute, PC::Recompute, PC::Compress, PC::Compress, PC::Recompute});
  v = verify(p, bad);
  REQUIRE(v);
  CHECK(v->constraint == Constraint::CheckpointResident);

  // One byte over: retain T4 instead of recomputing, with the budget set just
  // below the resulting footprint.
  auto tight = p;
  const Plan over = evaluate_plan(p, {PC::Retain, PC::Recompute, PC::Compress, PC::Compress, PC::Retain});
  tight.mem_budget_bytes = over.total_bytes - 1;
  v = verify(tight, over);
  REQUIRE(v);
  CHECK(v->constraint == Constraint::MemoryBudget);
  CHECK(v->lhs == static_cast<double>(over.total_bytes));
  CHECK(v->rhs == static_cast<double>(tight.mem_budget_bytes));
  CHECK(v->message.find(std::to_string(over.total_bytes)) != std::string::npos);

  bad = good;
  bad.activation_bytes += 1;
  v = verify(p, bad);
  REQUIRE(v);
  CHECK(v->constraint == Constraint::ActivationAccounting);

  bad = good;
  bad.objective_ms += 1e-6;
  v = verify(p, bad);
  REQUIRE(v);
  CHECK(v->constraint == Constraint::Objective);
}

TEST_CASE("bandwidths of the table rows") {
  const auto bw = bandwidths(scenarios::table1_profile());
  REQUIRE(bw.size() == 4);
  CHECK(std::floor(*bw[0].recompute) == 266);
  CHECK(std::floor(*bw[0].compress) == 194);
  CHECK(*bw[0].recompute == doctest::Approx(96.0 / 0.36));
  CHECK(*bw[0].compress == doctest::Approx(72.0 / 0.37));
  CHECK(bw[0].preferred == PC::Recompute);
  CHECK(bw[1].preferred == PC::Compress);
  CHECK(bw[2].preferred == PC::Compress);
  CHECK(bw[3].preferred == PC::Recompute);

  ModelProfile p = scenarios::table1_profile();
  p.operators[1].compression_rate = 1.0;
  CHECK(*bandwidths(p)[1].compress == 0.0);
  CHECK(bandwidths(p)[1].preferred == PC::Recompute);
  p.operators[1].compute_time_ms = 0.0;
  CHECK_FALSE(bandwidths(p)[1].recompute.has_value());
}

TEST_CASE("plans round trip through json") {
  const auto p = scenarios::planner_example();
  const Plan plan = solve(p);
  const Plan back = plan_from_json(plan_to_json(plan));
  CHECK(back.choices == plan.choices);
  CHECK(back.objective_ms == plan.objective_ms);
  CHECK(back.total_bytes == plan.total_bytes);
  CHECK(back.activation_bytes == plan.activation_bytes);

  auto doc = plan_to_json(plan);
  doc["choices"][0] = "discard";
  CHECK_THROWS_AS(plan_from_json(doc), ParseError);
  CHECK(parse_policy("compress") == PC::Compress);
  CHECK_FALSE(parse_policy("swap").has_value());
}
