#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memplan/profile.hpp"

namespace memplan {

// Values match the policy index t of the R[i,t] decision variables.
enum class PolicyChoice : std::uint8_t {
  Recompute = 0,
  Compress = 1,
  Retain = 2,
};

std::string_view to_string(PolicyChoice c) noexcept;
std::optional<PolicyChoice> parse_policy(std::string_view name) noexcept;

struct SolverStats {
  std::int64_t nodes = 0;
  double wall_ms = 0.0;
};

struct Plan {
  std::vector<PolicyChoice> choices;
  // Per-block overhead: recompute time of recomputed operators plus
  // compress + decompress time of compressed ones.
  double objective_ms = 0.0;
  // All layers: n_layers x per-block resident activation bytes.
  std::int64_t activation_bytes = 0;
  std::int64_t total_bytes = 0;
  SolverStats solver;
};

// Per-block overhead of an assignment, summed in operator order. Every
// component that reports an objective goes through this.
double plan_objective(const ModelProfile& p, std::span<const PolicyChoice> choices);
// Resident activation bytes across all n_layers blocks.
std::int64_t plan_activation_bytes(const ModelProfile& p, std::span<const PolicyChoice> choices);
// Fills objective/activation/total for an arbitrary assignment (no
// feasibility check).
Plan evaluate_plan(const ModelProfile& p, std::vector<PolicyChoice> choices);

// Smallest total footprint any assignment can reach: checkpoint operator in
// its smaller form, everything else recomputed.
std::int64_t min_total_bytes(const ModelProfile& p);

// Exact solver. Minimizes the objective subject to one policy per operator,
// a resident checkpoint (operator 1 never recomputed) and the memory budget.
// Ties: fewer activation bytes, then Recompute < Compress < Retain compared
// from the first operator. Throws Infeasible.
Plan solve(const ModelProfile& p);

// Enumerates all 2 * 3^(N-1) assignments. Throws TooLarge for N > 12.
Plan brute_force(const ModelProfile& p);
inline constexpr std::size_t kBruteForceMaxOperators = 12;

enum class Constraint {
  OnePolicyPerOperator,
  CheckpointResident,
  MemoryBudget,
  ActivationAccounting,
  Objective,
};

std::string_view to_string(Constraint c) noexcept;

struct Violation {
  Constraint constraint;
  std::string message;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Re-derives every constraint and the objective from scratch and reports the
// first mismatch; nullopt means the plan is valid for `p`.
std::optional<Violation> verify(const ModelProfile& p, const Plan& plan);

struct Bandwidth {
  // Memory saved per millisecond, in MiB/ms; nullopt when the technique's
  // time is zero.
  std::optional<double> recompute;
  std::optional<double> compress;
  PolicyChoice preferred = PolicyChoice::Recompute;
};

std::vector<Bandwidth> bandwidths(const ModelProfile& p);

nlohmann::json plan_to_json(const Plan& plan);
Plan plan_from_json(const nlohmann::json& doc);

}  // namespace memplan
