#include "memplan/planner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <sstream>

#include "memplan/error.hpp"

namespace memplan {

namespace {

constexpr std::array kAllChoices{PolicyChoice::Recompute, PolicyChoice::Compress, PolicyChoice::Retain};
constexpr double kMiB = 1024.0 * 1024.0;

double choice_cost(const OperatorProfile& op, PolicyChoice c) {
  switch (c) {
    case PolicyChoice::Recompute: return op.compute_time_ms;
    case PolicyChoice::Compress: return op.codec_time_ms();
    case PolicyChoice::Retain: return 0.0;
  }
  return 0.0;
}

// Per-block resident bytes for one operator.
std::int64_t choice_bytes(const OperatorProfile& op, PolicyChoice c) {
  switch (c) {
    case PolicyChoice::Recompute: return 0;
    case PolicyChoice::Compress: return compressed_bytes(op);
    case PolicyChoice::Retain: return op.mem_bytes;
  }
  return 0;
}

bool allowed(std::size_t index, PolicyChoice c) { return index != 0 || c != PolicyChoice::Recompute; }

// Total order used for tie-breaking between complete assignments.
struct Candidate {
  double objective = 0.0;
  std::int64_t block_bytes = 0;
  std::vector<PolicyChoice> choices;

  bool better_than(const Candidate& o) const {
    if (objective != o.objective) return objective < o.objective;
    if (block_bytes != o.block_bytes) return block_bytes < o.block_bytes;
    return std::lexicographical_compare(choices.begin(), choices.end(), o.choices.begin(), o.choices.end());
  }
};

void ensure_feasible(const ModelProfile& p) {
  const std::int64_t min_total = min_total_bytes(p);
  if (min_total > p.mem_budget_bytes) throw Infeasible(min_total, p.mem_budget_bytes);
}

Plan finish(const ModelProfile& p, std::vector<PolicyChoice> choices, std::int64_t nodes,
            std::chrono::steady_clock::time_point start) {
  Plan plan = evaluate_plan(p, std::move(choices));
  plan.solver.nodes = nodes;
  plan.solver.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return plan;
}

struct Option {
  PolicyChoice choice;
  double cost;
  std::int64_t bytes;
};

// One step along an operator's lower convex hull in (bytes, cost): spend
// `bytes` more memory to save `saving` milliseconds.
struct Increment {
  std::size_t op;
  std::int64_t bytes;
  double saving;
  double efficiency;
};

class BranchAndBound {
 public:
  explicit BranchAndBound(const ModelProfile& p) : n_(p.size()) {
    capacity_ = p.activation_capacity() / p.n_layers;
    options_.resize(n_);
    base_bytes_suffix_.assign(n_ + 1, 0);
    base_cost_suffix_.assign(n_ + 1, 0.0);

    std::vector<std::int64_t> base_bytes(n_);
    std::vector<double> base_cost(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& op = p.operators[i];
      std::vector<Option> opts;
      for (auto c : kAllChoices)
        if (allowed(i, c)) opts.push_back({c, choice_cost(op, c), choice_bytes(op, c)});
      // Cheapest first finds a strong incumbent early.
      std::stable_sort(opts.begin(), opts.end(), [](const Option& a, const Option& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.bytes < b.bytes;
      });
      options_[i] = opts;
      add_hull(i, opts, base_bytes[i], base_cost[i]);
    }
    for (std::size_t i = n_; i-- > 0;) {
      base_bytes_suffix_[i] = base_bytes_suffix_[i + 1] + base_bytes[i];
      base_cost_suffix_[i] = base_cost_suffix_[i + 1] + base_cost[i];
    }
    std::stable_sort(increments_.begin(), increments_.end(),
                     [](const Increment& a, const Increment& b) { return a.efficiency > b.efficiency; });
  }

  std::vector<PolicyChoice> run() {
    current_.assign(n_, PolicyChoice::Retain);
    descend(0, 0, 0.0);
    return best_->choices;
  }

  std::int64_t nodes() const noexcept { return nodes_; }

 private:
  void add_hull(std::size_t i, std::vector<Option> opts, std::int64_t& base_bytes, double& base_cost) {
    std::sort(opts.begin(), opts.end(), [](const Option& a, const Option& b) {
      if (a.bytes != b.bytes) return a.bytes < b.bytes;
      return a.cost < b.cost;
    });
    // Pareto front: more memory must buy strictly lower cost.
    std::vector<Option> front;
    for (const auto& o : opts)
      if (front.empty() || o.cost < front.back().cost) {
        if (!front.empty() && o.bytes == front.back().bytes) continue;
        front.push_back(o);
      }
    // Lower convex hull of the front.
    std::vector<Option> hull;
    for (const auto& o : front) {
      while (hull.size() >= 2) {
        const auto& a = hull[hull.size() - 2];
        const auto& b = hull.back();
        const double eff_ab = (a.cost - b.cost) / static_cast<double>(b.bytes - a.bytes);
        const double eff_bo = (b.cost - o.cost) / static_cast<double>(o.bytes - b.bytes);
        if (eff_bo >= eff_ab) hull.pop_back();
        else break;
      }
      hull.push_back(o);
    }
    base_bytes = hull.front().bytes;
    base_cost = hull.front().cost;
    for (std::size_t k = 1; k < hull.size(); ++k) {
      const std::int64_t db = hull[k].bytes - hull[k - 1].bytes;
      const double saving = hull[k - 1].cost - hull[k].cost;
      increments_.push_back({i, db, saving, saving / static_cast<double>(db)});
    }
  }

  // Linear-relaxation bound on the cost of operators [depth, n).
  double relaxed_cost(std::size_t depth, std::int64_t free_bytes) const {
    double cost = base_cost_suffix_[depth];
    for (const auto& inc : increments_) {
      if (inc.op < depth) continue;
      if (free_bytes <= 0) break;
      if (inc.bytes <= free_bytes) {
        cost -= inc.saving;
        free_bytes -= inc.bytes;
      } else {
        cost -= inc.saving * static_cast<double>(free_bytes) / static_cast<double>(inc.bytes);
        break;
      }
    }
    return cost;
  }

  bool prunable(double bound) const {
    if (!best_) return false;
    const double slack = 1e-10 * std::max(1.0, std::fabs(best_->objective));
    return bound > best_->objective + slack;
  }

  void descend(std::size_t depth, std::int64_t used, double cost) {
    ++nodes_;
    if (depth == n_) {
      Candidate cand{cost, used, current_};
      if (!best_ || cand.better_than(*best_)) best_ = std::move(cand);
      return;
    }
    const std::int64_t free_bytes = capacity_ - used - base_bytes_suffix_[depth];
    if (free_bytes < 0) return;
    if (prunable(cost + relaxed_cost(depth, free_bytes))) return;

    for (const auto& o : options_[depth]) {
      const std::int64_t next_used = used + o.bytes;
      if (next_used + base_bytes_suffix_[depth + 1] > capacity_) continue;
      current_[depth] = o.choice;
      descend(depth + 1, next_used, cost + o.cost);
    }
  }

  std::size_t n_;
  std::int64_t capacity_ = 0;
  std::vector<std::vector<Option>> options_;
  std::vector<Increment> increments_;
  std::vector<std::int64_t> base_bytes_suffix_;
  std::vector<double> base_cost_suffix_;
  std::vector<PolicyChoice> current_;
  std::optional<Candidate> best_;
  std::int64_t nodes_ = 0;
};

}  // namespace

std::string_view to_string(PolicyChoice c) noexcept {
  switch (c) {
    case PolicyChoice::Recompute: return "recompute";
    case PolicyChoice::Compress: return "compress";
    case PolicyChoice::Retain: return "retain";
  }
  return "retain";
}

std::optional<PolicyChoice> parse_policy(std::string_view name) noexcept {
  for (auto c : kAllChoices)
    if (name == to_string(c)) return c;
  return std::nullopt;
}

std::string_view to_string(Constraint c) noexcept {
  switch (c) {
    case Constraint::OnePolicyPerOperator: return "one-policy-per-operator";
    case Constraint::CheckpointResident: return "checkpoint-resident";
    case Constraint::MemoryBudget: return "memory-budget";
    case Constraint::ActivationAccounting: return "activation-accounting";
    case Constraint::Objective: return "objective";
  }
  return "objective";
}

double plan_objective(const ModelProfile& p, std::span<const PolicyChoice> choices) {
  double total = 0.0;
  for (std::size_t i = 0; i < choices.size() && i < p.size(); ++i)
    total += choice_cost(p.operators[i], choices[i]);
  return total;
}

std::int64_t plan_activation_bytes(const ModelProfile& p, std::span<const PolicyChoice> choices) {
  std::int64_t block = 0;
  for (std::size_t i = 0; i < choices.size() && i < p.size(); ++i)
    block += choice_bytes(p.operators[i], choices[i]);
  return block * p.n_layers;
}

Plan evaluate_plan(const ModelProfile& p, std::vector<PolicyChoice> choices) {
  Plan plan;
  plan.objective_ms = plan_objective(p, choices);
  plan.activation_bytes = plan_activation_bytes(p, choices);
  plan.total_bytes = p.static_mem_bytes + plan.activation_bytes;
  plan.choices = std::move(choices);
  return plan;
}

std::int64_t min_total_bytes(const ModelProfile& p) {
  const auto& first = p.operators.front();
  return p.static_mem_bytes + p.n_layers * std::min(compressed_bytes(first), first.mem_bytes);
}

Plan solve(const ModelProfile& p) {
  const auto start = std::chrono::steady_clock::now();
  validate(p);
  ensure_feasible(p);
  BranchAndBound bnb(p);
  auto choices = bnb.run();
  return finish(p, std::move(choices), bnb.nodes(), start);
}

Plan brute_force(const ModelProfile& p) {
  const auto start = std::chrono::steady_clock::now();
  validate(p);
  if (p.size() > kBruteForceMaxOperators)
    throw TooLarge("brute_force enumerates 3^N assignments; N = " + std::to_string(p.size()) +
                   " exceeds " + std::to_string(kBruteForceMaxOperators));
  ensure_feasible(p);

  const std::size_t n = p.size();
  const std::int64_t capacity = p.activation_capacity();
  std::vector<PolicyChoice> current(n, PolicyChoice::Recompute);
  current[0] = PolicyChoice::Compress;
  std::optional<Candidate> best;
  std::int64_t visited = 0;

  while (true) {
    ++visited;
    const std::int64_t act = plan_activation_bytes(p, current);
    if (act <= capacity) {
      Candidate cand{plan_objective(p, current), act / p.n_layers, current};
      if (!best || cand.better_than(*best)) best = std::move(cand);
    }
    // Odometer over {R, C, T}, operator 1 restricted to {C, T}.
    std::size_t i = n;
    while (i-- > 0) {
      if (current[i] != PolicyChoice::Retain) {
        current[i] = static_cast<PolicyChoice>(static_cast<int>(current[i]) + 1);
        break;
      }
      current[i] = i == 0 ? PolicyChoice::Compress : PolicyChoice::Recompute;
      if (i == 0) {
        i = n;  // wrapped around: done
        break;
      }
    }
    if (i == n) break;
  }
  return finish(p, std::move(best->choices), visited, start);
}

std::optional<Violation> verify(const ModelProfile& p, const Plan& plan) {
  const auto n = static_cast<double>(p.size());
  if (plan.choices.size() != p.size())
    return Violation{Constraint::OnePolicyPerOperator,
                     "plan has " + std::to_string(plan.choices.size()) + " choices for " +
                         std::to_string(p.size()) + " operators",
                     static_cast<double>(plan.choices.size()), n};
  for (std::size_t i = 0; i < plan.choices.size(); ++i)
    if (static_cast<int>(plan.choices[i]) > 2)
      return Violation{Constraint::OnePolicyPerOperator,
                       "operator " + std::to_string(i + 1) + " has no valid policy", 0.0, 1.0};
  if (plan.choices.front() == PolicyChoice::Recompute)
    return Violation{Constraint::CheckpointResident,
                     "checkpoint operator 1 must be retained or compressed, not recomputed", 1.0, 0.0};

  const std::int64_t act = plan_activation_bytes(p, plan.choices);
  const std::int64_t total = p.static_mem_bytes + act;
  if (total > p.mem_budget_bytes)
    return Violation{Constraint::MemoryBudget,
                     "static + activation = " + std::to_string(total) + " bytes exceeds budget " +
                         std::to_string(p.mem_budget_bytes) + " bytes",
                     static_cast<double>(total), static_cast<double>(p.mem_budget_bytes)};
  if (plan.activation_bytes != act)
    return Violation{Constraint::ActivationAccounting,
                     "plan reports " + std::to_string(plan.activation_bytes) +
                         " activation bytes, recomputed " + std::to_string(act),
                     static_cast<double>(plan.activation_bytes), static_cast<double>(act)};
  if (plan.total_bytes != total)
    return Violation{Constraint::ActivationAccounting,
                     "plan reports " + std::to_string(plan.total_bytes) + " total bytes, recomputed " +
                         std::to_string(total),
                     static_cast<double>(plan.total_bytes), static_cast<double>(total)};

  const double obj = plan_objective(p, plan.choices);
  if (std::fabs(obj - plan.objective_ms) > 1e-9 * std::max(1.0, std::fabs(obj))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "plan reports objective " << plan.objective_ms << " ms, recomputed " << obj << " ms";
    return Violation{Constraint::Objective, msg.str(), plan.objective_ms, obj};
  }
  return std::nullopt;
}

std::vector<Bandwidth> bandwidths(const ModelProfile& p) {
  std::vector<Bandwidth> out;
  out.reserve(p.size());
  for (const auto& op : p.operators) {
    Bandwidth b;
    const double mib = static_cast<double>(op.mem_bytes) / kMiB;
    if (op.compute_time_ms > 0.0) b.recompute = mib / op.compute_time_ms;
    if (op.codec_time_ms() > 0.0) b.compress = mib * (1.0 - op.compression_rate) / op.codec_time_ms();
    if (b.compress && (!b.recompute || *b.compress > *b.recompute)) b.preferred = PolicyChoice::Compress;
    out.push_back(b);
  }
  return out;
}

nlohmann::json plan_to_json(const Plan& plan) {
  nlohmann::json choices = nlohmann::json::array();
  for (auto c : plan.choices) choices.push_back(std::string(to_string(c)));
  return {
      {"choices", std::move(choices)},
      {"objective_ms", plan.objective_ms},
      {"activation_bytes", plan.activation_bytes},
      {"total_bytes", plan.total_bytes},
      {"solver", {{"nodes", plan.solver.nodes}, {"wall_ms", plan.solver.wall_ms}}},
  };
}

Plan plan_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.is_object()) throw ParseError("plan must be a JSON object");
    for (const auto& item : doc.items())
      if (item.key() != "choices" && item.key() != "objective_ms" && item.key() != "activation_bytes" &&
          item.key() != "total_bytes" && item.key() != "solver")
        throw ParseError("unknown field \"" + item.key() + "\" in plan");
    Plan plan;
    for (const auto& c : doc.at("choices")) {
      const auto parsed = parse_policy(c.get<std::string>());
      if (!parsed) throw ParseError("unknown policy \"" + c.get<std::string>() + "\"");
      plan.choices.push_back(*parsed);
    }
    plan.objective_ms = doc.at("objective_ms").get<double>();
    plan.activation_bytes = doc.at("activation_bytes").get<std::int64_t>();
    plan.total_bytes = doc.at("total_bytes").get<std::int64_t>();
    if (doc.contains("solver")) {
      plan.solver.nodes = doc["solver"].at("nodes").get<std::int64_t>();
      plan.solver.wall_ms = doc["solver"].at("wall_ms").get<double>();
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed plan: ") + e.what());
  }
}

}  // namespace memplan
