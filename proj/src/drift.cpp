#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "memplan/codec.hpp"
#include "memplan/error.hpp"
#include "memplan/simulator.hpp"

namespace memplan {

namespace {

// Box-Muller over raw mt19937_64 output; std::normal_distribution is not
// specified tightly enough to give identical traces across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::seed_seq& seq) : engine_(seq) {}

  double operator()() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  // Uniform in (0, 1].
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool cached_ = false;
};

DriftSeries generate_series(std::uint64_t seed, std::int64_t iterations, const DriftTarget& target,
                            const DriftRegime& regime) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(target.operator_id)};
  Gaussian noise(seq);

  DriftSeries s{target.operator_id, target.rows, target.cols, {}};
  s.samples.reserve(static_cast<std::size_t>(iterations));
  const double rho = std::clamp(regime.smoothing, 0.0, 0.999);
  const double innovation = std::sqrt(1.0 - rho * rho);
  double z = 0.0;
  for (std::int64_t t = 1; t <= iterations; ++t) {
    z = (t == 1) ? noise() : rho * z + innovation * noise();
    const double td = static_cast<double>(t);
    const double trend = regime.settle_fraction +
                         (regime.start_fraction - regime.settle_fraction) * std::exp(-td / regime.decay_iterations);
    const double fraction = trend + regime.amplitude * z / std::sqrt(td);
    const double raw = std::nearbyint(fraction * target.cols);
    const auto count = static_cast<std::uint32_t>(std::clamp(raw, 0.0, static_cast<double>(target.cols)));
    s.samples.push_back({t, count, codec::outlier_separated_rate(target.rows, target.cols, count)});
  }
  return s;
}

}  // namespace

const DriftSeries* DriftTrace::find(int operator_id) const noexcept {
  for (const auto& s : series)
    if (s.operator_id == operator_id) return &s;
  return nullptr;
}

std::int64_t DriftTrace::iterations() const noexcept {
  return series.empty() ? 0 : static_cast<std::int64_t>(series.front().samples.size());
}

std::vector<DriftTarget> drift_targets(const ModelProfile& p, std::span<const LayerKind> kinds, std::uint32_t cols) {
  if (cols == 0) throw ValidationError("channel count must be >= 1");
  std::vector<DriftTarget> targets;
  for (const auto& op : p.operators) {
    if (std::find(kinds.begin(), kinds.end(), op.kind) == kinds.end()) continue;
    const std::int64_t elements = op.mem_bytes / 2;
    if (op.mem_bytes % 2 != 0 || elements % cols != 0)
      throw ValidationError("operator id " + std::to_string(op.id) + " (" + std::to_string(op.mem_bytes) +
                            " bytes) is not a whole number of FP16 rows with " + std::to_string(cols) +
                            " channels");
    targets.push_back({op.id, static_cast<std::uint32_t>(elements / cols), cols});
  }
  return targets;
}

DriftTrace generate_drift(std::uint64_t seed, std::int64_t iterations, std::span<const DriftTarget> targets,
                          const DriftRegime& regime) {
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (!(regime.decay_iterations > 0.0)) throw ValidationError("decay_iterations must be > 0");
  DriftTrace trace;
  for (const auto& t : targets) trace.series.push_back(generate_series(seed, iterations, t, regime));
  return trace;
}

DriftTrace generate_drift(std::uint64_t seed, std::int64_t iterations, std::uint32_t rows, std::uint32_t cols,
                          const DriftRegime& regime) {
  const DriftTarget target{1, rows, cols};
  return generate_drift(seed, iterations, std::span<const DriftTarget>(&target, 1), regime);
}

}  // namespace memplan
