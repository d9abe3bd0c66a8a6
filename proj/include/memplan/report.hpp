#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "memplan/evolution.hpp"
#include "memplan/simulator.hpp"

namespace memplan {

// Shortest representation that round-trips; identical on every platform.
std::string format_double(double v);

void write_steps_csv(std::ostream& os, std::span<const SweepRow> rows);
// Rows ordered by iteration, then operator id.
void write_drift_csv(std::ostream& os, const DriftTrace& trace);
void write_evolution_csv(std::ostream& os, std::span<const EvolutionEntry> log);

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ChartSeries> series;
};

std::string render_svg(const LineChart& chart);

// Samples per second against batch, one line per strategy.
LineChart throughput_chart(std::span<const SweepRow> rows);
// Outlier channel count against iteration, one line per operator.
LineChart drift_chart(const DriftTrace& trace);

}  // namespace memplan
