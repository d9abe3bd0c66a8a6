#include "memplan/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace memplan {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

void write_steps_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "batch,strategy,iteration_ms,overhead_ms,peak_bytes,throughput\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    os << r.batch << ',' << to_string(row.strategy) << ',' << format_double(r.iteration_ms) << ','
       << format_double(r.overhead_ms) << ',' << r.peak_bytes << ',' << format_double(r.throughput_samples_per_s)
       << '\n';
  }
}

void write_drift_csv(std::ostream& os, const DriftTrace& trace) {
  os << "iteration,operator_id,outlier_count,crate\n";
  std::vector<const DriftSeries*> order;
  for (const auto& s : trace.series) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(),
                   [](const DriftSeries* a, const DriftSeries* b) { return a->operator_id < b->operator_id; });
  const std::int64_t n = trace.iterations();
  for (std::int64_t t = 0; t < n; ++t) {
    for (const auto* s : order) {
      if (t >= static_cast<std::int64_t>(s->samples.size())) continue;
      const auto& sample = s->samples[static_cast<std::size_t>(t)];
      os << sample.iteration << ',' << s->operator_id << ',' << sample.outlier_count << ','
         << format_double(sample.crate) << '\n';
    }
  }
}

void write_evolution_csv(std::ostream& os, std::span<const EvolutionEntry> log) {
  os << "iteration,tracked,resolved,changed,objective_ms_old,objective_ms_new,wall_ms\n";
  for (const auto& e : log) {
    os << e.iteration << ',' << int{e.tracked} << ',' << int{e.resolved} << ',' << int{e.changed} << ','
       << format_double(e.objective_ms_old) << ',' << format_double(e.objective_ms_new) << ','
       << format_double(e.wall_ms) << '\n';
  }
}

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 440;
constexpr double kLeft = 80;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 60;
constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0.0 && (std::fabs(v) >= 1e6 || std::fabs(v) < 1e-3)) std::snprintf(buf, sizeof buf, "%.2e", v);
  else std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

}  // namespace

std::string render_svg(const LineChart& chart) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = 0.0, ymax = -INFINITY;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  const Range xr = padded(xmin, xmax);
  Range yr = padded(ymin, ymax);
  yr.hi += (yr.hi - yr.lo) * 0.05;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  const auto sy = [&](double y) { return kTop + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << px(kLeft + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(chart.title) << "</text>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    os << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(sy(fy)) << "\" x2=\"" << px(kLeft + plot_w) << "\" y2=\""
       << px(sy(fy)) << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(sy(fy) + 4) << "\" text-anchor=\"end\">"
       << tick_label(fy) << "</text>\n";
    os << "<text x=\"" << px(sx(fx)) << "\" y=\"" << px(kTop + plot_h + 18) << "\" text-anchor=\"middle\">"
       << tick_label(fx) << "</text>\n";
  }
  os << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(kTop) << "\" width=\"" << px(plot_w) << "\" height=\""
     << px(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << px(kLeft + plot_w / 2) << "\" y=\"" << px(kHeight - 18) << "\" text-anchor=\"middle\">"
     << escape(chart.x_label) << "</text>\n";
  os << "<text transform=\"translate(20 " << px(kTop + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << (first ? "" : " ") << px(sx(s.x[i])) << ',' << px(sy(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    const double lx = kLeft + plot_w + 12;
    os << "<line x1=\"" << px(lx) << "\" y1=\"" << px(ly) << "\" x2=\"" << px(lx + 20) << "\" y2=\"" << px(ly)
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << px(lx + 26) << "\" y=\"" << px(ly + 4) << "\">" << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

LineChart throughput_chart(std::span<const SweepRow> rows) {
  LineChart chart{"Throughput vs batch size", "batch size", "samples / s", {}};
  std::map<Strategy, ChartSeries> by_strategy;
  for (const auto& row : rows) {
    auto& s = by_strategy[row.strategy];
    s.name = std::string(to_string(row.strategy));
    s.x.push_back(row.report.batch);
    s.y.push_back(row.report.throughput_samples_per_s);
  }
  for (auto& [strategy, s] : by_strategy) chart.series.push_back(std::move(s));
  return chart;
}

LineChart drift_chart(const DriftTrace& trace) {
  LineChart chart{"Outlier channels over training", "iteration", "outlier channels", {}};
  for (const auto& series : trace.series) {
    ChartSeries s{"op " + std::to_string(series.operator_id), {}, {}};
    for (const auto& sample : series.samples) {
      s.x.push_back(static_cast<double>(sample.iteration));
      s.y.push_back(sample.outlier_count);
    }
    chart.series.push_back(std::move(s));
  }
  return chart;
}

}  // namespace memplan
