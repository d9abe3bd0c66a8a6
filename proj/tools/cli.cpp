#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "memplan/codec.hpp"
#include "memplan/error.hpp"
#include "memplan/evolution.hpp"
#include "memplan/half.hpp"
#include "memplan/planner.hpp"
#include "memplan/profile.hpp"
#include "memplan/report.hpp"
#include "memplan/simulator.hpp"
#include "memplan/units.hpp"

namespace memplan::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string profile;
  std::string budget;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool charts = false;
};

struct SimulateArgs {
  std::string plan;
  std::string batch;
  std::int64_t iterations = 0;
  double efficiency_k = kDefaultEfficiencyK;
};

struct EvolveArgs {
  std::int64_t iterations = 1000;
  std::int64_t max_interval = TrackingSchedule::kDefaultMaxInterval;
  std::uint32_t hidden = 1024;
  std::vector<std::string> track;
  bool no_tracking = false;
};

struct CodecArgs {
  std::string scheme;
  std::string kind;
  std::string tensor;
  std::uint32_t rows = 2048;
  std::uint32_t cols = 2048;
  std::optional<std::uint32_t> group_size;
  double outlier_fraction = 0.01;
  double z_threshold = codec::kDefaultZThreshold;
  int repeats = 5;
};

// With starved_ok, a --budget at or below static memory is let through
// (max-batch reports zeros for it); the file itself must still validate.
ModelProfile load(const Common& c, bool starved_ok = false) {
  if (c.profile.empty()) throw ValidationError("--profile is required");
  ModelProfile p = load_profile(c.profile);
  if (!c.budget.empty()) {
    p.mem_budget_bytes = parse_size(c.budget);
    if (!(starved_ok && p.mem_budget_bytes <= p.static_mem_bytes)) validate(p);
  }
  return p;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << contents;
  if (!f) throw Error("failed writing " + path.string());
}

fs::path prepare_out(const Common& c) {
  fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string ms(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f ms", v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_plan(const Common& c, std::ostream& out) {
  const ModelProfile p = load(c);
  const Plan plan = solve(p);

  bool all_retain = true;
  out << pad("id", 5) << pad("name", 24) << pad("kind", 12) << pad("choice", 11) << "resident\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& o = p.operators[i];
    const auto choice = plan.choices[i];
    all_retain = all_retain && choice == PolicyChoice::Retain;
    const std::int64_t resident = choice == PolicyChoice::Retain     ? o.mem_bytes
                                  : choice == PolicyChoice::Compress ? compressed_bytes(o)
                                                                     : 0;
    out << pad(std::to_string(o.id), 5) << pad(o.name, 24) << pad(std::string(to_string(o.kind)), 12)
        << pad(std::string(to_string(choice)), 11) << format_bytes(resident) << '\n';
  }
  if (all_retain) out << "all retain, zero overhead\n";
  out << "overhead per block: " << ms(plan.objective_ms) << " (" << ms(plan.objective_ms * p.n_layers)
      << " per step over " << p.n_layers << " layers)\n";
  out << "memory: " << format_bytes(plan.total_bytes) << " of " << format_bytes(p.mem_budget_bytes)
      << " (activations " << format_bytes(plan.activation_bytes) << ")\n";

  if (!c.out_dir.empty()) {
    const auto dir = prepare_out(c);
    write_file(dir / "plan.json", plan_to_json(plan).dump(2) + "\n");
    out << "wrote " << (dir / "plan.json").string() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvolutionRun {
  DriftTrace drift;
  EvolutionResult result;
};

EvolutionRun evolve_profile(const ModelProfile& p, std::uint64_t seed, std::int64_t iterations,
                            const EvolveArgs& a) {
  std::vector<LayerKind> kinds = default_tracked_kinds();
  if (!a.track.empty()) {
    kinds.clear();
    for (const auto& name : a.track) {
      const auto k = parse_layer_kind(name);
      if (!k) throw ValidationError("unknown layer kind \"" + name + "\" in --track");
      kinds.push_back(*k);
    }
  }
  const auto targets = drift_targets(p, kinds, a.hidden);
  EvolutionRun run;
  run.drift = generate_drift(seed, iterations, targets);
  TrackingSchedule sched = a.no_tracking ? TrackingSchedule::first_only(kinds) : TrackingSchedule(a.max_interval, kinds);
  run.result = run_evolution(p, iterations, run.drift, std::move(sched));
  return run;
}

void print_evolution_summary(const EvolutionResult& r, std::ostream& out) {
  out << "tracking iterations: " << r.tracking_iterations << ", plan changes: " << r.plan_changes << '\n';
  out << "mean throughput: adaptive " << format_double(r.adaptive_mean_throughput) << " samples/s, static "
      << format_double(r.static_mean_throughput) << " samples/s, ratio " << format_double(r.improvement()) << '\n';
  out << "iterations over budget: adaptive " << r.adaptive_oom_iterations << ", static " << r.static_oom_iterations
      << '\n';
  out << "initial overhead per block " << ms(r.initial_plan.objective_ms) << ", final "
      << ms(r.final_plan.objective_ms) << '\n';
}

void write_evolution_outputs(const Common& c, const EvolutionRun& run, std::ostream& out) {
  if (c.out_dir.empty()) return;
  const auto dir = prepare_out(c);
  std::ostringstream drift_csv, log_csv;
  write_drift_csv(drift_csv, run.drift);
  write_evolution_csv(log_csv, run.result.log);
  write_file(dir / "drift.csv", drift_csv.str());
  write_file(dir / "evolution.csv", log_csv.str());
  out << "wrote " << (dir / "drift.csv").string() << ", " << (dir / "evolution.csv").string() << '\n';
  if (c.charts) {
    write_file(dir / "drift.svg", render_svg(drift_chart(run.drift)));
    out << "wrote " << (dir / "drift.svg").string() << '\n';
  }
}

int cmd_simulate(const Common& c, const SimulateArgs& a, const EvolveArgs& evolve_args, std::ostream& out) {
  const ModelProfile p = load(c);
  const BatchRange range =
      a.batch.empty() ? BatchRange{p.reference_batch, p.reference_batch} : parse_batch_range(a.batch);
  if (a.efficiency_k < 0.0 || !std::isfinite(a.efficiency_k))
    throw ValidationError("--efficiency-k must be a finite value >= 0");
  SimOptions opts;
  if (a.efficiency_k > 0.0) opts.efficiency_k = a.efficiency_k;

  std::ostringstream csv;
  std::vector<SweepRow> rows;
  if (!a.plan.empty()) {
    std::ifstream f(a.plan);
    if (!f) throw Error("cannot open plan " + a.plan);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(a.plan + ": " + e.what());
    }
    const Plan plan = plan_from_json(doc);
    // Charted under the optimal label; the CSV marks these rows "plan".
    csv << "batch,strategy,iteration_ms,overhead_ms,peak_bytes,throughput\n";
    for (int b = range.low; b <= range.high; ++b) {
      const StepReport r = simulate_step(p, plan, b, opts);
      csv << r.batch << ",plan," << format_double(r.iteration_ms) << ',' << format_double(r.overhead_ms) << ','
          << r.peak_bytes << ',' << format_double(r.throughput_samples_per_s) << '\n';
      rows.push_back({Strategy::Optimal, r});
    }
  } else {
    rows = sweep(p, range.low, range.high, kAllStrategies, opts);
    write_steps_csv(csv, rows);
  }

  std::optional<EvolutionRun> run;
  if (a.iterations > 0) run = evolve_profile(p, c.seed, a.iterations, evolve_args);

  if (c.out_dir.empty()) {
    out << csv.str();
  } else {
    const auto dir = prepare_out(c);
    write_file(dir / "steps.csv", csv.str());
    out << "wrote " << (dir / "steps.csv").string() << '\n';
    if (c.charts) {
      write_file(dir / "throughput.svg", render_svg(throughput_chart(rows)));
      out << "wrote " << (dir / "throughput.svg").string() << '\n';
    }
  }
  if (run) {
    print_evolution_summary(run->result, out);
    write_evolution_outputs(c, *run, out);
  }
  return kExitOk;
}

int cmd_evolve(const Common& c, const EvolveArgs& a, std::ostream& out) {
  const ModelProfile p = load(c);
  if (a.iterations < 1) throw ValidationError("--iterations must be >= 1");
  const EvolutionRun run = evolve_profile(p, c.seed, a.iterations, a);
  print_evolution_summary(run.result, out);
  write_evolution_outputs(c, run, out);
  return kExitOk;
}

int cmd_max_batch(const Common& c, std::ostream& out) {
  const ModelProfile p = load(c, true);
  std::ostringstream csv;
  csv << "strategy,max_batch\n";
  out << pad("strategy", 16) << "max batch\n";
  for (const Strategy s : kAllStrategies) {
    const int b = max_feasible_batch(p, s);
    out << pad(std::string(to_string(s)), 16) << b << '\n';
    csv << to_string(s) << ',' << b << '\n';
  }
  if (!c.out_dir.empty()) {
    const auto dir = prepare_out(c);
    write_file(dir / "max_batch.csv", csv.str());
    out << "wrote " << (dir / "max_batch.csv").string() << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

std::vector<float> read_tensor(const std::string& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error("cannot open tensor " + path);
  const auto size = static_cast<std::size_t>(f.tellg());
  if (size != count * 4)
    throw ValidationError(path + ": expected " + std::to_string(count * 4) + " bytes of float32, found " +
                          std::to_string(size));
  f.seekg(0);
  std::vector<float> v(count);
  std::vector<unsigned char> raw(size);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = std::uint32_t{raw[4 * i]} | std::uint32_t{raw[4 * i + 1]} << 8 |
                               std::uint32_t{raw[4 * i + 2]} << 16 | std::uint32_t{raw[4 * i + 3]} << 24;
    std::memcpy(&v[i], &bits, 4);
  }
  return v;
}

// FP16-representable Gaussian activations with a few loud channels, or a
// dropout keep-mask for the bit-packing scheme.
std::vector<float> synthetic_tensor(const CodecArgs& a, codec::Scheme scheme, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<float> v(static_cast<std::size_t>(a.rows) * a.cols);
  if (scheme == codec::Scheme::BitMask) {
    std::bernoulli_distribution keep(0.9);
    for (auto& x : v) x = keep(rng) ? 1.0f : 0.0f;
    return v;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> gain(a.cols, 1.0);
  const auto k = static_cast<std::size_t>(std::llround(a.outlier_fraction * a.cols));
  std::vector<std::uint32_t> channels(a.cols);
  for (std::uint32_t i = 0; i < a.cols; ++i) channels[i] = i;
  std::shuffle(channels.begin(), channels.end(), rng);
  for (std::size_t i = 0; i < std::min<std::size_t>(k, a.cols); ++i) gain[channels[i]] = 40.0;
  for (std::uint32_t r = 0; r < a.rows; ++r)
    for (std::uint32_t col = 0; col < a.cols; ++col)
      v[static_cast<std::size_t>(r) * a.cols + col] = round_to_half(static_cast<float>(normal(rng) * gain[col]));
  return v;
}

int cmd_codec_bench(const Common& c, const CodecArgs& a, std::ostream& out) {
  codec::SchemeChoice choice;
  if (!a.scheme.empty() && !a.kind.empty()) throw ValidationError("--scheme and --kind are mutually exclusive");
  if (!a.kind.empty()) {
    const auto k = parse_layer_kind(a.kind);
    if (!k) throw ValidationError("unknown layer kind \"" + a.kind + "\"");
    choice = codec::scheme_for(*k);
  } else {
    const auto s = codec::parse_scheme(a.scheme.empty() ? "outlier" : a.scheme);
    if (!s) throw ValidationError("unknown scheme \"" + a.scheme + "\" (symmetric, asymmetric, outlier, bitmask)");
    choice.scheme = *s;
    choice.group_size = *s == codec::Scheme::BitMask ? 0 : codec::kDefaultGroupSize;
  }
  if (a.group_size) choice.group_size = *a.group_size;
  choice.z_threshold = a.z_threshold;
  if (a.rows == 0 || a.cols == 0) throw ValidationError("--rows and --cols must be >= 1");
  if (a.repeats < 1) throw ValidationError("--repeats must be >= 1");
  if (!(a.outlier_fraction >= 0.0 && a.outlier_fraction <= 1.0))
    throw ValidationError("--outlier-fraction must be in [0, 1]");

  std::vector<float> values = a.tensor.empty() ? synthetic_tensor(a, choice.scheme, c.seed)
                                               : read_tensor(a.tensor, static_cast<std::size_t>(a.rows) * a.cols);
  const codec::ActivationMatrix x(a.rows, a.cols, std::move(values));
  const codec::CodecMeasurement m = codec::measure_codec(x, choice, a.repeats);

  out << "scheme " << codec::to_string(choice.scheme) << ", " << a.rows << " x " << a.cols;
  if (choice.scheme != codec::Scheme::BitMask)
    out << ", group "
        << (choice.group_size == codec::kPerChannel ? std::string("per-channel") : std::to_string(choice.group_size));
  out << ", outlier channels " << m.outlier_count << '\n';
  out << "compress " << ms(m.compress_ms) << ", decompress " << ms(m.decompress_ms) << ", ratio "
      << format_double(m.ratio) << ", rate " << format_double(m.rate) << '\n';

  if (!c.out_dir.empty()) {
    const auto dir = prepare_out(c);
    std::ostringstream csv;
    csv << "scheme,rows,cols,group_size,outlier_count,compress_ms,decompress_ms,ratio,compression_rate\n";
    csv << codec::to_string(choice.scheme) << ',' << a.rows << ',' << a.cols << ',' << choice.group_size << ','
        << m.outlier_count << ',' << format_double(m.compress_ms) << ',' << format_double(m.decompress_ms) << ','
        << format_double(m.ratio) << ',' << format_double(m.rate) << '\n';
    write_file(dir / "codec_bench.csv", csv.str());
    out << "wrote " << (dir / "codec_bench.csv").string() << '\n';
  }
  return kExitOk;
}

void add_common(CLI::App& sub, Common& c, bool needs_profile = true) {
  auto* opt = sub.add_option("--profile", c.profile, "Profile JSON");
  if (needs_profile) opt->required();
  sub.add_option("--budget", c.budget, "Override the memory budget (e.g. 40MiB, 16GiB)");
  sub.add_option("--out", c.out_dir, "Output directory");
  sub.add_option("--seed", c.seed, "Seed for every random choice");
  sub.add_flag("--charts", c.charts, "Also write SVG charts");
}

void add_evolve_options(CLI::App& sub, EvolveArgs& e) {
  sub.add_option("--max-interval", e.max_interval, "Largest gap between tracking iterations (power of two)");
  sub.add_option("--hidden", e.hidden, "Channels per row of tracked activations");
  sub.add_option("--track", e.track, "Layer kinds to re-evaluate (default linear layernorm gelu)");
  sub.add_flag("--no-tracking", e.no_tracking, "Track only at iteration 1");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Activation memory planner: recompute, compress or retain each tensor of a transformer block"};
  app.name("memplan");
  app.require_subcommand(1);

  Common common;
  SimulateArgs sim;
  EvolveArgs evo;
  CodecArgs codec_args;

  auto* plan = app.add_subcommand("plan", "Solve for the cheapest per-operator policy within the budget");
  add_common(*plan, common);

  auto* simulate = app.add_subcommand("simulate", "Replay training steps over a batch range");
  add_common(*simulate, common);
  simulate->add_option("--plan", sim.plan, "Simulate this plan instead of sweeping the built-in strategies");
  simulate->add_option("--batch", sim.batch, "Batch or range LO:HI (default: reference batch)");
  simulate->add_option("--iterations", sim.iterations, "Also run policy evolution for this many iterations");
  simulate->add_option("--efficiency-k", sim.efficiency_k, "Small-batch efficiency constant; 0 for linear");
  add_evolve_options(*simulate, evo);

  auto* max_batch = app.add_subcommand("max-batch", "Largest feasible batch for each strategy");
  add_common(*max_batch, common);

  auto* codec_bench = app.add_subcommand("codec-bench", "Measure a codec's ratio and timing");
  add_common(*codec_bench, common, false);
  codec_bench->add_option("--scheme", codec_args.scheme, "symmetric, asymmetric, outlier or bitmask");
  codec_bench->add_option("--kind", codec_args.kind, "Pick the scheme used for this layer kind");
  codec_bench->add_option("--tensor", codec_args.tensor, "Raw little-endian float32 tensor, rows x cols");
  codec_bench->add_option("--rows", codec_args.rows, "Rows (tokens)");
  codec_bench->add_option("--cols", codec_args.cols, "Columns (channels)");
  codec_bench->add_option("--group-size", codec_args.group_size, "Elements per scale; 0 for per-channel");
  codec_bench->add_option("--outlier-fraction", codec_args.outlier_fraction, "Loud channels in synthetic data");
  codec_bench->add_option("--z-threshold", codec_args.z_threshold, "Outlier Z-score threshold");
  codec_bench->add_option("--repeats", codec_args.repeats, "Timing repeats (minimum is reported)");

  auto* evolve = app.add_subcommand("evolve", "Run adaptive policy evolution against a drift trace");
  add_common(*evolve, common);
  evolve->add_option("--iterations", evo.iterations, "Training iterations");
  add_evolve_options(*evolve, evo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (plan->parsed()) return cmd_plan(common, out);
    if (simulate->parsed()) return cmd_simulate(common, sim, evo, out);
    if (max_batch->parsed()) return cmd_max_batch(common, out);
    if (codec_bench->parsed()) return cmd_codec_bench(common, codec_args, out);
    if (evolve->parsed()) return cmd_evolve(common, evo, out);
  } catch (const Infeasible& e) {
    err << "infeasible: " << e.what() << "\nminimum achievable memory: " << format_bytes(e.min_total_bytes())
        << " (" << e.min_total_bytes() << " bytes)\n";
    return kExitInfeasible;
  } catch (const InfeasiblePlan& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace memplan::cli
