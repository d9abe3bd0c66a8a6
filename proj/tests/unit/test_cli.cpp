#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "memplan/profile.hpp"
#include "memplan/scenarios.hpp"

using namespace memplan;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "memplan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Drops the last column (wall time) of every CSV line.
std::string without_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("memplan_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string str(const std::string& leaf = "") const { return (leaf.empty() ? path_ : path_ / leaf).string(); }

 private:
  fs::path path_;
};

std::string write_profile(const TempDir& dir, const std::string& name, const ModelProfile& p) {
  const auto path = dir.path() / (name + ".json");
  save_profile(p, path);
  return path.string();
}

}  // namespace

TEST_CASE("plan prints the per-operator choices") {
  TempDir dir("plan");
  const auto profile = write_profile(dir, "example", scenarios::planner_example());
  const auto r = run({"plan", "--profile", profile, "--out", dir.str("out")});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("0.7200 ms") != std::string::npos);
  CHECK(r.out.find("T1") != std::string::npos);
  CHECK(r.out.find("recompute") != std::string::npos);
  CHECK(fs::exists(dir.path() / "out" / "plan.json"));

  const auto loose = run({"plan", "--profile", profile, "--budget", "1GiB"});
  CHECK(loose.code == cli::kExitOk);
  CHECK(loose.out.find("all retain, zero overhead") != std::string::npos);

  const auto tight = run({"plan", "--profile", profile, "--budget", "1MiB"});
  CHECK(tight.code == cli::kExitInfeasible);
  CHECK(tight.err.find("minimum achievable memory: 2.00 MiB") != std::string::npos);
}

TEST_CASE("input errors exit with 1") {
  TempDir dir("errors");
  std::ofstream(dir.path() / "bad.json") << R"({"n_layers": 1})";
  auto r = run({"plan", "--profile", dir.str("bad.json")});
  CHECK(r.code == cli::kExitInputError);
  CHECK(r.err.find("missing field") != std::string::npos);

  auto p = scenarios::planner_example();
  p.operators[2].compression_rate = 3.0;
  auto j = profile_to_json(p);
  std::ofstream(dir.path() / "rate.json") << j.dump();
  r = run({"plan", "--profile", dir.str("rate.json")});
  CHECK(r.code == cli::kExitInputError);
  CHECK(r.err.find("compression_rate") != std::string::npos);

  CHECK(run({"plan", "--profile", dir.str("missing.json")}).code == cli::kExitInputError);
  CHECK(run({"plan"}).code == cli::kExitInputError);
  CHECK(run({"frobnicate"}).code == cli::kExitInputError);
  CHECK(run({}).code == cli::kExitInputError);
  const auto profile = write_profile(dir, "ok", scenarios::planner_example());
  CHECK(run({"plan", "--profile", profile, "--budget", "12.3"}).code == cli::kExitInputError);
  CHECK(run({"simulate", "--profile", profile, "--batch", "4:2"}).code == cli::kExitInputError);
  CHECK(run({"evolve", "--profile", profile, "--max-interval", "100"}).code == cli::kExitInputError);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("simulate writes sorted step rows and is reproducible") {
  TempDir dir("simulate");
  const auto profile = write_profile(dir, "gpt", scenarios::gpt345m_like());
  const auto a = run({"simulate", "--profile", profile, "--batch", "1:16", "--iterations", "50", "--seed", "7",
                      "--out", dir.str("a"), "--charts"});
  REQUIRE(a.code == cli::kExitOk);
  const auto b = run({"simulate", "--profile", profile, "--batch", "1:16", "--iterations", "50", "--seed", "7",
                      "--out", dir.str("b"), "--charts"});
  REQUIRE(b.code == cli::kExitOk);
  for (const char* f : {"steps.csv", "drift.csv", "throughput.svg", "drift.svg"})
    CHECK(slurp(dir.path() / "a" / f) == slurp(dir.path() / "b" / f));
  CHECK(without_last_column(slurp(dir.path() / "a" / "evolution.csv")) ==
        without_last_column(slurp(dir.path() / "b" / "evolution.csv")));

  const std::string steps = slurp(dir.path() / "a" / "steps.csv");
  CHECK(steps.rfind("batch,strategy,iteration_ms,overhead_ms,peak_bytes,throughput\n", 0) == 0);
  CHECK(steps.find("16,optimal,") != std::string::npos);
  CHECK(steps.find("9,retain-all,") == std::string::npos);

  const auto c = run({"simulate", "--profile", profile, "--iterations", "50", "--seed", "8", "--out", dir.str("c")});
  REQUIRE(c.code == cli::kExitOk);
  CHECK(slurp(dir.path() / "a" / "drift.csv") != slurp(dir.path() / "c" / "drift.csv"));
  CHECK_FALSE(fs::exists(dir.path() / "c" / "drift.svg"));
}

TEST_CASE("a single iteration gives a single evolution row") {
  TempDir dir("single");
  const auto profile = write_profile(dir, "evo", scenarios::evolution_example());
  const auto r = run({"evolve", "--profile", profile, "--iterations", "1", "--out", dir.str()});
  REQUIRE(r.code == cli::kExitOk);
  const auto log = slurp(dir.path() / "evolution.csv");
  CHECK(std::count(log.begin(), log.end(), '\n') == 2);
}

TEST_CASE("simulate with a saved plan") {
  TempDir dir("saved");
  const auto profile = write_profile(dir, "example", scenarios::planner_example());
  REQUIRE(run({"plan", "--profile", profile, "--out", dir.str()}).code == cli::kExitOk);
  const auto r = run({"simulate", "--profile", profile, "--plan", dir.str("plan.json")});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("1,plan,10.72,") != std::string::npos);
  const auto over = run({"simulate", "--profile", profile, "--plan", dir.str("plan.json"), "--batch", "1:2"});
  CHECK(over.code == cli::kExitInfeasible);
}

TEST_CASE("max-batch table") {
  TempDir dir("maxbatch");
  const auto big = write_profile(dir, "big", scenarios::gpt345m_like());
  auto r = run({"max-batch", "--profile", big, "--out", dir.str()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(slurp(dir.path() / "max_batch.csv") ==
        "strategy,max_batch\nretain-all,8\nfull-recompute,61\nall-compress,30\noptimal,218\n");

  const auto small = write_profile(dir, "small", scenarios::gpt117m_like());
  r = run({"max-batch", "--profile", small});
  CHECK(r.out.find("retain-all      57") != std::string::npos);
  CHECK(r.out.find("full-recompute  136") != std::string::npos);

  r = run({"max-batch", "--profile", small, "--budget", "1GiB"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("optimal         0") != std::string::npos);
}

TEST_CASE("evolve reports the comparison") {
  TempDir dir("evolve");
  const auto profile = write_profile(dir, "evo", scenarios::evolution_example());
  const auto r = run({"evolve", "--profile", profile, "--seed", "3", "--iterations", "300"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("plan changes: 3") != std::string::npos);
  CHECK(r.out.find("ratio 1.1") != std::string::npos);
  const auto frozen = run({"evolve", "--profile", profile, "--seed", "3", "--iterations", "300", "--no-tracking"});
  CHECK(frozen.out.find("tracking iterations: 1,") != std::string::npos);
  const auto bad_kind = run({"evolve", "--profile", profile, "--track", "conv"});
  CHECK(bad_kind.code == cli::kExitInputError);
}

TEST_CASE("codec-bench") {
  TempDir dir("codec");
  auto r = run({"codec-bench", "--scheme", "bitmask", "--rows", "64", "--cols", "64", "--out", dir.str()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("ratio 8,") != std::string::npos);
  CHECK(fs::exists(dir.path() / "codec_bench.csv"));

  r = run({"codec-bench", "--scheme", "symmetric", "--rows", "64", "--cols", "128"});
  CHECK(r.out.find("ratio 3.764705882352941") != std::string::npos);

  r = run({"codec-bench", "--kind", "linear", "--rows", "256", "--cols", "256", "--seed", "4"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("outlier channels 3") != std::string::npos);

  // Raw float32 input.
  std::vector<float> v(8 * 16, 0.5f);
  {
    std::ofstream f(dir.path() / "t.bin", std::ios::binary);
    f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
  }
  r = run({"codec-bench", "--scheme", "asymmetric", "--rows", "8", "--cols", "16", "--tensor", dir.str("t.bin")});
  CHECK(r.code == cli::kExitOk);
  r = run({"codec-bench", "--scheme", "asymmetric", "--rows", "8", "--cols", "17", "--tensor", dir.str("t.bin")});
  CHECK(r.code == cli::kExitInputError);
  CHECK(run({"codec-bench", "--scheme", "int8"}).code == cli::kExitInputError);
}
