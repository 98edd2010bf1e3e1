#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "storey/cli.hpp"
#include "storey/io.hpp"

using namespace storey;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// One small pipeline shared by every case below.
struct Pipeline {
  fs::path dir;

  std::string p(const std::string& name) const { return (dir / name).string(); }

  Pipeline() {
    dir = fs::temp_directory_path() / "storey_cli_tests";
    fs::remove_all(dir);
    fs::create_directories(dir);
    io::write_text(dir / "spec.json", R"({"schema_version": 1, "kind": "building-spec", "floors": 3,
      "width_m": 40, "depth_m": 25, "aps_per_floor": [6, 6, 6], "seed": 4})");
    io::write_text(dir / "traj.json", R"({"schema_version": 1, "kind": "trajectory", "scan_interval_s": 2,
      "segments": [{"floor": 1, "dwell_s": 20, "waypoints": [[5, 5], [35, 5], [35, 20], [5, 20]]},
                   {"floor": 2, "dwell_s": 20, "waypoints": [[5, 20], [35, 20], [20, 10]]},
                   {"floor": 3, "dwell_s": 20, "waypoints": [[20, 10], [5, 5], [35, 20]]}]})");
    io::write_text(dir / "walks.json", R"({"schema_version": 1, "kind": "trajectory", "scan_interval_s": 2,
      "random": {"walks": 12, "waypoints": 10, "dwell_s": 10}})");
    io::write_text(dir / "train.json", R"({"schema_version": 1, "kind": "train-config", "epochs": 3})");
    must({"simulate", "--spec", p("spec.json"), "--trajectory", p("traj.json"), "--out", p("trace.jsonl"),
          "--registry-out", p("registry.json"), "--seed", "3"});
    must({"simulate", "--spec", p("spec.json"), "--trajectory", p("walks.json"), "--out", p("walks.jsonl"),
          "--seed", "8"});
    must({"synth-train", "--registry", p("registry.json"), "--out", p("data.json"), "--per-floor", "40", "--width",
          "3", "--seed", "5"});
    must({"train-floor", "--dataset", p("data.json"), "--config", p("train.json"), "--out", p("floor.json"),
          "--loss-csv", p("loss.csv"), "--seed", "6"});
    must({"fit-rank", "--trace", p("walks.jsonl"), "--registry", p("registry.json"), "--out", p("rank.json")});
    must({"fit-quality", "--trace", p("walks.jsonl"), "--registry", p("registry.json"), "--rank-model",
          p("rank.json"), "--out", p("quality.json")});
  }

  static void must(const std::vector<std::string>& args) {
    const Result r = invoke(args);
    if (r.code != 0) FAIL(args.front() << " failed: " << r.err);
  }

  std::vector<std::string> locate(const std::string& out) const {
    return {"locate", "--trace", p("trace.jsonl"), "--registry", p("registry.json"), "--floor-model", p("floor.json"),
            "--rank-model", p("rank.json"), "--quality-model", p("quality.json"), "--out", p(out)};
  }
};

const Pipeline& pipeline() {
  static const Pipeline pl;
  return pl;
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("pipeline produces fixes and metrics") {
  const Pipeline& pl = pipeline();
  const Result loc = invoke(pl.locate("fixes.jsonl") + std::vector<std::string>{"--config-out", pl.p("run.json")});
  REQUIRE(loc.code == 0);
  const io::Json echo = io::parse_json(loc.out);
  CHECK(echo["nf_s"] == 120.0);
  CHECK(echo["nl_s"] == 15.0);
  CHECK(echo["wf_db"] == 15.0);
  CHECK(echo["lthr"] == 0.98);
  CHECK(echo["wk_s"] == 60.0);
  CHECK(echo["grid_m"] == 0.5);
  CHECK(echo["faf"] == true);
  CHECK(echo["kf"] == true);

  const auto fixes = io::read_fixes(pl.p("fixes.jsonl"));
  const auto trace = io::read_trace(pl.p("trace.jsonl"));
  CHECK(fixes.size() == trace.size());

  const Result ev = invoke({"evaluate", "--fixes", pl.p("fixes.jsonl"), "--trace", pl.p("trace.jsonl"), "--out",
                         pl.p("metrics.json"), "--cdf", pl.p("cdf.csv"), "--config", pl.p("run.json")});
  REQUIRE(ev.code == 0);
  const MetricsReport m = io::metrics_from_json(io::read_json(pl.p("metrics.json")));
  std::size_t exact = 0;
  for (std::size_t i = 0; i < fixes.size(); ++i) exact += fixes[i].floor == trace[i].truth->floor;
  CHECK(m.exact_floor_pct == doctest::Approx(100.0 * static_cast<double>(exact) / static_cast<double>(fixes.size())));
  CHECK(m.config.at("nf_s") == "120.0");
  CHECK(io::read_text(pl.p("cdf.csv")).rfind("error_m,cdf\n", 0) == 0);
}

TEST_CASE("ablation flags disable their modules exactly") {
  const Pipeline& pl = pipeline();
  REQUIRE(invoke(pl.locate("a.jsonl") + std::vector<std::string>{"--no-faf"}).code == 0);
  REQUIRE(invoke(pl.locate("b.jsonl") + std::vector<std::string>{"--wf", "0"}).code == 0);
  CHECK(io::read_text(pl.p("a.jsonl")) == io::read_text(pl.p("b.jsonl")));

  REQUIRE(invoke(pl.locate("c.jsonl") + std::vector<std::string>{"--no-kf"}).code == 0);
  REQUIRE(invoke(pl.locate("d.jsonl") + std::vector<std::string>{"--wk", "1e-9"}).code == 0);
  CHECK(io::read_text(pl.p("c.jsonl")) == io::read_text(pl.p("d.jsonl")));
  REQUIRE(invoke(pl.locate("e.jsonl")).code == 0);
  CHECK(io::read_text(pl.p("c.jsonl")) != io::read_text(pl.p("e.jsonl")));

  REQUIRE(invoke(pl.locate("f.jsonl") + std::vector<std::string>{"--floors-only"}).code == 0);
  for (const FixRecord& f : io::read_fixes(pl.p("f.jsonl"))) CHECK_FALSE(f.point);
}

TEST_CASE("every command is deterministic") {
  const Pipeline& pl = pipeline();
  const std::vector<std::vector<std::string>> runs = {
      {"simulate", "--spec", pl.p("spec.json"), "--trajectory", pl.p("traj.json"), "--out", pl.p("OUT"),
       "--seed", "9"},
      {"synth-train", "--registry", pl.p("registry.json"), "--out", pl.p("OUT"), "--per-floor", "10", "--width",
       "3", "--seed", "2"},
      {"train-floor", "--dataset", pl.p("data.json"), "--config", pl.p("train.json"), "--out", pl.p("OUT"),
       "--epochs", "2", "--seed", "4"},
      {"fit-rank", "--trace", pl.p("walks.jsonl"), "--registry", pl.p("registry.json"), "--out", pl.p("OUT")},
      {"fit-quality", "--trace", pl.p("walks.jsonl"), "--registry", pl.p("registry.json"), "--rank-model",
       pl.p("rank.json"), "--out", pl.p("OUT")},
      pl.locate("OUT"),
      {"evaluate", "--fixes", pl.p("fixes.jsonl"), "--trace", pl.p("trace.jsonl"), "--out", pl.p("OUT")},
  };
  for (auto args : runs) {
    CAPTURE(args.front());
    const Result first = invoke(args);
    REQUIRE(first.code == 0);
    const std::string a = io::read_text(pl.p("OUT"));
    const Result second = invoke(args);
    REQUIRE(second.code == 0);
    CHECK(a == io::read_text(pl.p("OUT")));
    CHECK(first.out == second.out);
  }
  const Result g1 = invoke({"grad-check", "--model", pl.p("floor.json"), "--seed", "3"});
  const Result g2 = invoke({"grad-check", "--model", pl.p("floor.json"), "--seed", "3"});
  REQUIRE(g1.code == 0);
  CHECK(g1.out == g2.out);
  CHECK(io::parse_json(g1.out)["max_relative_error"].get<double>() < 1e-4);
}

TEST_CASE("exit codes and error lines") {
  const Pipeline& pl = pipeline();
  Result r = invoke({"locate", "--trace", pl.p("nothing.jsonl"), "--registry", pl.p("registry.json"), "--out", pl.p("x")});
  CHECK(r.code == cli::kExitSchema);
  CHECK(r.err.rfind("error kind=", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  io::write_text(pl.dir / "broken.json", "{ not json");
  r = invoke({"fit-quality", "--trace", pl.p("trace.jsonl"), "--registry", pl.p("broken.json"), "--rank-model",
           pl.p("rank.json"), "--out", pl.p("x")});
  CHECK(r.code == cli::kExitSchema);
  CHECK(r.err.find("kind=parse") != std::string::npos);

  r = invoke({"locate", "--trace", pl.p("trace.jsonl"), "--registry", pl.p("rank.json"), "--truth-floor",
           "--floors-only", "--out", pl.p("x")});
  CHECK(r.code == cli::kExitSchema);
  CHECK(r.err.find("kind=schema") != std::string::npos);

  // Runtime failure: too few samples for any rank.
  io::write_text(pl.dir / "few.jsonl", "{\"distance_m\": 3, \"rss\": -50}\n");
  r = invoke({"fit-rank", "--samples", pl.p("few.jsonl"), "--out", pl.p("x")});
  CHECK(r.code == cli::kExitRuntime);
  CHECK(r.err.find("command=fit-rank") != std::string::npos);

  CHECK(invoke({"bogus"}).code == cli::kExitSchema);
  CHECK(invoke({}).code == cli::kExitSchema);
  CHECK(invoke({"locate", "--help"}).code == cli::kExitOk);
}

TEST_CASE("environment overrides defaults") {
  const Pipeline& pl = pipeline();
  ::setenv("STOREY_NL", "5", 1);
  ::setenv("STOREY_WK", "30", 1);
  const Result r = invoke(pl.locate("env.jsonl"));
  ::unsetenv("STOREY_NL");
  ::unsetenv("STOREY_WK");
  REQUIRE(r.code == 0);
  const io::Json echo = io::parse_json(r.out);
  CHECK(echo["nl_s"] == 5.0);
  CHECK(echo["wk_s"] == 30.0);

  ::setenv("STOREY_NF", "two minutes", 1);
  const Result bad = invoke(pl.locate("env.jsonl"));
  ::unsetenv("STOREY_NF");
  CHECK(bad.code == cli::kExitSchema);

  // Flags win over the environment.
  ::setenv("STOREY_NL", "5", 1);
  const Result flag = invoke(pl.locate("env.jsonl") + std::vector<std::string>{"--nl", "7"});
  ::unsetenv("STOREY_NL");
  CHECK(io::parse_json(flag.out)["nl_s"] == 7.0);
}
