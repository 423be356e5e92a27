#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cli.hpp"
#include "lnn/report.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lnn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result lnn_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  Scratch() {
    static int counter = 0;
    dir = fs::temp_directory_path() / ("lnn_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("usage errors exit 2, help exits 0") {
  CHECK(lnn_run({}).code == cli::kExitUsage);
  CHECK(lnn_run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(lnn_run({"gen", "--no-such-flag", "1"}).code == cli::kExitUsage);
  CHECK(lnn_run({"gen", "--count", "many", "--out", "x"}).code == cli::kExitUsage);
  const Result help = lnn_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("rollout") != std::string::npos);
  const Result missing = lnn_run({"gen", "--system", "ball"});
  CHECK(missing.code == cli::kExitUsage);
  CHECK(missing.err.find("--out") != std::string::npos);
  Scratch s;
  CHECK(lnn_run({"gen", "--system", "pendulum3", "--out", s("x.jsonl")}).code == cli::kExitUsage);
}

TEST_CASE("gen writes the requested count and is reproducible") {
  Scratch s;
  const Result r = lnn_run({"gen", "--system", "double_pendulum", "--count", "200", "--seed", "0", "--out", s("a.jsonl")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("200") != std::string::npos);
  CHECK(r.out.find("seed 0") != std::string::npos);
  CHECK(count_lines(s("a.jsonl")) == 200);
  REQUIRE(lnn_run({"gen", "--system", "double_pendulum", "--count", "200", "--seed", "0", "--out", s("b.jsonl")}).code == 0);
  CHECK(slurp(s("a.jsonl")) == slurp(s("b.jsonl")));
  REQUIRE(lnn_run({"gen", "--system", "double_pendulum", "--count", "200", "--seed", "1", "--out", s("c.jsonl")}).code == 0);
  CHECK(slurp(s("a.jsonl")) != slurp(s("c.jsonl")));

  REQUIRE(lnn_run({"gen", "--system", "relativistic", "--count", "2000", "--out", s("rel.jsonl")}).code == 0);
  double vmax = 0.0;
  for (const auto& x : read_jsonl(s("rel.jsonl"))) vmax = std::max(vmax, std::abs(x.state.qd[0]));
  CHECK(vmax < 0.9);

  REQUIRE(lnn_run({"gen", "--system", "wave1d", "--grid-points", "16", "--count", "30", "--out", s("w.jsonl")}).code == 0);
  const auto w = read_jsonl(s("w.jsonl"));
  REQUIRE(w.size() == 30);
  CHECK(w.front().state.dof() == 16);
}

TEST_CASE("config files: unknown keys rejected, flags override, echo reproduces") {
  Scratch s;
  write_file(s("bad.json"), R"({"system": "ball", "count": 5, "colour": "red", "seed": "zero"})");
  const Result bad = lnn_run({"gen", "--config", s("bad.json"), "--out", s("x.jsonl")});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("unknown key 'colour'") != std::string::npos);
  CHECK(bad.err.find("'seed' must be") != std::string::npos);
  CHECK_FALSE(fs::exists(s("x.jsonl")));

  write_file(s("notjson.json"), "{count: 5");
  CHECK(lnn_run({"gen", "--config", s("notjson.json"), "--out", s("x.jsonl")}).code == cli::kExitUsage);
  write_file(s("wrongcmd.json"), R"({"command": "train"})");
  CHECK(lnn_run({"gen", "--config", s("wrongcmd.json"), "--out", s("x.jsonl")}).code == cli::kExitUsage);
  CHECK(lnn_run({"gen", "--config", s("absent.json"), "--out", s("x.jsonl")}).code == cli::kExitIo);

  write_file(s("good.json"), R"({"system": "ball", "count": 5, "seed": 3})");
  REQUIRE(lnn_run({"gen", "--config", s("good.json"), "--count", "7", "--out", s("g.jsonl")}).code == 0);
  CHECK(count_lines(s("g.jsonl")) == 7);

  const json echo = json::parse(slurp(s("g.jsonl.config.json")));
  CHECK(echo["command"] == "gen");
  CHECK(echo["count"] == 7);
  CHECK(echo["seed"] == 3);
  CHECK(echo["system"] == "ball");
  CHECK(echo.contains("stride"));  // defaults are filled in
  // The echoed config is itself a valid config and reproduces the output.
  fs::copy_file(s("g.jsonl"), s("g_first.jsonl"));
  REQUIRE(lnn_run({"gen", "--config", s("g.jsonl.config.json")}).code == 0);
  CHECK(slurp(s("g.jsonl")) == slurp(s("g_first.jsonl")));
}

TEST_CASE("IO failures exit 3") {
  Scratch s;
  CHECK(lnn_run({"gen", "--system", "ball", "--out", s("missing_dir/x.jsonl")}).code == cli::kExitIo);
  CHECK(lnn_run({"train", "--system", "ball", "--data", s("none.jsonl"), "--out", s("m.ckpt")}).code == cli::kExitIo);
  CHECK(lnn_run({"rollout", "--checkpoint", s("none.ckpt"), "--out", s("r.csv")}).code == cli::kExitIo);
  CHECK(lnn_run({"export", "--input", s("none.csv")}).code == cli::kExitIo);
}

TEST_CASE("train, then roll out and evaluate the checkpoint") {
  Scratch s;
  REQUIRE(lnn_run({"gen", "--system", "ball", "--count", "200", "--out", s("ball.jsonl")}).code == 0);
  const Result t = lnn_run({"train", "--system", "ball", "--data", s("ball.jsonl"), "--out", s("m.ckpt"), "--model",
                            "baseline", "--hidden", "8", "--depth", "3", "--steps", "60", "--log-every", "20"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("checkpoint: " + s("m.ckpt")) != std::string::npos);
  CHECK(count_lines(s("m.ckpt.log.jsonl")) == 3);
  CHECK(json::parse(slurp(s("m.ckpt.config.json")))["hidden"] == 8);
  json meta;
  const NetParams p = load_checkpoint(s("m.ckpt"), &meta);
  CHECK(meta["model"] == "baseline");
  CHECK(meta["system"] == "ball");
  CHECK(meta["dof"] == 2);
  CHECK(p.output_width() == 2);

  const Result r = lnn_run({"rollout", "--checkpoint", s("m.ckpt"), "--steps", "25", "--out", s("r.csv")});
  REQUIRE(r.code == 0);
  const CsvTable table = read_csv_table(s("r.csv"));
  CHECK(table.header == std::vector<std::string>{"t", "q1", "q2", "qd1", "qd2", "E"});
  CHECK(table.rows.size() == 26);

  const Result e = lnn_run({"eval", "--checkpoint", s("m.ckpt"), "--n-traj", "3", "--steps", "10", "--out", s("e.json")});
  REQUIRE(e.code == 0);
  const json rep = json::parse(slurp(s("e.json")));
  CHECK(validate_report(rep).empty());
  CHECK(rep["model"] == "baseline");
  CHECK(rep["trajectories"].size() == 3);
}

TEST_CASE("train rejects mismatched data and bad hyperparameters") {
  Scratch s;
  REQUIRE(lnn_run({"gen", "--system", "relativistic", "--count", "20", "--out", s("rel.jsonl")}).code == 0);
  CHECK(lnn_run({"train", "--system", "double_pendulum", "--data", s("rel.jsonl"), "--out", s("m.ckpt")}).code ==
        cli::kExitUsage);
  CHECK(lnn_run({"train", "--system", "relativistic", "--data", s("rel.jsonl"), "--out", s("m.ckpt"), "--batch", "0"})
            .code == cli::kExitUsage);
  CHECK(lnn_run({"train", "--system", "relativistic", "--data", s("rel.jsonl"), "--out", s("m.ckpt"), "--model",
                 "transformer"})
            .code == cli::kExitUsage);
  write_file(s("broken.jsonl"), "{\"q\": [1], \"qd\": [2]}\n");
  CHECK(lnn_run({"train", "--system", "relativistic", "--data", s("broken.jsonl"), "--out", s("m.ckpt")}).code ==
        cli::kExitUsage);
}

TEST_CASE("training divergence exits 4 and keeps the last good checkpoint") {
  Scratch s;
  REQUIRE(lnn_run({"gen", "--system", "ball", "--count", "50", "--out", s("ball.jsonl")}).code == 0);
  const Result t = lnn_run({"train", "--system", "ball", "--data", s("ball.jsonl"), "--out", s("m.ckpt"), "--model",
                            "baseline", "--hidden", "4", "--depth", "2", "--steps", "50", "--lr0", "1e300",
                            "--decay", "1"});
  CHECK(t.code == cli::kExitDiverged);
  CHECK(t.err.find("diverged at step") != std::string::npos);
  CHECK(t.err.find(s("m.ckpt")) != std::string::npos);
  json meta;
  const NetParams p = load_checkpoint(s("m.ckpt"), &meta);
  CHECK(p.flatten().allFinite());
  CHECK(meta["model"] == "baseline");
}

TEST_CASE("analytic rollouts") {
  Scratch s;
  const Result r = lnn_run({"rollout", "--analytic", "--system", "double_pendulum", "--q", "1.0,-0.5", "--qd",
                            "0.3,0.2", "--steps", "100", "--dt", "0.01", "--out", s("dp.csv")});
  REQUIRE(r.code == 0);
  const CsvTable t = read_csv_table(s("dp.csv"));
  REQUIRE(t.rows.size() == 101);
  CHECK(t.rows[0][1] == 1.0);
  CHECK(t.rows[0][3] == 0.3);
  const double e0 = t.rows[0][5];
  double drift = 0.0;
  for (const auto& row : t.rows) drift = std::max(drift, std::abs(row[5] - e0) / std::abs(e0));
  CHECK(drift < 1e-6);

  // Wave system: n field columns plus a rates file with the energy column.
  REQUIRE(lnn_run({"rollout", "--analytic", "--system", "wave1d", "--grid-points", "12", "--steps", "30", "--dt",
                   "0.001", "--out", s("wave.csv")})
              .code == 0);
  const CsvTable phi = read_csv_table(s("wave.csv"));
  CHECK(phi.header.size() == 13);
  CHECK(phi.header[12] == "phi12");
  CHECK(phi.rows.size() == 31);
  const CsvTable rates = read_csv_table(s("wave_rates.csv"));
  CHECK(rates.header.back() == "E");
  CHECK(rates.header.size() == 14);

  // Usage problems.
  CHECK(lnn_run({"rollout", "--system", "ball", "--out", s("x.csv")}).code == cli::kExitUsage);
  CHECK(lnn_run({"rollout", "--analytic", "--out", s("x.csv")}).code == cli::kExitUsage);
  CHECK(lnn_run({"rollout", "--analytic", "--system", "ball", "--q", "1,2,3", "--qd", "0,0,0", "--out", s("x.csv")})
            .code == cli::kExitUsage);
  CHECK(lnn_run({"rollout", "--analytic", "--system", "relativistic", "--q", "0", "--qd", "1.5", "--out", s("x.csv")})
            .code == cli::kExitUsage);
  CHECK(lnn_run({"rollout", "--analytic", "--system", "ball", "--q", "1,x", "--qd", "0,0", "--out", s("x.csv")}).code ==
        cli::kExitUsage);
}

TEST_CASE("rollout of a checkpoint: dimension checks and blow-up") {
  Scratch s;
  // Baseline for the ball whose acceleration is 1e200 * softplus(q1): explodes.
  NetParams p;
  p.widths = {4, 1, 2};
  Layer l0, l1;
  l0.w = Mat::Zero(1, 4);
  l0.w(0, 0) = 1.0;
  l0.b = Vec::Zero(1);
  l1.w = Mat::Zero(2, 1);
  l1.w(0, 0) = 1e200;
  l1.b = Vec::Zero(2);
  p.layers = {l0, l1};
  const json meta = {{"model", "baseline"}, {"coords", "arbitrary"}, {"system", "ball"},
                     {"system_params", {1.0, 9.8}}, {"dof", 2}, {"aux_dim", 0}};
  save_checkpoint(s("boom.ckpt"), p, meta);
  const Result r = lnn_run({"rollout", "--checkpoint", s("boom.ckpt"), "--q", "1,0", "--qd", "0,0", "--steps", "50",
                            "--out", s("boom.csv")});
  CHECK(r.code == cli::kExitDiverged);
  CHECK(r.err.find("diverged at step") != std::string::npos);

  CHECK(lnn_run({"rollout", "--checkpoint", s("boom.ckpt"), "--system", "relativistic", "--out", s("x.csv")}).code ==
        cli::kExitUsage);
  CHECK(lnn_run({"rollout", "--checkpoint", s("boom.ckpt"), "--q", "1", "--qd", "0", "--out", s("x.csv")}).code ==
        cli::kExitUsage);
  save_checkpoint(s("bare.ckpt"), p);
  CHECK(lnn_run({"rollout", "--checkpoint", s("bare.ckpt"), "--out", s("x.csv")}).code == cli::kExitUsage);
  json wrong = meta;
  wrong["dof"] = 3;
  save_checkpoint(s("wrong.ckpt"), p, wrong);
  CHECK(lnn_run({"rollout", "--checkpoint", s("wrong.ckpt"), "--out", s("x.csv")}).code == cli::kExitUsage);
}

TEST_CASE("eval: analytic self-comparison and thread independence") {
  Scratch s;
  const Result r = lnn_run({"eval", "--analytic", "--system", "double_pendulum", "--n-traj", "4", "--steps", "50",
                            "--out", s("self.json")});
  REQUIRE(r.code == 0);
  const json rep = json::parse(slurp(s("self.json")));
  CHECK(validate_report(rep).empty());
  CHECK(rep["summary"]["mean_energy_discrepancy"] == 0.0);
  CHECK(rep["summary"]["mean_coord_error"] == 0.0);
  for (const auto& t : rep["trajectories"]) {
    CHECK(t["t"].size() == 51);
    for (const auto& v : t["coord_error"]) CHECK(v == 0.0);
  }

  const fs::path ckpt_dir = s.dir;
  REQUIRE(lnn_run({"gen", "--system", "double_pendulum", "--count", "64", "--out", s("dp.jsonl")}).code == 0);
  REQUIRE(lnn_run({"train", "--system", "double_pendulum", "--data", s("dp.jsonl"), "--out", s("lnn.ckpt"),
                   "--hidden", "8", "--depth", "3", "--steps", "20"})
              .code == 0);
  const std::vector<std::string> args = {"eval", "--checkpoint", s("lnn.ckpt"), "--n-traj", "5", "--steps", "20"};
  auto with_out = [&](const std::string& out) {
    auto a = args;
    a.insert(a.end(), {"--out", out});
    return a;
  };
  ::setenv(cli::kThreadsEnv, "1", 1);
  REQUIRE(lnn_run(with_out(s("t1.json"))).code == 0);
  ::setenv(cli::kThreadsEnv, "3", 1);
  REQUIRE(lnn_run(with_out(s("t3.json"))).code == 0);
  CHECK(slurp(s("t1.json")) == slurp(s("t3.json")));
  ::setenv(cli::kThreadsEnv, "zero", 1);
  CHECK(lnn_run(with_out(s("tz.json"))).code == cli::kExitUsage);
  ::unsetenv(cli::kThreadsEnv);
}

TEST_CASE("export: tidy CSV, labels, bit-exact round trip") {
  Scratch s;
  REQUIRE(lnn_run({"eval", "--analytic", "--system", "relativistic", "--n-traj", "1", "--steps", "10", "--out",
                   s("rep.json")})
              .code == 0);
  const Result e = lnn_run({"export", "--input", s("rep.json"), "--out", s("rep.csv")});
  REQUIRE(e.code == 0);
  const json rep = json::parse(slurp(s("rep.json")));
  std::ifstream in(s("rep.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "series,t,value");
  std::map<std::string, std::vector<double>> series;
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.rfind(',');
    series[line.substr(0, c1)].push_back(std::stod(line.substr(c2 + 1)));
  }
  CHECK(series.count("pred_E") == 1);
  CHECK(series.count("true_E") == 1);
  // One trajectory: the mean series is the trajectory itself, bit for bit.
  const auto& pred = rep["trajectories"][0]["pred_E"];
  REQUIRE(series["pred_E"].size() == pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) CHECK(series["pred_E"][i] == pred[i].get<double>());

  const Result per = lnn_run({"export", "--input", s("rep.json"), "--per-trajectory"});
  CHECK(per.out.find("pred_E/0,") != std::string::npos);

  // Several inputs: one labelled series family per input.
  REQUIRE(lnn_run({"rollout", "--analytic", "--system", "relativistic", "--steps", "5", "--out", s("a.csv")}).code == 0);
  REQUIRE(lnn_run({"rollout", "--analytic", "--system", "relativistic", "--steps", "5", "--seed", "4", "--out",
                   s("b.csv")})
              .code == 0);
  const Result cmp = lnn_run({"export", "--input", s("a.csv") + "," + s("b.csv"), "--labels", "lnn,hnn"});
  REQUIRE(cmp.code == 0);
  CHECK(cmp.out.rfind("series,t,value\n", 0) == 0);
  CHECK(cmp.out.find("lnn:q1,") != std::string::npos);
  CHECK(cmp.out.find("hnn:E,") != std::string::npos);
  CHECK(cmp.out.find("series,t,value", 1) == std::string::npos);

  CHECK(lnn_run({"export", "--input", s("rep.json"), "--format", "parquet"}).code == cli::kExitUsage);
  CHECK(lnn_run({"export", "--input", s("a.csv"), "--labels", "x,y"}).code == cli::kExitUsage);
  write_file(s("notreport.json"), R"({"schema": "something else"})");
  CHECK(lnn_run({"export", "--input", s("notreport.json")}).code == cli::kExitUsage);
}
