#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = SIPI_CLI_PATH;
const std::string kFix = SIPI_FIXTURES;

fs::path scratch(const std::string& name) {
  fs::create_directories(SIPI_SCRATCH);
  return fs::path(SIPI_SCRATCH) / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

// Runs the CLI with scalar kernels; stdout and stderr go to scratch files.
Run run(const std::string& args, const std::string& cwd = "") {
  const fs::path out = scratch("stdout.txt");
  const fs::path err = scratch("stderr.txt");
  std::string cmd;
  if (!cwd.empty()) cmd += "cd '" + cwd + "' && ";
  cmd += "SIPI_SIMD=scalar '" + kCli + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string toy_args() {
  return "--x " + kFix + "/toy_x.csv --z " + kFix + "/toy_z.csv --y " + kFix + "/toy_y.csv";
}

json error_line(const Run& r) {
  const json j = json::parse(r.err);
  CHECK(j.contains("error"));
  CHECK(j.contains("category"));
  CHECK(j.contains("message"));
  return j;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("demo-coin prints the naive and selective tails") {
  const Run r = run("demo-coin");
  CHECK(r.code == 0);
  CHECK(r.out.find("0.0195") != std::string::npos);
  CHECK(r.out.find("0.0391") != std::string::npos);
}

TEST_CASE("test subcommand on the toy fixture") {
  const Run r = run("test " + toy_args() +
                    " --samples 300 --burn-in 50 --method selective_t --method selective_f_exact --method naive_f"
                    " --method split_f --method carve_f --method selective_t_general");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("command") == "test");
  REQUIRE(j.at("results").size() == 6);
  for (const auto& res : j.at("results")) {
    const double p = res.at("p_value");
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    CHECK(res.at("rejected") == (p <= 0.05));
  }
  CHECK(j.at("results")[0].contains("chain_seed"));
  CHECK_FALSE(j.at("results")[1].contains("chain_seed"));
}

TEST_CASE("screening selector with the truncated-normal test") {
  const Run r = run("test " + toy_args() + " --selector screen --screen-k 2 --combiner average --sigma2 1"
                    " --method screen_truncnorm --method selective_t --samples 300");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("results")[0].at("reference").at("kind") == "truncated_normal");
  CHECK(j.at("results")[0].at("selected").size() == 2);
}

TEST_CASE("output is byte-identical to the frozen golden file") {
  const fs::path out = scratch("golden_run.json");
  const Run r = run("test --x toy_x.csv --z toy_z.csv --y toy_y.csv --samples 400 --burn-in 100 --seed 7"
                    " --method selective_t --method selective_f_exact --method selective_f_sampling --method naive_t"
                    " --method split_t --method carve_t --method prevalidate --out '" + out.string() + "'",
                    kFix);
  REQUIRE(r.code == 0);
  CHECK(slurp(out) == slurp(fs::path(kFix) / "golden_test.json"));
}

TEST_CASE("data errors exit 2 with a JSON error line") {
  Run r = run("test --x " + kFix + "/toy_x.csv --y " + kFix + "/toy_y_short.csv");
  CHECK(r.code == 2);
  json e = error_line(r);
  CHECK(e.at("error") == "DimensionMismatch");
  CHECK(e.at("category") == "data");

  r = run("test --x " + kFix + "/toy_bad.csv --y " + kFix + "/toy_y.csv");
  CHECK(r.code == 2);
  e = error_line(r);
  CHECK(e.at("error") == "ParseError");
  CHECK(e.at("message").get<std::string>().find("line 1") != std::string::npos);

  r = run("test --x " + kFix + "/missing.csv --y " + kFix + "/toy_y.csv");
  CHECK(r.code == 2);
}

TEST_CASE("configuration errors exit 3") {
  const fs::path cfg = scratch("bad.json");
  write_file(cfg, R"({"bogus": 1})");
  Run r = run("simulate --config '" + cfg.string() + "'");
  CHECK(r.code == 3);
  CHECK(error_line(r).at("category") == "config");

  write_file(cfg, "{not json");
  CHECK(run("simulate --config '" + cfg.string() + "'").code == 3);

  CHECK(run("test " + toy_args() + " --method no_such_test").code == 3);
  CHECK(run("test " + toy_args() + " --lambda 2 --auto-lambda 1 3").code == 3);
  CHECK(run("test " + toy_args() + " --samples 10").code == 3);
  CHECK(run("test --y " + kFix + "/toy_y.csv").code == 3);
  CHECK(run("nonsense").code == 3);
}

TEST_CASE("simulate smoke run is fast and reproducible") {
  const fs::path cfg = scratch("sim.json");
  write_file(cfg, R"({"n": 30, "p_x": 20, "p_z": 2, "p_real": 3, "n_reps": 10, "seed": 4, "folds": 5,
    "auto_lambda": [2, 6], "chain": {"n_samples": 300, "burn_in": 100, "thin": 2},
    "methods": ["selective_t", "carve_t", "split_t", "naive_t", "selective_f_exact", "prevalidate"]})");
  const fs::path out1 = scratch("sim1.json");
  const fs::path out2 = scratch("sim2.json");
  const auto start = std::chrono::steady_clock::now();
  const Run r1 = run("simulate --config '" + cfg.string() + "' --out '" + out1.string() + "'");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  REQUIRE(r1.code == 0);
  CHECK(secs < 60.0);
  const Run r2 = run("simulate --config '" + cfg.string() + "' --out '" + out2.string() + "' --method selective_t"
                     " --method carve_t --method split_t --method naive_t --method selective_f_exact --method prevalidate");
  REQUIRE(r2.code == 0);

  const std::string csv1 = slurp(scratch("sim1.csv"));
  CHECK(csv1 == slurp(scratch("sim2.csv")));
  CHECK(slurp(out1) == slurp(out2));
  CHECK(csv1.rfind("replicate,method,p_value,n_true_positives\n", 0) == 0);
  // header plus one row per replicate and method
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 1 + 10 * 6);

  const json j = json::parse(slurp(out1));
  CHECK(j.at("command") == "simulate");
  CHECK(j.at("config").at("n_reps") == 10);
  REQUIRE(j.at("summary").at("methods").size() == 6);
  for (const auto& m : j.at("summary").at("methods")) {
    CHECK(m.contains("rejection_rate"));
    CHECK(m.contains("ks_statistic"));
  }
}

TEST_CASE("calibrate reports one row per chain size") {
  const fs::path cfg = scratch("cal.json");
  write_file(cfg, R"({"n": 30, "p_x": 20, "p_z": 2, "p_real": 3, "auto_lambda": [2, 6], "folds": 5})");
  const Run r = run("calibrate --config '" + cfg.string() + "' --reps 4 --sizes 20 80");
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j.at("command") == "calibrate");
  const json& rows = j.at("sizes");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("size") == 20);
  CHECK(rows[1].at("p_values").size() == 4);
}
