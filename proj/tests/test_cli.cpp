#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cbilab/config.hpp"
#include "cbilab/runner.hpp"

namespace fs = std::filesystem;
using namespace cbilab;

namespace {

struct CommandResult {
  int exit_code;
  std::string output;
};

CommandResult run_cmd(const std::string& cmd) {
  std::string out_file = (fs::temp_directory_path() / "cbilab_cli_out.txt").string();
  int raw = std::system((cmd + " > " + out_file + " 2>&1").c_str());
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  int code = -1;
#ifdef WEXITSTATUS
  code = WEXITSTATUS(raw);
#else
  code = raw;
#endif
  return {code, ss.str()};
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::path dir = fs::temp_directory_path() / "cbilab_cli_test";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p);
  out << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kBin = CBILAB_BIN;

}  // namespace

TEST_CASE("config parser handles sections, arrays and comments") {
  Config cfg = Config::parse_string(
      "experiment = \"verify-prop1\"  # comment\n"
      "seed = 42\n"
      "t_list = [10, 100, 1000]\n"
      "flag = true\n"
      "\n"
      "[immigration]\n"
      "preset = \"log_immigration\"\n"
      "c = 2.0\n");
  CHECK(cfg.str("experiment") == "verify-prop1");
  CHECK(cfg.number("seed") == 42.0);
  CHECK(cfg.array("t_list").size() == 3);
  CHECK(cfg.flag_or("flag", false));
  CHECK(cfg.str("immigration.preset") == "log_immigration");
  CHECK(cfg.section_numbers("immigration").at("c") == 2.0);
  CHECK_THROWS_AS(Config::parse_string("key value\n"), std::invalid_argument);
  CHECK_THROWS_AS(Config::parse_string("x = [1, oops]\n"), std::invalid_argument);
}

TEST_CASE("version and preset catalogue") {
  auto v = run_cmd(kBin + " version");
  CHECK(v.exit_code == 0);
  CHECK(v.output.find("cbilab") != std::string::npos);

  auto lp = run_cmd(kBin + " list-presets");
  CHECK(lp.exit_code == 0);
  CHECK(lp.output.find("log_immigration") != std::string::npos);
  CHECK(lp.output.find("superlog_iterlog") != std::string::npos);
  CHECK(lp.output.find("superlog_delta") != std::string::npos);
  CHECK(lp.output.find("sublog") != std::string::npos);
  CHECK(lp.output.find("Sub-log (no convergence)") != std::string::npos);
  CHECK(lp.output.find("stable") != std::string::npos);
}

TEST_CASE("unknown preset exits 1 with a distinct message") {
  fs::path cfg = write_config("bad_preset.toml",
                              "experiment = \"verify-subordinator\"\n"
                              "output = \"" +
                                  (fs::temp_directory_path() / "cbilab_out_bad").string() +
                                  "\"\n"
                                  "[immigration]\n"
                                  "preset = \"mystery\"\n");
  auto r = run_cmd(kBin + " run " + cfg.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("unknown mechanism preset") != std::string::npos);
}

TEST_CASE("invalid parameters and unreadable config exit 1") {
  auto missing = run_cmd(kBin + " run /nonexistent/config.toml");
  CHECK(missing.exit_code == 1);
  fs::path cfg = write_config("bad_params.toml",
                              "experiment = \"verify-prop1\"\n"
                              "alpha = 0.5\n"
                              "beta = 0.9\n"  // beta > alpha
                              "output = \"" +
                                  (fs::temp_directory_path() / "cbilab_out_badp").string() + "\"\n");
  auto r = run_cmd(kBin + " run " + cfg.string());
  CHECK(r.exit_code == 1);
}

TEST_CASE("stable-limit verify run exits 0 with a decreasing table") {
  fs::path outdir = fs::temp_directory_path() / "cbilab_out_prop1";
  fs::path cfg = write_config("prop1.toml",
                              "experiment = \"verify-prop1\"\n"
                              "alpha = 1.0\nbeta = 1.0\nd = 1.0\ndprime = 1.0\n"
                              "s = 1.0\n"
                              "t_list = [100, 1000, 10000]\n"
                              "output = \"" +
                                  outdir.string() + "\"\n");
  auto r = run_cmd(kBin + " run " + cfg.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(outdir / "table.csv"));
  CHECK(fs::exists(outdir / "report.json"));
  std::string report = slurp(outdir / "report.json");
  CHECK(report.find("\"verdict\": \"pass\"") != std::string::npos);
}

TEST_CASE("re-running the same seed gives byte-identical tables") {
  fs::path out1 = fs::temp_directory_path() / "cbilab_det_1";
  fs::path out2 = fs::temp_directory_path() / "cbilab_det_2";
  auto body = [&](const fs::path& out) {
    return "experiment = \"verify-subordinator\"\n"
           "seed = 99\npaths = 500\n"
           "t_list = [10, 20]\n"
           "s_grid = [1.0]\n"
           "jump_rate_cap = 20\n"
           "output = \"" +
           out.string() +
           "\"\n"
           "[immigration]\npreset = \"log_immigration\"\nc = 1.0\n";
  };
  fs::path cfg1 = write_config("det1.toml", body(out1));
  fs::path cfg2 = write_config("det2.toml", body(out2));
  run_cmd(kBin + " run " + cfg1.string());
  run_cmd("CBILAB_THREADS=3 " + kBin + " run " + cfg2.string());
  std::string t1 = slurp(out1 / "table.csv");
  std::string t2 = slurp(out2 / "table.csv");
  REQUIRE(!t1.empty());
  CHECK(t1 == t2);
}

TEST_CASE("failed verdict exits 2") {
  // degenerate immigration: the pipeline flags non-applicability and fails
  fs::path outdir = fs::temp_directory_path() / "cbilab_out_fail";
  fs::path cfg = write_config("fail.toml",
                              "experiment = \"verify-subordinator\"\n"
                              "paths = 500\nt_list = [10, 20]\n"
                              "output = \"" +
                                  outdir.string() +
                                  "\"\n"
                                  "[immigration]\npreset = \"drift\"\nbeta = 1.0\n");
  auto r = run_cmd(kBin + " run " + cfg.string());
  CHECK(r.exit_code == 2);
  CHECK(slurp(outdir / "report.json").find("\"verdict\": \"fail\"") != std::string::npos);
}

TEST_CASE("simulate writes path and atom CSVs") {
  fs::path outdir = fs::temp_directory_path() / "cbilab_out_sim";
  fs::path cfg = write_config("sim.toml",
                              "experiment = \"simulate\"\n"
                              "process = \"subordinator\"\n"
                              "paths = 20\nseed = 7\nT = 2.0\n"
                              "grid = [0.5, 1.0, 2.0]\n"
                              "output = \"" +
                                  outdir.string() +
                                  "\"\n"
                                  "[immigration]\npreset = \"exp_immigration\"\n");
  auto r = run_cmd(kBin + " run " + cfg.string());
  CHECK(r.exit_code == 0);
  std::string samples = slurp(outdir / "samples.csv");
  CHECK(samples.rfind("stream,time,value\n", 0) == 0);
  CHECK(fs::exists(outdir / "atoms.csv"));
}

TEST_CASE("mech-probe and fastjump pipelines run") {
  fs::path outdir = fs::temp_directory_path() / "cbilab_out_probe";
  fs::path cfg = write_config("probe.toml",
                              "experiment = \"mech-probe\"\n"
                              "output = \"" +
                                  outdir.string() +
                                  "\"\n"
                                  "[immigration]\npreset = \"log_immigration\"\nc = 1.0\n");
  auto r = run_cmd(kBin + " run " + cfg.string());
  CHECK(r.exit_code == 0);
  CHECK(slurp(outdir / "report.json").find("classification: Log") != std::string::npos);

  fs::path outdir2 = fs::temp_directory_path() / "cbilab_out_fj";
  fs::path cfg2 = write_config("fastjump.toml",
                               "experiment = \"fastjump\"\n"
                               "x = 1.0\nv = 2.0\n"
                               "t_list = [100, 1000, 10000]\n"
                               "output = \"" +
                                   outdir2.string() +
                                   "\"\n"
                                   "[immigration]\npreset = \"log_immigration\"\nc = 1.0\n");
  auto r2 = run_cmd(kBin + " run " + cfg2.string());
  CHECK(r2.exit_code == 0);
}
