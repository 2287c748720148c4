#include <doctest.h>

#include "mosaic/common.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

// End-to-end checks through the installed binary: exit codes, usage text,
// and byte-level artifact determinism.

namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int exit_code;
  std::string output;
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(MOSAIC_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 512> buf{};
  std::string output;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) output += buf.data();
  int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mosaic_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("unknown subcommand prints usage and exits 64") {
  CmdResult r = run_cli("frobnicate");
  CHECK(r.exit_code == 64);
  CHECK(r.output.find("Usage") != std::string::npos);
  CmdResult none = run_cli("");
  CHECK(none.exit_code == 64);
}

TEST_CASE("malformed configuration exits 2") {
  CHECK(run_cli("gradcheck --set nope.key=1").exit_code == 2);
  CHECK(run_cli("moons-train --set model.heads=2 --out " +
                temp_dir("badheads").string())
            .exit_code == 2);
  CHECK(run_cli("icl-eval --out " + temp_dir("nockpt").string())
            .exit_code == 2);  // eval.checkpoint required
  fs::path missing = temp_dir("missing_cfg");
  CHECK(run_cli("gradcheck --config " + (missing / "nope.txt").string())
            .exit_code == 2);
}

TEST_CASE("compare of a run with itself shows zero deltas") {
  fs::path out = temp_dir("cmp_run");
  CmdResult r = run_cli(
      "moons-eval --set model.init=identity --set eval.triple=2,3,5 "
      "--set eval.sequences=8 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  CmdResult cmp = run_cli("compare " + (out / "manifest.txt").string() + " " +
                          (out / "manifest.txt").string());
  CHECK(cmp.exit_code == 0);
  CHECK(cmp.output.find("metric,a,b,delta") != std::string::npos);
}

TEST_CASE("identical seeds reproduce csv artifacts byte for byte") {
  fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  std::string common =
      "moons-eval --set model.init=identity --set eval.triple=2,3,5 "
      "--set eval.sequences=16 --seed 99 --out ";
  REQUIRE(run_cli(common + a.string()).exit_code == 0);
  REQUIRE(run_cli(common + b.string()).exit_code == 0);
  CHECK(slurp(a / "error_curve.csv") == slurp(b / "error_curve.csv"));
}

TEST_CASE("rerunning from a manifest's resolved config reproduces artifacts") {
  fs::path first = temp_dir("rerun_a"), second = temp_dir("rerun_b");
  std::string base =
      "attn-profile --seed 31 --set eval.profile_sequences=32 --out ";
  REQUIRE(run_cli(base + first.string()).exit_code == 0);
  CmdResult r = run_cli("attn-profile --config " +
                        (first / "config.resolved.txt").string() + " --out " +
                        second.string());
  REQUIRE(r.exit_code == 0);
  CHECK(slurp(first / "attention_profile.csv") ==
        slurp(second / "attention_profile.csv"));
}

TEST_CASE("gradcheck via the cli passes and reports a manifest") {
  fs::path out = temp_dir("gc");
  CmdResult r = run_cli("gradcheck --out " + out.string());
  CHECK(r.exit_code == 0);
  std::string manifest = slurp(out / "manifest.txt");
  CHECK(manifest.find("max_rel_error") != std::string::npos);
  CHECK(manifest.find("passed = true") != std::string::npos);
}
