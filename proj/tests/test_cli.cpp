#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "jsq_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with `args`, stdout to `stdout_file` (or discarded), stderr to
// a scratch file. Returns the exit status.
int run(const std::string& args, const fs::path& stdout_file = {}) {
  const std::string out = stdout_file.empty() ? "/dev/null" : stdout_file.string();
  const std::string cmd = std::string(JSQ_CLI) + " " + args + " > '" + out + "' 2> '" +
                          (scratch() / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string last_stderr() { return read_file(scratch() / "stderr.txt"); }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("successful commands exit 0") {
  const fs::path out = scratch() / "tv.csv";
  CHECK(run("tv-curve --rho 0.5", out) == 0);
  CHECK(read_file(out).rfind("t,tv_exact,tv_uncertainty,bound_c1,bound_c1k,pass\n", 0) == 0);
  CHECK(run("hitting --lambda 1 --mu 1 --reps 200") == 0);
  CHECK(run("fig2 --rho 0.3 --t-grid 1,10,100") == 0);
  CHECK(run("--help") == 0);
}

TEST_CASE("a failed certification exits 1") {
  CHECK(run("tv-curve --rho 0.5 --buffer 2") == 1);
  CHECK(last_stderr().find("certification failed") != std::string::npos);
}

TEST_CASE("usage, configuration and stability errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("tv-curve --bogus") == 2);
  CHECK(run("tv-curve --format xml") == 2);
  CHECK(run("tv-curve --lambda 2 --mu 1") == 2);
  CHECK(last_stderr().find("unstable system") != std::string::npos);
  CHECK(run("hitting --rho 1.5") == 2);
  CHECK(run("tv-curve --t-grid 5,1") == 2);
  CHECK(run("tv-curve --reps 0") == 2);
  CHECK(run("tv-curve --config /nonexistent/cfg.json") == 2);

  const fs::path bad = scratch() / "bad.json";
  write_file(bad, "{\"rho\": 0.5,");
  CHECK(run("tv-curve --config '" + bad.string() + "'") == 2);
  CHECK(last_stderr().find("config parse error") != std::string::npos);

  const fs::path unknown = scratch() / "unknown.json";
  write_file(unknown, R"({"rate": 1})");
  CHECK(run("tv-curve --config '" + unknown.string() + "'") == 2);
  CHECK(last_stderr().find("unknown config key 'rate'") != std::string::npos);
}

TEST_CASE("--out writes the file atomically and --format json is valid JSON") {
  const fs::path target = scratch() / "hit.json";
  const fs::path stdout_file = scratch() / "stdout.txt";
  CHECK(run("hitting --rho 0.5 --reps 100 --format json --out '" + target.string() + "'",
            stdout_file) == 0);
  CHECK(read_file(stdout_file).empty());
  const auto doc = nlohmann::json::parse(read_file(target));
  CHECK(doc["command"] == "hitting");
  CHECK(doc["pass"] == true);
  CHECK(doc["rows"].size() == 3);
  for (const auto& e : fs::directory_iterator(scratch()))
    CHECK(e.path().filename().string().find(".tmp.") == std::string::npos);
}

TEST_CASE("flags override the config file") {
  const fs::path cfg = scratch() / "cfg.json";
  write_file(cfg, R"({"lambda": 5, "mu": 1, "t_grid": [10, 100], "format": "json"})");
  // The file alone is unstable.
  CHECK(run("tv-curve --config '" + cfg.string() + "'") == 2);
  const fs::path out = scratch() / "override.json";
  CHECK(run("tv-curve --config '" + cfg.string() + "' --rho 0.5", out) == 0);
  const auto doc = nlohmann::json::parse(read_file(out));
  CHECK(doc["rho"] == 0.5);
  CHECK(doc["rows"].size() == 2);
}

TEST_CASE("verify reports JSON by default") {
  const fs::path out = scratch() / "verify.json";
  CHECK(run("verify --rho 0.3 --reps 50 --t-grid 10,100", out) == 0);
  const auto doc = nlohmann::json::parse(read_file(out));
  CHECK(doc["command"] == "verify");
  CHECK(doc["pass"] == true);
  CHECK_FALSE(doc["checks"].empty());
}
