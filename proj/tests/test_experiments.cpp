#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "jsq/bounds.hpp"
#include "jsq/errors.hpp"
#include "jsq/experiments.hpp"

using namespace jsq;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// Cell-by-cell comparison: numbers within a relative / absolute tolerance,
// everything else verbatim.
void check_matches_golden(const std::string& actual, const std::string& golden_name) {
  const std::string expected = read_file(fs::path(JSQ_GOLDEN_DIR) / golden_name);
  REQUIRE_FALSE(expected.empty());
  const auto a_lines = split(actual, '\n');
  const auto e_lines = split(expected, '\n');
  REQUIRE(a_lines.size() == e_lines.size());
  for (std::size_t i = 0; i < a_lines.size(); ++i) {
    const auto a = split(a_lines[i], ',');
    const auto e = split(e_lines[i], ',');
    CAPTURE(golden_name);
    CAPTURE(i);
    REQUIRE(a.size() == e.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
      double x = 0.0;
      double y = 0.0;
      if (parse_number(a[c], x) && parse_number(e[c], y)) {
        CHECK(std::abs(x - y) <= 1e-10 + 1e-8 * std::abs(y));
      } else {
        CHECK(a[c] == e[c]);
      }
    }
  }
}

RunConfig config_for(const std::string& command) {
  RunConfig c;
  c.command = command;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  RunConfig c = config_for("tv-curve");
  CHECK_NOTHROW(c.validate());
  c.lambda = 1.0;
  c.rho = 0.5;
  CHECK_THROWS_WITH_AS(c.validate(), "give exactly one of lambda and rho", ConfigError);
  c.rho.reset();
  c.t_grid = {1.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.t_grid = {-1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.t_grid.clear();
  c.x1 = 5;
  c.buffer = 4;
  CHECK_THROWS_WITH_AS(c.validate(), "start state lies outside the buffer", ConfigError);
  c.buffer.reset();
  c.tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.tol = 1e-12;
  c.mu = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("arrival rate from lambda, rho or the default") {
  RunConfig c;
  CHECK(c.arrival_rate() == 1.0);
  c.rho = 0.5;
  c.mu = 2.0;
  CHECK(c.arrival_rate() == 2.0);
  c.rho.reset();
  c.lambda = 0.3;
  CHECK(c.arrival_rate() == 0.3);
  CHECK(config_for("verify").output_format() == OutputFormat::json);
  CHECK(config_for("fig1").output_format() == OutputFormat::csv);
}

TEST_CASE("JSON config merge") {
  RunConfig c = config_for("hitting");
  merge_json_config(c, R"({"rho": 0.4, "mu": 2, "x1": 3, "x2": 1, "t_grid": [1, 5],
                          "buffer": 60, "tol": 1e-10, "reps": 50, "seed": 9,
                          "out": "o.csv", "format": "json"})");
  CHECK(*c.rho == 0.4);
  CHECK(*c.mu == 2.0);
  CHECK(c.start() == QueuePair{3, 1});
  CHECK(c.t_grid == std::vector<double>{1.0, 5.0});
  CHECK(*c.buffer == 60);
  CHECK(c.tol == 1e-10);
  CHECK(c.reps == 50);
  CHECK(c.seed == 9);
  CHECK(c.out == "o.csv");
  CHECK(c.output_format() == OutputFormat::json);

  merge_json_config(c, R"({"t_grid": "2, 4"})");
  CHECK(c.t_grid == std::vector<double>{2.0, 4.0});

  CHECK_THROWS_WITH_AS(merge_json_config(c, R"({"foo": 1})"), "unknown config key 'foo'",
                       ConfigError);
  CHECK_THROWS_AS(merge_json_config(c, "{\"rho\": "), ConfigError);
  CHECK_THROWS_AS(merge_json_config(c, R"({"rho": "high"})"), ConfigError);
  CHECK_THROWS_AS(merge_json_config(c, "[1, 2]"), ConfigError);
  CHECK_THROWS_AS(merge_json_config(c, R"({"reps": 0})"), ConfigError);
  CHECK_THROWS_AS(merge_json_config(c, R"({"format": "xml"})"), ConfigError);
  CHECK_THROWS_AS(merge_json_config_file(c, "/nonexistent/config.json"), ConfigError);
}

TEST_CASE("t-grid parsing") {
  CHECK(parse_grid("1, 2.5,10") == std::vector<double>{1.0, 2.5, 10.0});
  CHECK(parse_grid("1e3") == std::vector<double>{1000.0});
  CHECK_THROWS_AS((void)parse_grid("1,,2"), ConfigError);
  CHECK_THROWS_AS((void)parse_grid("abc"), ConfigError);
  CHECK_THROWS_AS((void)parse_grid(""), ConfigError);
}

TEST_CASE("CSV and JSON rendering") {
  CommandResult r;
  r.command = "demo";
  r.meta.emplace_back("mu", 1.0);
  Table a{"first", {"x", "name", "flag", "gap"}, {}};
  a.add({1.0 / 3.0, std::string("a,b"), true, Cell{}});
  a.add({123456789012345.0, std::string("plain"), false, 7LL});
  Table b{"second", {"k"}, {}};
  b.add({2.0});
  r.tables = {a, b};
  CHECK_THROWS_AS(a.add({1.0}), std::logic_error);

  const std::string csv = render_csv(r);
  CHECK(csv ==
        "x,name,flag,gap\n"
        "0.333333333333,\"a,b\",true,\n"
        "1.23456789012e+14,plain,false,7\n"
        "\n"
        "k\n"
        "2\n");

  const auto doc = nlohmann::json::parse(render_json(r));
  CHECK(doc["command"] == "demo");
  CHECK(doc["pass"] == true);
  CHECK(doc["mu"] == 1.0);
  CHECK(doc["first"][0]["gap"].is_null());
  CHECK(doc["first"][1]["gap"] == 7);
  CHECK(doc["second"][0]["k"] == 2.0);
  CHECK(render(r, OutputFormat::csv) == csv);
}

TEST_CASE("atomic writes replace the target and leave no temporaries") {
  const fs::path dir = fs::temp_directory_path() / "jsq_write_atomic_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path target = dir / "out.csv";
  write_atomic(target.string(), "first\n");
  CHECK(read_file(target) == "first\n");
  write_atomic(target.string(), "second\n");
  CHECK(read_file(target) == "second\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS(write_atomic((dir / "missing" / "x.csv").string(), "x"));
  fs::remove_all(dir);
}

TEST_CASE("tv curve at rho = 0.5 from the empty system") {
  const SystemParams params{1.0, 1.0, default_buffer(0.5, {0, 0})};
  const TvCurve curve = tv_curve(params, {0, 0}, {10.0, 50.0, 100.0}, 1e-12);
  REQUIRE(curve.rows.size() == 3);
  CHECK(curve.rows[0].bound_c1 == doctest::Approx(0.45));
  CHECK(curve.rows[0].bound_c1k == doctest::Approx(0.45));
  for (const auto& row : curve.rows) {
    CHECK(row.pass);
    CHECK(row.pass == (row.tv_exact + row.tv_uncertainty <= row.bound_c1k));
    CHECK(row.tv_uncertainty < 1e-9);
  }
  CHECK(curve.rows[1].tv_exact < curve.rows[0].tv_exact);
}

TEST_CASE("fig1 series starts at the initial total") {
  const Fig1Series s = fig1_series(0.5, 0.5, {3, 2}, {0.0, 10.0}, 200, 5, std::nullopt, 1e-12);
  REQUIRE(s.rows.size() == 2);
  CHECK(s.lambda == doctest::Approx(0.5));
  REQUIRE(s.buffer);
  CHECK(s.rows[0].mean_mc == 5.0);
  CHECK(s.rows[0].ci_halfwidth == 0.0);
  CHECK(*s.rows[0].mean_exact == doctest::Approx(5.0));
  CHECK(s.rows[1].stationary_mean_exact);

  const Fig1Series heavy = fig1_series(0.999, 0.5, {0, 0}, {0.0, 1.0}, 20, 5, std::nullopt, 1e-12);
  CHECK_FALSE(heavy.buffer);
  CHECK_FALSE(heavy.rows[1].mean_exact);
}

TEST_CASE("fig2 bound values and K column") {
  const CommandResult r = cmd_fig2(config_for("fig2"));
  REQUIRE(r.tables.size() == 2);
  bool found = false;
  for (const auto& row : r.tables[0].rows) {
    if (std::get<double>(row[0]) == 0.5 && std::get<double>(row[1]) == 100.0) {
      CHECK(std::get<double>(row[2]) == doctest::Approx(0.645));
      found = true;
    }
  }
  CHECK(found);
  const auto& k = r.tables[1];
  REQUIRE(k.rows.size() == 100);
  CHECK(std::get<double>(k.rows[30][1]) == doctest::Approx(k_factor(0.3)));
  CHECK(std::get<double>(k.rows[99][1]) == 1.0);
}

TEST_CASE("hitting table rows and recomputable verdicts") {
  const SystemParams params{1.0, 1.0, default_buffer(0.5, {1, 1})};
  const HittingTable h = hitting_table(params, 2000, kDefaultSeed);
  REQUIRE(h.rows.size() == 3);
  CHECK(h.rows[0].quantity == "E[T0]");
  CHECK(h.rows[0].exact == doctest::Approx(2.16488248439).epsilon(1e-9));
  CHECK(*h.rows[0].bound == doctest::Approx(3.0));
  CHECK(*h.rows[1].bound == doctest::Approx(2.0));
  CHECK(*h.rows[2].bound == doctest::Approx(3.0));
  for (const auto& row : h.rows) {
    if (row.bound) CHECK(*row.bound_pass() == (row.exact <= *row.bound * (1 + 1e-9)));
    if (row.comparison) CHECK(*row.comparison_pass() == (row.exact <= *row.comparison));
    CHECK(row.ci_halfwidth > 0.0);
  }
  RunConfig c = config_for("hitting");
  c.rho = 0.8;
  const CommandResult heavy = cmd_hitting(c);
  const auto& t1 = heavy.tables[0].rows[1];
  CHECK(std::holds_alternative<std::monostate>(t1[4]));
}

TEST_CASE("golden outputs at rho = 0.5") {
  RunConfig tv = config_for("tv-curve");
  tv.rho = 0.5;
  check_matches_golden(render_csv(run_command(tv)), "tv_curve_rho0.5.csv");

  RunConfig hit = config_for("hitting");
  hit.rho = 0.5;
  hit.reps = 2000;
  check_matches_golden(render_csv(run_command(hit)), "hitting_rho0.5.csv");

  check_matches_golden(render_csv(run_command(config_for("fig2"))), "fig2.csv");
}

TEST_CASE("buffer choice and command errors") {
  RunConfig c = config_for("tv-curve");
  c.buffer = 17;
  CHECK(choose_buffer(c, 0.5) == 17);
  c.buffer.reset();
  CHECK(choose_buffer(c, 0.5) == default_buffer(0.5, {0, 0}));
  CHECK_THROWS_AS((void)choose_buffer(c, 0.999), ConfigError);

  c.lambda = 2.0;
  CHECK_THROWS_WITH_AS((void)run_command(c), "unstable system", UnstableSystem);
  CHECK_THROWS_AS((void)run_command(config_for("plot")), ConfigError);
}

TEST_CASE("verify passes at rho = 0.5 and checks both truncation levels") {
  const SystemParams params{1.0, 1.0, default_buffer(0.5, {0, 0})};
  const VerifyReport report = verify_all(params, {0, 0}, {10.0, 100.0}, 200, kDefaultSeed, 1e-12);
  CHECK(report.pass());
  bool small = false;
  bool doubled = false;
  bool agreement = false;
  for (const auto& c : report.checks) {
    CAPTURE(c.name);
    CHECK(c.pass);
    small = small || c.buffer == params.buffer;
    doubled = doubled || c.buffer == 2 * params.buffer;
    agreement = agreement || c.name == "truncation_verdicts_differ";
  }
  CHECK(small);
  CHECK(doubled);
  CHECK(agreement);
}
