// Command-line front end. Exit codes: 0 success, 1 a certified inequality
// failed, 2 usage / configuration / stability error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "jsq/errors.hpp"
#include "jsq/experiments.hpp"

namespace {

struct Flags {
  std::string config_file;
  std::optional<double> lambda;
  std::optional<double> mu;
  std::optional<double> rho;
  std::optional<int> x1;
  std::optional<int> x2;
  std::optional<std::string> t_grid;
  std::optional<int> buffer;
  std::optional<double> tol;
  std::optional<long long> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

void add_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config_file, "JSON config file; flags override its values");
  cmd.add_option("--lambda", f.lambda, "arrival rate");
  cmd.add_option("--mu", f.mu, "service rate of each server");
  cmd.add_option("--rho", f.rho, "traffic intensity lambda/(2 mu), instead of --lambda");
  cmd.add_option("--x1", f.x1, "initial length of queue 1");
  cmd.add_option("--x2", f.x2, "initial length of queue 2");
  cmd.add_option("--t-grid", f.t_grid, "comma-separated, strictly increasing times");
  cmd.add_option("--buffer", f.buffer, "truncation level B");
  cmd.add_option("--tol", f.tol, "uniformization tolerance");
  cmd.add_option("--reps", f.reps, "Monte Carlo replications");
  cmd.add_option("--seed", f.seed, "root seed");
  cmd.add_option("--out", f.out, "output path (default stdout)");
  cmd.add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

jsq::RunConfig build_config(const std::string& command, const Flags& f) {
  jsq::RunConfig c;
  if (!f.config_file.empty()) jsq::merge_json_config_file(c, f.config_file);
  c.command = command;
  // A flag for one of lambda / rho replaces whichever the file gave.
  if (f.lambda) {
    c.lambda = f.lambda;
    c.rho.reset();
  }
  if (f.rho) {
    if (!f.lambda) c.lambda.reset();
    c.rho = f.rho;
  }
  if (f.mu) c.mu = f.mu;
  if (f.x1) c.x1 = *f.x1;
  if (f.x2) c.x2 = *f.x2;
  if (f.t_grid) c.t_grid = jsq::parse_grid(*f.t_grid);
  if (f.buffer) c.buffer = f.buffer;
  if (f.tol) c.tol = *f.tol;
  if (f.reps) {
    if (*f.reps < 1) throw jsq::ConfigError("reps must be >= 1");
    c.reps = static_cast<std::size_t>(*f.reps);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.format) c.format = *f.format == "json" ? jsq::OutputFormat::json : jsq::OutputFormat::csv;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-server join-the-shortest-queue: exact solves, simulation and bound checks"};
  app.require_subcommand(1);
  Flags flags;
  const char* commands[][2] = {
      {"tv-curve", "exact TV distance to stationarity against the 1/t bounds"},
      {"fig1", "mean total queue length over time, simulated and exact"},
      {"fig2", "TV bound against t for several rho, and K(rho)"},
      {"hitting", "E[T0], E[T1] and the product-chain hitting time"},
      {"verify", "run every certified check at B and 2B; JSON report"},
  };
  for (const auto& [name, help] : commands) add_flags(*app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const jsq::RunConfig config = build_config(command, flags);
    const jsq::CommandResult result = jsq::run_command(config);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    const std::string text = jsq::render(result, config.output_format());
    if (config.out.empty()) {
      std::cout << text;
    } else {
      jsq::write_atomic(config.out, text);
    }
    if (!result.pass) std::cerr << command << ": certification failed\n";
    return result.pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
