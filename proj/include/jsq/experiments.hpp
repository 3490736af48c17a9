#pragma once

// Experiment orchestration behind the command-line tool: configuration,
// the five commands, and CSV / JSON rendering of their tables.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jsq/coupled_sim.hpp"
#include "jsq/params.hpp"
#include "jsq/state_space.hpp"

namespace jsq {

/// Bad configuration: unknown keys, malformed values, violated invariants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OutputFormat : std::uint8_t { csv, json };

inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct RunConfig {
  std::string command;
  std::optional<double> lambda;
  std::optional<double> rho;
  std::optional<double> mu;  // command default when unset
  int x1 = 0;
  int x2 = 0;
  std::vector<double> t_grid;  // command default when empty
  std::optional<int> buffer;
  double tol = 1e-12;
  std::size_t reps = 1000;
  std::uint64_t seed = kDefaultSeed;
  std::string out;  // empty: stdout
  std::optional<OutputFormat> format;  // json for verify, csv otherwise

  /// At most one of lambda / rho, strictly increasing non-negative t-grid,
  /// reps >= 1, non-negative start, tol > 0, buffer >= 1. Throws ConfigError.
  void validate() const;

  [[nodiscard]] double service_rate(double fallback = 1.0) const { return mu.value_or(fallback); }
  /// lambda, or 2 mu rho, or 1 when neither is given.
  [[nodiscard]] double arrival_rate(double mu_fallback = 1.0) const;
  [[nodiscard]] QueuePair start() const { return {x1, x2}; }
  [[nodiscard]] OutputFormat output_format() const {
    return format.value_or(command == "verify" ? OutputFormat::json : OutputFormat::csv);
  }
};

/// Overlays the keys of a flat JSON object onto `config`. Keys are the
/// snake_case field names (lambda, mu, rho, x1, x2, t_grid, buffer, tol,
/// reps, seed, out, format, command). Throws ConfigError with the parser
/// diagnostic on malformed input or unknown keys.
void merge_json_config(RunConfig& config, std::string_view text);
void merge_json_config_file(RunConfig& config, const std::string& path);

/// Parses "1,2.5,10" into {1, 2.5, 10}.
[[nodiscard]] std::vector<double> parse_grid(std::string_view text);

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::monostate, double, long long, bool, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

struct CommandResult {
  std::string command;
  bool pass = true;
  std::vector<std::pair<std::string, Cell>> meta;
  std::vector<Table> tables;
  std::vector<std::string> warnings;
};

/// Doubles use 12 significant digits, absent cells are empty, tables are
/// separated by one blank line.
[[nodiscard]] std::string render_csv(const CommandResult& result);
[[nodiscard]] std::string render_json(const CommandResult& result);
[[nodiscard]] std::string render(const CommandResult& result, OutputFormat format);

/// Writes to a temporary file next to `path` and renames it into place.
void write_atomic(const std::string& path, std::string_view content);

// ---------------------------------------------------------------------------
// Commands

struct TvRow {
  double t = 0.0;
  double tv_exact = 0.0;
  double tv_uncertainty = 0.0;
  double bound_c1 = 0.0;
  double bound_c1k = 0.0;
  bool pass = false;
};

struct TvCurve {
  SystemParams params;
  QueuePair start;
  std::vector<TvRow> rows;
};

/// Exact TV(P^t_x, pi) on [0,B]^2 against C1/t and C1K/t.
[[nodiscard]] TvCurve tv_curve(const SystemParams& params, const QueuePair& x,
                               const std::vector<double>& times, double tol);

struct Fig1Row {
  double rho = 0.0;
  double t = 0.0;
  double mean_mc = 0.0;
  double ci_halfwidth = 0.0;
  std::optional<double> mean_exact;
  std::optional<double> stationary_mean_exact;
};

struct Fig1Series {
  double rho = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  std::optional<int> buffer;  // absent when no admissible truncation exists
  std::uint64_t seed = 0;
  std::vector<Fig1Row> rows;
};

/// Mean total queue length over `times` from x: `reps` simulated paths, plus
/// the transient and stationary values on [0,B]^2 when B is available.
/// lambda = 2 mu rho.
[[nodiscard]] Fig1Series fig1_series(double rho, double mu, const QueuePair& x,
                                     const std::vector<double>& times, std::size_t reps,
                                     std::uint64_t seed, std::optional<int> buffer,
                                     double tol);

struct HittingRow {
  std::string quantity;
  double exact = 0.0;
  double mc_mean = 0.0;
  double ci_halfwidth = 0.0;
  std::optional<double> bound;
  std::optional<double> comparison;  // product-chain value for T0
  [[nodiscard]] std::optional<bool> bound_pass() const;
  [[nodiscard]] std::optional<bool> comparison_pass() const;
};

struct HittingTable {
  SystemParams params;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::vector<HittingRow> rows;  // T0, T1, product (1,0)->(0,0)
};

[[nodiscard]] HittingTable hitting_table(const SystemParams& params, std::size_t reps,
                                         std::uint64_t seed);

struct Check {
  std::string name;
  int buffer = 0;  // 0: not truncation dependent
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool pass = false;
  std::optional<std::uint64_t> seed;
};

struct VerifyReport {
  double lambda = 0.0;
  double mu = 0.0;
  double rho = 0.0;
  QueuePair start;
  int buffer = 0;
  std::vector<Check> checks;
  [[nodiscard]] bool pass() const;
};

/// Runs every certified inequality at B and 2B plus the simulation-based
/// checks, and a final check that both truncation levels agree.
[[nodiscard]] VerifyReport verify_all(const SystemParams& params, const QueuePair& x,
                                      const std::vector<double>& times, std::size_t reps,
                                      std::uint64_t seed, double tol);

/// Buffer from the config, else default_buffer(rho, x). Throws ConfigError
/// when no buffer up to the cap reaches the tail target.
[[nodiscard]] int choose_buffer(const RunConfig& config, double rho);

[[nodiscard]] CommandResult cmd_tv_curve(const RunConfig& config);
[[nodiscard]] CommandResult cmd_fig1(const RunConfig& config);
[[nodiscard]] CommandResult cmd_fig2(const RunConfig& config);
[[nodiscard]] CommandResult cmd_hitting(const RunConfig& config);
[[nodiscard]] CommandResult cmd_verify(const RunConfig& config);

/// Dispatches on config.command.
[[nodiscard]] CommandResult run_command(const RunConfig& config);

}  // namespace jsq
