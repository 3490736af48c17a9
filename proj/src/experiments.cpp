#include "jsq/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

#include "jsq/bounds.hpp"
#include "jsq/errors.hpp"
#include "jsq/jsq_model.hpp"
#include "jsq/markov_engine.hpp"

namespace jsq {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  if (lambda && rho) throw ConfigError("give exactly one of lambda and rho");
  if (lambda && (!std::isfinite(*lambda) || *lambda < 0.0))
    throw ConfigError("lambda must be finite and >= 0");
  if (rho && (!std::isfinite(*rho) || *rho < 0.0))
    throw ConfigError("rho must be finite and >= 0");
  if (mu && (!std::isfinite(*mu) || *mu <= 0.0)) throw ConfigError("mu must be finite and > 0");
  if (x1 < 0 || x2 < 0) throw ConfigError("x1 and x2 must be >= 0");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!std::isfinite(t_grid[i]) || t_grid[i] < 0.0)
      throw ConfigError("t-grid entries must be finite and >= 0");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
      throw ConfigError("t-grid must be strictly increasing");
  }
  if (buffer && *buffer < 1) throw ConfigError("buffer must be >= 1");
  if (buffer && (x1 > *buffer || x2 > *buffer))
    throw ConfigError("start state lies outside the buffer");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (reps < 1) throw ConfigError("reps must be >= 1");
}

double RunConfig::arrival_rate(double mu_fallback) const {
  if (lambda) return *lambda;
  if (rho) return 2.0 * service_rate(mu_fallback) * *rho;
  return 1.0;
}

std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc() || end != item.data() + item.size())
      throw ConfigError("bad t-grid entry '" + std::string(item) + "'");
    out.push_back(value);
    pos = comma + 1;
  }
  return out;
}

namespace {

template <class T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

OutputFormat parse_format(const std::string& text) {
  if (text == "csv") return OutputFormat::csv;
  if (text == "json") return OutputFormat::json;
  throw ConfigError("format must be csv or json, got '" + text + "'");
}

}  // namespace

void merge_json_config(RunConfig& config, std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "command") {
      config.command = get_as<std::string>(value, key);
    } else if (key == "lambda") {
      config.lambda = get_as<double>(value, key);
    } else if (key == "rho") {
      config.rho = get_as<double>(value, key);
    } else if (key == "mu") {
      config.mu = get_as<double>(value, key);
    } else if (key == "x1") {
      config.x1 = get_as<int>(value, key);
    } else if (key == "x2") {
      config.x2 = get_as<int>(value, key);
    } else if (key == "t_grid") {
      config.t_grid = value.is_string() ? parse_grid(get_as<std::string>(value, key))
                                        : get_as<std::vector<double>>(value, key);
    } else if (key == "buffer") {
      config.buffer = get_as<int>(value, key);
    } else if (key == "tol") {
      config.tol = get_as<double>(value, key);
    } else if (key == "reps") {
      const auto reps = get_as<long long>(value, key);
      if (reps < 1) throw ConfigError("reps must be >= 1");
      config.reps = static_cast<std::size_t>(reps);
    } else if (key == "seed") {
      config.seed = get_as<std::uint64_t>(value, key);
    } else if (key == "out") {
      config.out = get_as<std::string>(value, key);
    } else if (key == "format") {
      config.format = parse_format(get_as<std::string>(value, key));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

void merge_json_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  merge_json_config(config, text.str());
}

// ---------------------------------------------------------------------------
// Rendering

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw std::logic_error("table '" + name + "': row width does not match header");
  rows.push_back(std::move(row));
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string csv_cell(const Cell& cell) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(long long v) const { return std::to_string(v); }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
    std::string operator()(const std::string& v) const {
      if (v.find_first_of(",\"\n") == std::string::npos) return v;
      std::string quoted = "\"";
      for (char c : v) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      return quoted + '"';
    }
  };
  return std::visit(Visitor{}, cell);
}

json json_cell(const Cell& cell) {
  struct Visitor {
    json operator()(std::monostate) const { return nullptr; }
    json operator()(double v) const { return std::isfinite(v) ? json(v) : json(nullptr); }
    json operator()(long long v) const { return v; }
    json operator()(bool v) const { return v; }
    json operator()(const std::string& v) const { return v; }
  };
  return std::visit(Visitor{}, cell);
}

Cell opt_cell(const std::optional<double>& v) {
  return v ? Cell{*v} : Cell{};
}

Cell opt_cell(const std::optional<bool>& v) {
  return v ? Cell{*v} : Cell{};
}

}  // namespace

std::string render_csv(const CommandResult& result) {
  std::ostringstream os;
  bool first = true;
  for (const auto& table : result.tables) {
    if (!first) os << '\n';
    first = false;
    for (std::size_t c = 0; c < table.columns.size(); ++c)
      os << (c ? "," : "") << table.columns[c];
    os << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
      os << '\n';
    }
  }
  return os.str();
}

std::string render_json(const CommandResult& result) {
  json doc = json::object();
  doc["command"] = result.command;
  doc["pass"] = result.pass;
  for (const auto& [key, value] : result.meta) doc[key] = json_cell(value);
  for (const auto& table : result.tables) {
    json rows = json::array();
    for (const auto& row : table.rows) {
      json obj = json::object();
      for (std::size_t c = 0; c < row.size(); ++c) obj[table.columns[c]] = json_cell(row[c]);
      rows.push_back(std::move(obj));
    }
    doc[table.name] = std::move(rows);
  }
  if (!result.warnings.empty()) doc["warnings"] = result.warnings;
  return doc.dump(2) + "\n";
}

std::string render(const CommandResult& result, OutputFormat format) {
  return format == OutputFormat::json ? render_json(result) : render_csv(result);
}

void write_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path temp = target;
  temp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + temp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(temp, ignored);
      throw std::runtime_error("write to '" + temp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(temp, ignored);
    throw std::runtime_error("cannot rename onto '" + path + "': " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

DistVec start_distribution(const StateSpace& space, const QueuePair& x) {
  if (!space.contains(x)) throw ConfigError("start state lies outside the buffer");
  return DistVec::point_mass(space.size(), space.index(x));
}

std::vector<double> sorted_copy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TvCurve tv_curve(const SystemParams& params, const QueuePair& x,
                 const std::vector<double>& times, double tol) {
  params.require_stable();
  for (double t : times)
    if (!(t > 0.0)) throw ConfigError("tv-curve needs t > 0");
  const StateSpace space(params.buffer);
  const Generator g = jsq_generator(params);
  const DistVec pi = stationary_distribution(g);
  const double pi_radius = 0.5 * tail_mass_bound(params);
  const std::vector<DistVec> path = transient_path(g, start_distribution(space, x), times, tol);

  TvCurve curve{params, x, {}};
  for (std::size_t k = 0; k < times.size(); ++k) {
    const TvDistance tv = total_variation(path[k], pi);
    TvRow row;
    row.t = times[k];
    row.tv_exact = tv.value;
    row.tv_uncertainty = tv.radius + pi_radius;
    row.bound_c1 = tv_bound_weak(params.lambda, params.mu, x, row.t);
    row.bound_c1k = tv_bound(params.lambda, params.mu, x, row.t);
    row.pass = row.tv_exact + row.tv_uncertainty <= row.bound_c1k;
    curve.rows.push_back(row);
  }
  return curve;
}

Fig1Series fig1_series(double rho, double mu, const QueuePair& x,
                       const std::vector<double>& times, std::size_t reps,
                       std::uint64_t seed, std::optional<int> buffer, double tol) {
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  if (rho >= 1.0) throw UnstableSystem();
  Fig1Series series;
  series.rho = rho;
  series.mu = mu;
  series.lambda = 2.0 * mu * rho;
  series.seed = seed;

  std::vector<std::vector<double>> samples(times.size(), std::vector<double>(reps));
  for (std::size_t i = 0; i < reps; ++i) {
    Rng rng = Rng::for_replication(seed, i);
    const std::vector<int> totals =
        totals_on_grid(series.lambda, mu, x, Discipline::jsq, times, rng);
    for (std::size_t k = 0; k < times.size(); ++k) samples[k][i] = totals[k];
  }

  if (buffer) {
    series.buffer = *buffer;
  } else {
    const int b = default_buffer(rho, x);
    if (b > 0) series.buffer = b;
  }
  std::vector<DistVec> path;
  std::optional<double> stationary_mean;
  if (series.buffer) {
    const SystemParams params{series.lambda, mu, *series.buffer};
    const StateSpace space(params.buffer);
    const Generator g = jsq_generator(params);
    path = transient_path(g, start_distribution(space, x), times, tol);
    stationary_mean = mean_total(stationary_distribution(g), space);
  }

  for (std::size_t k = 0; k < times.size(); ++k) {
    const HittingStats stats = summarize(samples[k], seed);
    Fig1Row row;
    row.rho = rho;
    row.t = times[k];
    row.mean_mc = stats.mean;
    row.ci_halfwidth = stats.half_width;
    if (series.buffer) {
      row.mean_exact = mean_total(path[k], StateSpace(*series.buffer));
      row.stationary_mean_exact = stationary_mean;
    }
    series.rows.push_back(row);
  }
  return series;
}

std::optional<bool> HittingRow::bound_pass() const {
  if (!bound) return std::nullopt;
  return exact <= *bound;
}

std::optional<bool> HittingRow::comparison_pass() const {
  if (!comparison) return std::nullopt;
  return exact <= *comparison;
}

HittingTable hitting_table(const SystemParams& params, std::size_t reps, std::uint64_t seed) {
  params.require_stable();
  if (!(params.lambda > 0.0)) throw ConfigError("hitting: lambda must be > 0");
  const ExactHittingTimes exact = exact_hitting_times(params);
  const T0Bounds t0_bounds = t0_expectation_bounds(params.lambda, params.mu);
  const Mm1ClosedForms mm1 = mm1_closed_forms(params.lambda, params.rho(), 0);

  static constexpr QueuePair kOrigin[] = {{0, 0}};
  auto mc = [&](std::uint64_t stream_seed, auto draw) {
    const std::vector<double> s = replicate(reps, stream_seed, draw);
    return summarize(s, stream_seed);
  };
  const HittingStats t0 = mc(seed, [&](Rng& rng) { return sample_T0(params, rng); });
  const HittingStats t1 = mc(seed + 1, [&](Rng& rng) { return sample_T1(params, rng); });
  const HittingStats prod = mc(seed + 2, [&](Rng& rng) {
    return sample_hitting_time(params, Discipline::product, {1, 0}, kOrigin, rng);
  });

  HittingTable table{params, seed, reps, {}};
  table.rows.push_back({"E[T0]", exact.t0, t0.mean, t0.half_width, t0_bounds.best,
                        exact.product_10_to_origin});
  table.rows.push_back({"E[T1]", exact.t1, t1.mean, t1.half_width,
                        t1_expectation_bound(params.lambda, params.mu), std::nullopt});
  table.rows.push_back({"E[T_product_10_to_00]", exact.product_10_to_origin, prod.mean,
                        prod.half_width, mm1.hit_from_10, std::nullopt});
  return table;
}

// ---------------------------------------------------------------------------
// Verification

namespace {

std::string at_t(const std::string& name, double t) {
  return name + "[t=" + format_double(t) + "]";
}

Check make_check(std::string name, int buffer, double lhs, double rhs, double tolerance = 0.0) {
  const Certificate c = certify(std::move(name), lhs, rhs, tolerance);
  return {c.name, buffer, c.lhs, c.rhs, c.margin, c.pass, std::nullopt};
}

std::vector<Check> truncation_checks(const SystemParams& params, const QueuePair& x,
                                     const std::vector<double>& times, double tol,
                                     double& e_t0) {
  std::vector<Check> out;
  const int b = params.buffer;
  const double l = params.lambda;
  const double m = params.mu;
  const double rho = params.rho();
  const StateSpace space(b);
  const Generator g = jsq_generator(params);
  const DistVec pi = stationary_distribution(g);
  const double pi_mean = mean_total(pi, space);
  const double pi_radius = 0.5 * tail_mass_bound(params);

  std::vector<double> positive;
  for (double t : times)
    if (t > 0.0) positive.push_back(t);
  const std::vector<DistVec> path = transient_path(g, start_distribution(space, x), positive, tol);
  for (std::size_t k = 0; k < positive.size(); ++k) {
    const double t = positive[k];
    const TvDistance tv = total_variation(path[k], pi);
    out.push_back(make_check(at_t("tv_bound", t), b, tv.value + tv.radius + pi_radius,
                             tv_bound(l, m, x, t)));
    const MeanBounds mb = mean_bounds(l, m, x, t);
    const double mean_t = mean_total(path[k], space);
    out.push_back(make_check(at_t("mean_difference", t), b, std::abs(mean_t - pi_mean), mb.diff));
    out.push_back(make_check(at_t("mean_absolute", t), b, mean_t, mb.abs));
  }
  out.push_back(make_check("stationary_mean", b, pi_mean, stationary_mean_upper(rho)));

  const ExactHittingTimes exact = exact_hitting_times(params);
  e_t0 = exact.t0;
  const T0Bounds t0 = t0_expectation_bounds(l, m);
  out.push_back(make_check("e_t0_general", b, exact.t0, t0.general));
  if (t0.light) out.push_back(make_check("e_t0_light", b, exact.t0, *t0.light));
  if (const auto t1 = t1_expectation_bound(l, m))
    out.push_back(make_check("e_t1_light", b, exact.t1, *t1));
  out.push_back(make_check("e_t0_le_product_hit", b, exact.t0, exact.product_10_to_origin));
  const Mm1ClosedForms mm1 = mm1_closed_forms(l, rho, 0);
  out.push_back(make_check("product_hit_le_closed_form", b, exact.product_10_to_origin,
                           mm1.hit_from_10, 1e-9 * mm1.hit_from_10));
  out.push_back(make_check("product_return_le_closed_form", b, exact.product_return_00,
                           mm1.return_time_00, 1e-9 * mm1.return_time_00));
  const RecursionCertificate rec = recursion_certificate(params, exact);
  out.push_back(make_check("t0_recursion_relative_residual", b, rec.t0_relative_residual, 1e-6));
  out.push_back(make_check("t1_recursion", b, rec.t1_lhs, rec.t1_rhs));

  // Single M/M/1 queue fed at lambda/2, for each distinct start coordinate.
  const Generator single = mm1_generator(0.5 * l, m, b);
  std::vector<int> starts{x.q1};
  if (x.q2 != x.q1) starts.push_back(x.q2);
  for (int s : starts) {
    const DistVec init = DistVec::point_mass(static_cast<std::size_t>(b) + 1, s);
    const std::vector<DistVec> single_path = transient_path(single, init, positive, tol);
    const double upper = mm1_closed_forms(l, rho, s).transient_second_moment_upper;
    for (std::size_t k = 0; k < positive.size(); ++k) {
      out.push_back(make_check(at_t("mm1_second_moment[x=" + std::to_string(s) + "]", positive[k]),
                               b, second_moment_1d(single_path[k]), upper));
    }
  }
  return out;
}

std::vector<Check> simulation_checks(const SystemParams& params, const QueuePair& x,
                                     const std::vector<double>& times, std::size_t reps,
                                     std::uint64_t seed, double e_t0, double tol) {
  std::vector<Check> out;
  auto seeded = [](Check c, std::uint64_t s) {
    c.seed = s;
    return c;
  };
  const double l = params.lambda;
  const double m = params.mu;

  {
    const std::uint64_t s = seed;
    const DominanceSuiteResult r = run_dominance_suite(l, m, reps, 1000, 10, s);
    const auto violations = static_cast<double>(r.dominance_violations + r.gap_violations +
                                                r.zero_implication_violations +
                                                r.coincidence_breaks);
    out.push_back(seeded(make_check("coupled_dominance_violations", 0, violations, 0.0), s));
  }

  static constexpr QueuePair kOrigin[] = {{0, 0}};
  if (x.total() > 0) {
    const std::uint64_t s = seed + 1;
    const std::vector<double> samples = replicate(
        reps, s, [&](Rng& rng) { return sample_T_general(params, x, kOrigin, rng); });
    const HittingStats st = summarize(samples, s);
    out.push_back(seeded(make_check("hitting_time_from_x_mean", params.buffer, st.mean,
                                    x.total() * e_t0 + st.half_width),
                         s));
  }

  {
    const std::uint64_t s = seed + 2;
    const std::vector<double> direct = replicate(reps, s, [&](Rng& rng) {
      return sample_T_general(params, {1, 1}, kOrigin, rng);
    });
    const std::vector<double> split = replicate(reps, s + 1000003, [&](Rng& rng) {
      const double a = sample_T1(params, rng);
      return a + sample_T0(params, rng);
    });
    const KsResult ks = ks_dominated(direct, split, 0.01);
    out.push_back(seeded(make_check("t11_ks_dominated_by_t1_plus_t0", 0, ks.statistic,
                                    ks.critical),
                         s));
  }

  std::vector<double> positive;
  for (double t : times)
    if (t > 0.0) positive.push_back(t);

  {
    const std::uint64_t s = seed + 3;
    std::vector<std::vector<double>> jsq_totals(positive.size(), std::vector<double>(reps));
    std::vector<std::vector<double>> product_totals = jsq_totals;
    for (std::size_t i = 0; i < reps; ++i) {
      Rng a = Rng::for_replication(s, 2 * i);
      Rng b = Rng::for_replication(s, 2 * i + 1);
      const auto tj = totals_on_grid(l, m, x, Discipline::jsq, positive, a);
      const auto tp = totals_on_grid(l, m, x, Discipline::product, positive, b);
      for (std::size_t k = 0; k < positive.size(); ++k) {
        jsq_totals[k][i] = tj[k];
        product_totals[k][i] = tp[k];
      }
    }
    for (std::size_t k = 0; k < positive.size(); ++k) {
      const KsResult ks = ks_dominated(jsq_totals[k], product_totals[k], 0.01);
      out.push_back(seeded(make_check(at_t("total_ks_jsq_dominated_by_product", positive[k]), 0,
                                      ks.statistic, ks.critical),
                           s));
    }
  }

  {
    const std::uint64_t s = seed + 4;
    const StateSpace space(params.buffer);
    const Generator g = jsq_generator(params);
    const DistVec pi = stationary_distribution(g);
    const StationarySampler sampler(pi, space);
    const std::vector<double> meet = sorted_copy(replicate(
        reps, s, [&](Rng& rng) { return sample_meeting_time(params, x, sampler, rng); }));
    const std::vector<DistVec> path =
        transient_path(g, start_distribution(space, x), positive, tol);
    for (std::size_t k = 0; k < positive.size(); ++k) {
      const double t = positive[k];
      const auto not_met = static_cast<std::size_t>(
          meet.end() - std::lower_bound(meet.begin(), meet.end(), t));
      const double tv = total_variation(path[k], pi).value;
      out.push_back(seeded(make_check(at_t("tv_le_meeting_tail", t), params.buffer, tv,
                                      wilson_upper(not_met, reps, 3.0)),
                           s));
    }
  }
  return out;
}

}  // namespace

bool VerifyReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

VerifyReport verify_all(const SystemParams& params, const QueuePair& x,
                        const std::vector<double>& times, std::size_t reps,
                        std::uint64_t seed, double tol) {
  params.require_stable();
  if (!(params.lambda > 0.0)) throw ConfigError("verify: lambda must be > 0");
  VerifyReport report;
  report.lambda = params.lambda;
  report.mu = params.mu;
  report.rho = params.rho();
  report.start = x;
  report.buffer = params.buffer;

  SystemParams doubled = params;
  doubled.buffer = 2 * params.buffer;
  double e_t0 = 0.0;
  const std::vector<Check> base = truncation_checks(params, x, times, tol, e_t0);
  const std::vector<Check> wide = truncation_checks(doubled, x, times, tol, e_t0);
  report.checks = base;
  report.checks.insert(report.checks.end(), wide.begin(), wide.end());

  std::map<std::string, bool> verdict;
  for (const auto& c : base) verdict[c.name] = c.pass;
  double mismatches = 0.0;
  for (const auto& c : wide) {
    const auto it = verdict.find(c.name);
    if (it == verdict.end() || it->second != c.pass) mismatches += 1.0;
  }
  if (base.size() != wide.size()) mismatches += 1.0;
  report.checks.push_back(make_check("truncation_verdicts_differ", 0, mismatches, 0.0));

  const std::vector<Check> sim = simulation_checks(params, x, times, reps, seed, e_t0, tol);
  report.checks.insert(report.checks.end(), sim.begin(), sim.end());
  return report;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

const std::vector<double> kDefaultTvGrid{10, 50, 100, 500, 1000};
const std::vector<double> kDefaultFig1Grid{0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
const std::vector<double> kFig2Rhos{0.3, 0.5, 0.7, 0.9};

std::vector<double> grid_or(const RunConfig& config, const std::vector<double>& fallback) {
  return config.t_grid.empty() ? fallback : config.t_grid;
}

std::vector<double> log_grid(double from, double to, int per_decade) {
  std::vector<double> out;
  const int steps = static_cast<int>(std::round(std::log10(to / from) * per_decade));
  for (int k = 0; k <= steps; ++k)
    out.push_back(from * std::pow(10.0, static_cast<double>(k) / per_decade));
  return out;
}

SystemParams params_from(const RunConfig& config) {
  config.validate();
  SystemParams p;
  p.mu = config.service_rate();
  p.lambda = config.arrival_rate();
  p.buffer = 1;
  p.require_stable();
  p.buffer = choose_buffer(config, p.rho());
  return p;
}

void add_param_meta(CommandResult& r, const SystemParams& p) {
  r.meta.emplace_back("lambda", p.lambda);
  r.meta.emplace_back("mu", p.mu);
  r.meta.emplace_back("rho", p.rho());
  r.meta.emplace_back("buffer", static_cast<long long>(p.buffer));
}

}  // namespace

int choose_buffer(const RunConfig& config, double rho) {
  if (config.buffer) return *config.buffer;
  const int b = default_buffer(rho, config.start());
  if (b < 0)
    throw ConfigError("no buffer up to " + std::to_string(kMaxBuffer) +
                      " meets the tail target at rho = " + format_double(rho) +
                      "; pass --buffer");
  return b;
}

CommandResult cmd_tv_curve(const RunConfig& config) {
  const SystemParams p = params_from(config);
  const TvCurve curve = tv_curve(p, config.start(), grid_or(config, kDefaultTvGrid), config.tol);
  CommandResult r;
  r.command = "tv-curve";
  add_param_meta(r, p);
  r.meta.emplace_back("x1", static_cast<long long>(config.x1));
  r.meta.emplace_back("x2", static_cast<long long>(config.x2));
  Table t{"rows", {"t", "tv_exact", "tv_uncertainty", "bound_c1", "bound_c1k", "pass"}, {}};
  for (const auto& row : curve.rows) {
    t.add({row.t, row.tv_exact, row.tv_uncertainty, row.bound_c1, row.bound_c1k, row.pass});
    r.pass = r.pass && row.pass;
  }
  r.tables.push_back(std::move(t));
  return r;
}

CommandResult cmd_fig1(const RunConfig& config) {
  config.validate();
  const double mu = config.service_rate(0.5);
  std::vector<double> rhos{0.5, 0.999};
  if (config.rho) rhos = {*config.rho};
  if (config.lambda) rhos = {*config.lambda / (2.0 * mu)};
  const std::vector<double> times = grid_or(config, kDefaultFig1Grid);

  CommandResult r;
  r.command = "fig1";
  r.meta.emplace_back("mu", mu);
  r.meta.emplace_back("x1", static_cast<long long>(config.x1));
  r.meta.emplace_back("x2", static_cast<long long>(config.x2));
  r.meta.emplace_back("reps", static_cast<long long>(config.reps));
  r.meta.emplace_back("seed", static_cast<long long>(config.seed));
  Table t{"rows",
          {"rho", "t", "mean_total_queue_mc", "ci_halfwidth", "mean_total_queue_exact",
           "stationary_mean_exact"},
          {}};
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    const Fig1Series s = fig1_series(rhos[k], mu, config.start(), times, config.reps,
                                     config.seed + k, config.buffer, config.tol);
    if (!s.buffer) {
      r.warnings.push_back("rho = " + format_double(rhos[k]) +
                           ": no buffer up to " + std::to_string(kMaxBuffer) +
                           " meets the tail target; exact columns omitted");
    }
    for (const auto& row : s.rows) {
      t.add({row.rho, row.t, row.mean_mc, row.ci_halfwidth, opt_cell(row.mean_exact),
             opt_cell(row.stationary_mean_exact)});
    }
  }
  r.tables.push_back(std::move(t));
  return r;
}

CommandResult cmd_fig2(const RunConfig& config) {
  config.validate();
  const double mu = config.service_rate();
  QueuePair x = config.start();
  if (x.total() == 0) x = {10, 10};
  std::vector<double> rhos = kFig2Rhos;
  if (config.rho) rhos = {*config.rho};
  if (config.lambda) rhos = {*config.lambda / (2.0 * mu)};
  std::vector<double> times = grid_or(config, log_grid(1.0, 1000.0, 10));
  for (double t : times)
    if (!(t > 0.0)) throw ConfigError("fig2 needs t > 0");

  CommandResult r;
  r.command = "fig2";
  r.meta.emplace_back("mu", mu);
  r.meta.emplace_back("x1", static_cast<long long>(x.q1));
  r.meta.emplace_back("x2", static_cast<long long>(x.q2));
  Table bound{"bound", {"rho", "t", "bound"}, {}};
  for (double rho : rhos) {
    for (double t : times) bound.add({rho, t, tv_bound(2.0 * mu * rho, mu, x, t)});
  }
  Table k{"k_factor", {"rho", "k"}, {}};
  for (int i = 0; i < 100; ++i) {
    const double rho = i / 100.0;
    k.add({rho, k_factor(rho)});
  }
  r.tables.push_back(std::move(bound));
  r.tables.push_back(std::move(k));
  return r;
}

CommandResult cmd_hitting(const RunConfig& config) {
  config.validate();
  SystemParams p;
  p.mu = config.service_rate();
  p.lambda = config.arrival_rate();
  p.require_stable();
  if (config.buffer) {
    p.buffer = *config.buffer;
  } else {
    p.buffer = default_buffer(p.rho(), {1, 1});
    if (p.buffer < 0) throw ConfigError("no default buffer meets the tail target; pass --buffer");
  }
  const HittingTable h = hitting_table(p, config.reps, config.seed);
  CommandResult r;
  r.command = "hitting";
  add_param_meta(r, p);
  r.meta.emplace_back("reps", static_cast<long long>(config.reps));
  r.meta.emplace_back("seed", static_cast<long long>(config.seed));
  Table t{"rows",
          {"quantity", "exact", "mc_mean", "ci_halfwidth", "bound", "exact_le_bound",
           "product_exact", "exact_le_product"},
          {}};
  for (const auto& row : h.rows) {
    const auto bp = row.bound_pass();
    const auto cp = row.comparison_pass();
    t.add({row.quantity, row.exact, row.mc_mean, row.ci_halfwidth, opt_cell(row.bound),
           opt_cell(bp), opt_cell(row.comparison), opt_cell(cp)});
    r.pass = r.pass && bp.value_or(true) && cp.value_or(true);
  }
  r.tables.push_back(std::move(t));
  return r;
}

CommandResult cmd_verify(const RunConfig& config) {
  const SystemParams p = params_from(config);
  const VerifyReport report =
      verify_all(p, config.start(), grid_or(config, kDefaultTvGrid), config.reps, config.seed,
                 config.tol);
  CommandResult r;
  r.command = "verify";
  r.pass = report.pass();
  add_param_meta(r, p);
  r.meta.emplace_back("doubled_buffer", static_cast<long long>(2 * p.buffer));
  r.meta.emplace_back("x1", static_cast<long long>(config.x1));
  r.meta.emplace_back("x2", static_cast<long long>(config.x2));
  r.meta.emplace_back("reps", static_cast<long long>(config.reps));
  r.meta.emplace_back("seed", static_cast<long long>(config.seed));
  Table t{"checks", {"name", "buffer", "lhs", "rhs", "margin", "pass", "seed"}, {}};
  for (const auto& c : report.checks) {
    t.add({c.name, c.buffer > 0 ? Cell{static_cast<long long>(c.buffer)} : Cell{}, c.lhs, c.rhs,
           c.margin, c.pass, c.seed ? Cell{static_cast<long long>(*c.seed)} : Cell{}});
  }
  r.tables.push_back(std::move(t));
  return r;
}

CommandResult run_command(const RunConfig& config) {
  if (config.command == "tv-curve") return cmd_tv_curve(config);
  if (config.command == "fig1") return cmd_fig1(config);
  if (config.command == "fig2") return cmd_fig2(config);
  if (config.command == "hitting") return cmd_hitting(config);
  if (config.command == "verify") return cmd_verify(config);
  throw ConfigError("unknown command '" + config.command + "'");
}

}  // namespace jsq
