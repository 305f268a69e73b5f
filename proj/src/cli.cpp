#include "effqr/cli.hpp"

#include "effqr/selftest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

namespace effqr::cli {

namespace {

using Index = Eigen::Index;
using nlohmann::json;

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cell.push_back(c);
    } else if (c == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return value;
}

// Fixed four decimals; never prints "-0.0000".
std::string fixed4(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s(buf);
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string sci4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::string format_level(double tau) {
  std::ostringstream s;
  s << tau;
  return s.str();
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* env = std::getenv("EFFQR_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  std::uint64_t value = 0;
  const std::string_view text(env);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Usage, "config", "EFFQR_SEED is not an unsigned integer: '" + std::string(env) + "'");
  }
  return value;
}

Format parse_format(const std::string& s) {
  if (s == "tsv") return Format::Tsv;
  if (s == "json") return Format::Json;
  throw Error(ErrorKind::Usage, "config", "unknown format '" + s + "' (expected tsv or json)");
}

CrossingRule parse_crossing(const std::string& s) {
  if (s == "anchored") return CrossingRule::Anchored;
  if (s == "sort") return CrossingRule::Sort;
  throw Error(ErrorKind::Usage, "config", "unknown crossing rule '" + s + "' (expected anchored or sort)");
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_number(trim(item));
    if (!v) throw Error(ErrorKind::Usage, "config", "grid entry '" + trim(item) + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

int report_error(const Error& e, std::ostream& err) {
  err << "effqr: " << e.stage() << ": " << e.message();
  if (e.row()) err << " (row " << *e.row() << ")";
  err << "\n";
  return exit_code(e.kind());
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return 1;
    case ErrorKind::Data: return 2;
    case ErrorKind::Numerical: return 3;
  }
  return 3;
}

Ingested ingest_csv(std::istream& in, const CsvOptions& opts) {
  if (opts.response.empty()) throw Error(ErrorKind::Usage, "ingest", "no response column given");
  if (opts.covariates.empty() && !opts.intercept) {
    throw Error(ErrorKind::Usage, "ingest", "no covariates and no intercept: empty design");
  }
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Data, "ingest", "input is empty (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_row(line);

  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::Data, "ingest", "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::string> wanted{opts.response};
  wanted.insert(wanted.end(), opts.covariates.begin(), opts.covariates.end());
  std::vector<std::size_t> idx;
  std::vector<bool> take_log;
  for (const auto& name : wanted) {
    idx.push_back(column(name));
    take_log.push_back(std::find(opts.log_columns.begin(), opts.log_columns.end(), name) != opts.log_columns.end());
  }
  for (const auto& name : opts.log_columns) {
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) {
      (void)column(name);
      throw Error(ErrorKind::Usage, "ingest", "log column '" + name + "' is neither the response nor a covariate");
    }
  }

  std::vector<std::vector<double>> rows;
  std::size_t rejected = 0;
  std::vector<std::string> notes;
  std::size_t file_row = 1;
  while (std::getline(in, line)) {
    ++file_row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_row(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "line " << file_row << " has " << cells.size() << " fields, header has " << header.size();
      throw Error(ErrorKind::Data, "ingest", msg.str(), file_row);
    }
    std::vector<double> values;
    std::string reason;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto v = parse_number(cells[idx[k]]);
      if (!v) {
        throw Error(ErrorKind::Data, "ingest",
                    "cannot parse '" + cells[idx[k]] + "' in column '" + wanted[k] + "' at line " +
                        std::to_string(file_row),
                    file_row);
      }
      double value = *v;
      if (!std::isfinite(value) && reason.empty()) reason = "non-finite value in '" + wanted[k] + "'";
      if (take_log[k]) {
        if (!(value > 0.0) && reason.empty()) reason = "non-positive value in log column '" + wanted[k] + "'";
        value = std::log(value);
      }
      values.push_back(value);
    }
    if (!reason.empty()) {
      ++rejected;
      if (notes.size() < 5) notes.push_back("line " + std::to_string(file_row) + ": " + reason);
      continue;
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(ErrorKind::Data, "ingest", "no usable rows after filtering");

  const auto n = static_cast<Index>(rows.size());
  const Index offset = opts.intercept ? 1 : 0;
  const auto p = static_cast<Index>(opts.covariates.size()) + offset;
  Vector y(n);
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    y(i) = r[0];
    if (opts.intercept) x(i, 0) = 1.0;
    for (Index j = 0; j < static_cast<Index>(opts.covariates.size()); ++j) x(i, j + offset) = r[static_cast<std::size_t>(j) + 1];
  }
  std::vector<std::string> names;
  if (opts.intercept) names.push_back("Intercept");
  names.insert(names.end(), opts.covariates.begin(), opts.covariates.end());
  return Ingested{make_dataset(std::move(y), std::move(x)), std::move(names), rejected, std::move(notes)};
}

Ingested ingest_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Data, "ingest", "cannot open '" + path + "'");
  return ingest_csv(in, opts);
}

FitReport fit_report(const Ingested& in, const FitRun& run) {
  run.cfg.validate();
  const QuantileGrid grid = make_grid(run.grid);
  FitReport rep{in.names, in.rejected, 0, 0, run.asymptotic_se, estimate(in.data, grid, run.cfg), {}, {}, {}};
  const double root_n = std::sqrt(static_cast<double>(in.data.n()));
  rep.asy_se[static_cast<std::size_t>(Estimator::TQE)] = rep.point.sigma2_tqe.cwiseSqrt() / root_n;
  rep.asy_se[static_cast<std::size_t>(Estimator::SEF)] = rep.point.sigma2_sef.cwiseSqrt() / root_n;
  rep.asy_se[static_cast<std::size_t>(Estimator::EFF)] = rep.point.sigma2_eff.cwiseSqrt() / root_n;
  if (run.asymptotic_se) {
    rep.esd = rep.asy_se;
  } else {
    const BootstrapResult boot = bootstrap_se(in.data, grid, run.cfg, run.bootstrap, run.cfg.seed, run.threads);
    rep.replications = boot.replications;
    rep.failures = boot.failures;
    rep.esd = boot.esd;
  }
  for (Estimator e : kEstimators) {
    const auto i = static_cast<std::size_t>(e);
    const Matrix& est = rep.point.get(e);
    rep.pvalue[i].resize(est.rows(), est.cols());
    for (Index k = 0; k < est.cols(); ++k) {
      for (Index j = 0; j < est.rows(); ++j) rep.pvalue[i](j, k) = bootstrap_pvalue(est(j, k), rep.esd[i](j, k));
    }
  }
  return rep;
}

std::string format_fit(const FitReport& rep, Format format) {
  const QuantileGrid& grid = rep.point.grid;
  const auto p = static_cast<Index>(rep.names.size());
  if (format == Format::Json) {
    json j;
    j["n"] = rep.point.n;
    j["p"] = rep.point.p;
    j["rejected_rows"] = rep.rejected;
    j["se_method"] = rep.asymptotic_se ? "asymptotic" : "bootstrap";
    j["bootstrap_replications"] = rep.replications;
    j["bootstrap_failures"] = rep.failures;
    j["grid"] = grid.levels();
    j["coefficients"] = rep.names;
    const auto& d = rep.point.diagnostics;
    j["diagnostics"] = {{"bandwidth", d.bandwidth},
                        {"bandwidth_warning", d.bandwidth_warning},
                        {"clamped_density_cells", d.clamped_cells},
                        {"crossed_rows", d.crossed_rows},
                        {"solver_iterations", d.solver_iterations},
                        {"solver_converged", d.solver_converged}};
    json rows = json::array();
    for (Index k = 0; k < static_cast<Index>(grid.size()); ++k) {
      for (Index c = 0; c < p; ++c) {
        for (Estimator e : kEstimators) {
          const auto i = static_cast<std::size_t>(e);
          rows.push_back({{"tau", grid[static_cast<std::size_t>(k)]},
                          {"coefficient", rep.names[static_cast<std::size_t>(c)]},
                          {"estimator", estimator_name(e)},
                          {"Est", rep.point.get(e)(c, k)},
                          {"Esd", rep.esd[i](c, k)},
                          {"Pvalue", rep.pvalue[i](c, k)},
                          {"AsySE", rep.asy_se[i](c, k)}});
        }
      }
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "tau\tcoefficient\testimator\tEst\tEsd\tPvalue\tAsySE\n";
  for (Index k = 0; k < static_cast<Index>(grid.size()); ++k) {
    for (Index c = 0; c < p; ++c) {
      for (Estimator e : kEstimators) {
        const auto i = static_cast<std::size_t>(e);
        out << format_level(grid[static_cast<std::size_t>(k)]) << '\t' << rep.names[static_cast<std::size_t>(c)]
            << '\t' << estimator_name(e) << '\t' << fixed4(rep.point.get(e)(c, k)) << '\t'
            << fixed4(rep.esd[i](c, k)) << '\t' << fixed4(rep.pvalue[i](c, k)) << '\t'
            << fixed4(rep.asy_se[i](c, k)) << '\n';
      }
    }
  }
  return out.str();
}

void apply_sim_config(std::istream& in, SimRun& run) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Usage, "config", "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto number = [&]() {
      const auto v = parse_number(value);
      if (!v) throw Error(ErrorKind::Usage, "config", "line " + std::to_string(lineno) + ": '" + value + "' is not a number");
      return *v;
    };
    auto count = [&]() {
      const double v = number();
      if (!(v >= 0.0) || v != std::floor(v)) {
        throw Error(ErrorKind::Usage, "config", "line " + std::to_string(lineno) + ": '" + key + "' must be a non-negative integer");
      }
      return static_cast<std::size_t>(v);
    };
    if (key == "model") {
      run.model = value;
    } else if (key == "n") {
      run.n = count();
    } else if (key == "grid") {
      run.grid = parse_grid(value);
    } else if (key == "replications") {
      run.replications = count();
    } else if (key == "seed") {
      run.cfg.seed = static_cast<std::uint64_t>(count());
    } else if (key == "bandwidth") {
      run.cfg.bandwidth = BandwidthRule::fixed(number());
    } else if (key == "bandwidth_constant") {
      run.cfg.bandwidth = BandwidthRule::automatic(number(), run.cfg.bandwidth.exponent);
    } else if (key == "density_floor") {
      run.cfg.density_floor = number();
    } else if (key == "crossing") {
      run.cfg.crossing = parse_crossing(value);
    } else {
      throw Error(ErrorKind::Usage, "config", "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
}

std::string format_simulation(const MonteCarloSummary& s, Format format) {
  const SimModel model(s.model);
  const auto levels = static_cast<Index>(s.grid.size());
  if (format == Format::Json) {
    json j;
    j["model"] = model.name();
    j["n"] = s.n;
    j["grid"] = s.grid.levels();
    j["replications"] = s.replications;
    j["failures"] = s.failures;
    j["seed"] = s.seed;
    j["truth"] = matrix_json(s.truth);
    for (Estimator e : kEstimators) {
      const auto i = static_cast<std::size_t>(e);
      j["estimators"][estimator_name(e)] = {{"mean", matrix_json(s.mean[i])}, {"sd", matrix_json(s.sd[i])}};
    }
    return j.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "model\tn\trow";
  for (Index k = 0; k < levels; ++k) {
    for (Index c = 0; c < s.truth.rows(); ++c) {
      out << "\tbeta" << (c + 1) << "(" << format_level(s.grid[static_cast<std::size_t>(k)]) << ")";
    }
  }
  out << '\n' << model.name() << '\t' << s.n << "\tTrue";
  for (Index k = 0; k < levels; ++k) {
    for (Index c = 0; c < s.truth.rows(); ++c) out << '\t' << fixed4(s.truth(c, k));
  }
  out << '\n';
  for (Estimator e : kEstimators) {
    const auto i = static_cast<std::size_t>(e);
    out << model.name() << '\t' << s.n << '\t' << estimator_name(e);
    for (Index k = 0; k < levels; ++k) {
      for (Index c = 0; c < s.truth.rows(); ++c) {
        out << '\t' << fixed4(s.mean[i](c, k)) << '(' << fixed4(s.sd[i](c, k)) << ')';
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string format_selftest(const std::vector<oracle::OracleReport>& reports, Format format) {
  if (format == Format::Json) {
    json rows = json::array();
    for (const auto& r : reports) {
      rows.push_back({{"check", r.check},
                      {"instance", r.instance},
                      {"discrepancy", r.discrepancy},
                      {"tolerance", r.tolerance},
                      {"pass", r.pass}});
    }
    return rows.dump(2) + "\n";
  }
  std::ostringstream out;
  out << "check\tinstance\tdiscrepancy\ttolerance\tpass\n";
  for (const auto& r : reports) {
    out << r.check << '\t' << r.instance << '\t' << sci4(r.discrepancy) << '\t' << sci4(r.tolerance) << '\t'
        << (r.pass ? "yes" : "no") << '\n';
  }
  return out.str();
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    out.flush();
    return;
  }
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(static_cast<long>(::getpid()));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::Usage, "output", "cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorKind::Usage, "output", "write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Usage, "output", "cannot move output into place at '" + path + "'");
  }
}

int run_fit(const FitRun& run, std::ostream& out, std::ostream& err) {
  try {
    if (!run.asymptotic_se && run.bootstrap < 2) {
      throw Error(ErrorKind::Usage, "config", "--bootstrap needs at least 2 replications (or use --se asymptotic)");
    }
    const Ingested in = ingest_csv(run.input, run.csv);
    if (in.rejected > 0) {
      err << "effqr: ingest: rejected " << in.rejected << " row(s)";
      if (!in.notes.empty()) err << "; first: " << in.notes.front();
      err << "\n";
    }
    const FitReport rep = fit_report(in, run);
    if (!rep.point.diagnostics.bandwidth_warning.empty()) {
      err << "effqr: density: " << rep.point.diagnostics.bandwidth_warning << "\n";
    }
    emit(run.output, format_fit(rep, run.format), out);
    return 0;
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const std::exception& e) {
    err << "effqr: fit: " << e.what() << "\n";
    return 3;
  }
}

int run_simulate(const SimRun& run, std::ostream& out, std::ostream& err) {
  try {
    run.cfg.validate();
    const SimModel model = parse_model(run.model);
    if (run.n < 2) throw Error(ErrorKind::Usage, "config", "sample size must be at least 2");
    const MonteCarloSummary s = run_monte_carlo(model, run.n, make_grid(run.grid), run.replications, run.cfg, run.threads);
    if (s.failures > 0) err << "effqr: sim: " << s.failures << " replicate(s) failed and were skipped\n";
    emit(run.output, format_simulation(s, run.format), out);
    return 0;
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const std::exception& e) {
    err << "effqr: simulate: " << e.what() << "\n";
    return 3;
  }
}

int run_selftest(std::uint64_t seed, const std::string& output, Format format, std::ostream& out,
                 std::ostream& err) {
  try {
    const auto reports = effqr::run_selftest(seed);
    emit(output, format_selftest(reports, format), out);
    const bool ok = std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.pass; });
    if (!ok) err << "effqr: selftest: at least one oracle check failed\n";
    return ok ? 0 : 3;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Efficient multi-level quantile regression", "effqr"};
  app.require_subcommand(1);

  std::string seed_text;
  std::string format = "tsv";
  std::string output;
  std::size_t threads = 0;
  std::string input;
  std::string response;
  std::vector<std::string> covariates;
  std::vector<std::string> log_columns;
  bool no_intercept = false;
  std::string grid_text;
  double bandwidth = 0.0;
  double bandwidth_constant = 1.0;
  double density_floor = 0.01;
  std::string crossing = "anchored";
  std::size_t bootstrap = 1000;
  std::string se = "bootstrap";
  std::string model = "M1";
  std::size_t n = 1000;
  std::size_t replications = 1000;
  bool fast = false;
  std::string config;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed_text, "Master seed (default: $EFFQR_SEED, else 1)");
    sub->add_option("--output,-o", output, "Output file (default: stdout)");
    sub->add_option("--format", format, "tsv or json")->check(CLI::IsMember({"tsv", "json"}));
  };
  auto tuning = [&](CLI::App* sub) {
    sub->add_option("--grid", grid_text, "Comma-separated quantile levels");
    sub->add_option("--bandwidth", bandwidth, "Fixed bandwidth h (overrides the automatic rule)");
    sub->add_option("--bandwidth-constant", bandwidth_constant, "c in h = c n^(-1/5)");
    sub->add_option("--density-floor", density_floor, "Floor on x'dbeta");
    sub->add_option("--crossing", crossing, "Crossed-boundary rule: anchored or sort")
        ->check(CLI::IsMember({"anchored", "sort"}));
    sub->add_option("--threads", threads, "Worker threads (0: all cores)");
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit TQE, SEF and EFF on a CSV file");
  fit->add_option("--input,-i", input, "CSV file with a header row")->required();
  fit->add_option("--response,-y", response, "Response column")->required();
  fit->add_option("--covariates,-x", covariates, "Covariate columns")->delimiter(',');
  fit->add_option("--log", log_columns, "Columns to log-transform")->delimiter(',');
  fit->add_flag("--no-intercept", no_intercept, "Do not prepend a column of ones");
  fit->add_option("--bootstrap,-B", bootstrap, "Bootstrap replications");
  fit->add_option("--se", se, "bootstrap or asymptotic")->check(CLI::IsMember({"bootstrap", "asymptotic"}));
  common(fit);
  tuning(fit);

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study for models M1..M5");
  sim->add_option("--config,-c", config, "key = value config file (flags override it)");
  sim->add_option("--model,-m", model, "M1..M5");
  sim->add_option("--n", n, "Sample size");
  sim->add_option("--replications,-r", replications, "Monte Carlo replications");
  sim->add_flag("--fast", fast, "Use 200 replications");
  common(sim);
  tuning(sim);

  CLI::App* self = app.add_subcommand("selftest", "Run the oracle checks");
  common(self);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    std::uint64_t seed = seed_from_env(1);
    if (!seed_text.empty()) {
      const auto [ptr, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), seed);
      if (ec != std::errc() || ptr != seed_text.data() + seed_text.size()) {
        throw Error(ErrorKind::Usage, "config", "--seed is not an unsigned integer: '" + seed_text + "'");
      }
    }
    auto set = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
    auto apply_tuning = [&](CLI::App* sub, FitConfig& cfg, std::vector<double>& grid) {
      if (set(sub, "--grid")) grid = parse_grid(grid_text);
      if (set(sub, "--bandwidth-constant")) cfg.bandwidth = BandwidthRule::automatic(bandwidth_constant, cfg.bandwidth.exponent);
      if (set(sub, "--bandwidth")) cfg.bandwidth = BandwidthRule::fixed(bandwidth);
      if (set(sub, "--density-floor")) cfg.density_floor = density_floor;
      if (set(sub, "--crossing")) cfg.crossing = parse_crossing(crossing);
    };

    if (*fit) {
      FitRun run;
      run.input = input;
      run.csv = CsvOptions{response, covariates, log_columns, !no_intercept};
      run.cfg.seed = seed;
      apply_tuning(fit, run.cfg, run.grid);
      run.bootstrap = bootstrap;
      run.asymptotic_se = se == "asymptotic";
      run.output = output;
      run.format = parse_format(format);
      run.threads = threads;
      return run_fit(run, out, err);
    }
    if (*sim) {
      SimRun run;
      run.cfg.seed = seed;
      if (!config.empty()) {
        std::ifstream in(config);
        if (!in) throw Error(ErrorKind::Usage, "config", "cannot open '" + config + "'");
        apply_sim_config(in, run);
        if (!seed_text.empty()) run.cfg.seed = seed;
      }
      if (set(sim, "--model")) run.model = model;
      if (set(sim, "--n")) run.n = n;
      if (fast) run.replications = kFastReplications;
      if (set(sim, "--replications")) run.replications = replications;
      apply_tuning(sim, run.cfg, run.grid);
      run.output = output;
      run.format = parse_format(format);
      run.threads = threads;
      return run_simulate(run, out, err);
    }
    return run_selftest(seed, output, parse_format(format), out, err);
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

}  // namespace effqr::cli
