#pragma once

#include "effqr/core.hpp"
#include "effqr/estimator.hpp"
#include "effqr/oracle.hpp"
#include "effqr/sim.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace effqr::cli {

enum class Format { Tsv, Json };

struct CsvOptions {
  std::string response;
  std::vector<std::string> covariates;
  std::vector<std::string> log_columns;  // natural log applied before fitting
  bool intercept = true;
};

struct Ingested {
  Dataset data;
  std::vector<std::string> names;  // one per design column
  std::size_t rejected = 0;
  std::vector<std::string> notes;  // first few rejected rows
};

/// Header row first, comma-delimited, '.' decimal point. Rows with a non-finite
/// value, or a non-positive value in a log column, are dropped and counted.
Ingested ingest_csv(std::istream& in, const CsvOptions& opts);
Ingested ingest_csv(const std::string& path, const CsvOptions& opts);

struct FitRun {
  std::string input;
  CsvOptions csv;
  std::vector<double> grid{0.3, 0.5, 0.7};
  FitConfig cfg;
  std::size_t bootstrap = 1000;
  bool asymptotic_se = false;  // Esd from the plug-in variance instead of the bootstrap
  std::string output;          // empty: stdout
  Format format = Format::Tsv;
  std::size_t threads = 0;
};

struct FitReport {
  std::vector<std::string> names;
  std::size_t rejected = 0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  bool asymptotic_se = false;
  EstimateReport point;
  std::array<Matrix, 3> esd;
  std::array<Matrix, 3> pvalue;
  std::array<Matrix, 3> asy_se;
};

FitReport fit_report(const Ingested& in, const FitRun& run);
std::string format_fit(const FitReport& rep, Format format);

struct SimRun {
  std::string model = "M1";
  std::size_t n = 1000;
  std::vector<double> grid{0.5, 0.7};
  std::size_t replications = 1000;
  FitConfig cfg;
  std::string output;
  Format format = Format::Tsv;
  std::size_t threads = 0;
};

inline constexpr std::size_t kFastReplications = 200;

/// key = value lines; '#' starts a comment. Keys: model, n, grid, replications,
/// seed, bandwidth, bandwidth_constant, density_floor, crossing.
void apply_sim_config(std::istream& in, SimRun& run);

std::string format_simulation(const MonteCarloSummary& s, Format format);
std::string format_selftest(const std::vector<oracle::OracleReport>& reports, Format format);

// Exit code for an error kind: usage 1, data 2, numerical 3.
int exit_code(ErrorKind kind);

/// Writes `content` to `path` through a temporary file and a rename, so a failed
/// run never leaves a partial file. Empty path writes to `out`.
void emit(const std::string& path, const std::string& content, std::ostream& out);

int run_fit(const FitRun& run, std::ostream& out, std::ostream& err);
int run_simulate(const SimRun& run, std::ostream& out, std::ostream& err);
int run_selftest(std::uint64_t seed, const std::string& output, Format format, std::ostream& out,
                 std::ostream& err);

/// Full command line (argv[0] excluded): fit | simulate | selftest.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace effqr::cli
