#pragma once

#include "effqr/core.hpp"
#include "effqr/density.hpp"
#include "effqr/score.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace effqr {

enum class Estimator { TQE = 0, SEF = 1, EFF = 2 };
inline constexpr std::array<Estimator, 3> kEstimators{Estimator::TQE, Estimator::SEF, Estimator::EFF};
const char* estimator_name(Estimator e);

struct EstimateDiagnostics {
  std::size_t clamped_cells = 0;
  std::size_t crossed_rows = 0;
  int solver_iterations = 0;
  bool solver_converged = true;
  double bandwidth = 0.0;
  std::string bandwidth_warning;
};

/// All matrices are p x L: entry (j, k) belongs to coefficient j at level tau_k.
struct EstimateReport {
  QuantileGrid grid;
  std::size_t n = 0;
  std::size_t p = 0;
  Matrix tqe;
  Matrix sef;
  Matrix eff;
  Matrix sigma2_eff;      // estimated multi-level bound
  Matrix sigma2_sef;      // estimated single-level bound
  Matrix sigma2_tqe;      // plug-in sandwich tau(1-tau) D1^-1 D0 D1^-1
  Matrix mean_score_eff;  // (1/n) sum_i S_kj(y_i, x_i)
  Matrix mean_score_sef;
  EstimateDiagnostics diagnostics;

  const Matrix& get(Estimator e) const;
};

/// TQE fit at every level, plug-in densities, efficient and single-level scores, and
/// one Newton-type step from the TQE fit:
///   eff_kj = tqe_kj + sigma2_kj * mean_i S_kj(y_i, x_i).
/// Errors are rethrown with their pipeline stage in Error::stage().
EstimateReport estimate(const Dataset& data, const QuantileGrid& grid, const FitConfig& cfg);
EstimateReport estimate(const Matrix& x, const Vector& y, const QuantileGrid& grid,
                        const FitConfig& cfg);

struct BootstrapResult {
  QuantileGrid grid;
  std::size_t replications = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;
  EstimateReport point;           // estimate on the full sample
  std::array<Matrix, 3> esd;      // bootstrap SD per estimator
  std::array<Matrix, 3> pvalue;   // 1 - Phi(|Est / Esd|)
};

// 1 - Phi(|est / esd|); 0.5 when both are zero, 0 when only esd is.
double bootstrap_pvalue(double est, double esd);

/// Pairs bootstrap: resample rows with replacement, re-estimate, take the sample
/// SD of each estimate. Replicate failures are skipped; more than 10% failing is an
/// error. Deterministic for a given seed regardless of thread count.
BootstrapResult bootstrap_se(const Dataset& data, const QuantileGrid& grid, const FitConfig& cfg,
                             std::size_t replications, std::uint64_t seed, std::size_t threads = 0);

}  // namespace effqr
