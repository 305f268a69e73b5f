#pragma once

#include "effqr/core.hpp"

#include <vector>

namespace effqr {

struct PinballFit {
  Vector beta_hat;
  double level = 0.5;
  double objective_value = 0.0;
  int iterations = 0;      // interior-point iterations plus vertex pivots
  int ip_iterations = 0;
  int pivots = 0;
  bool converged = false;  // true when the returned vertex is certified optimal
  // Objective at each vertex visited by the polish phase; non-increasing.
  std::vector<double> objective_trace;
};

// rho_tau(u) = u (tau - 1{u < 0}).
double pinball_loss(double u, double tau);

double pinball_objective(const Matrix& x, const Vector& y, const Vector& beta, double tau);

/// Koenker-Bassett regression quantile. Runs a primal-dual interior point method on
/// the dual LP, then walks to an exact optimal vertex. On a flat optimum the
/// lexicographically smallest optimal vertex is reported.
PinballFit fit_quantile(const Dataset& data, double tau, const FitConfig& cfg);
PinballFit fit_quantile(const Matrix& x, const Vector& y, double tau, const FitConfig& cfg);

/// Fits every grid level plus the off-grid levels tau_l +/- h needed for
/// derivative estimation. h comes from cfg.bandwidth (see select_bandwidth).
CoefficientSet fit_grid(const Dataset& data, const QuantileGrid& grid, const FitConfig& cfg);
CoefficientSet fit_grid(const Matrix& x, const Vector& y, const QuantileGrid& grid,
                        const FitConfig& cfg);

}  // namespace effqr
