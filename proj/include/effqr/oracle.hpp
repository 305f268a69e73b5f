#pragma once

// Brute-force and closed-form verifiers. Nothing here calls the solver, density,
// or score code it is meant to certify.

#include "effqr/core.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace effqr::oracle {

struct OracleReport {
  std::string check;
  std::string instance;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Best basic solution of the pinball problem over all p-subsets of observations,
/// ties resolved to the lexicographically smallest coefficient vector.
/// Requires n <= 50 and p <= 3.
Vector pinball_vertex_oracle(const Dataset& data, double tau);

struct QuadraticMin {
  Vector d;
  double value = 0.0;
};

/// min d'Ud subject to d_m = 1, by eliminating d_m and solving the reduced normal
/// equations. U must be SPD with dimension <= 12.
QuadraticMin quadratic_min_oracle(const Matrix& U, std::size_t m);

struct ScalarCurve {
  std::function<double(double)> beta;
  std::function<double(double)> dbeta;
};

/// p = 1 check: the full interval score with the optimal direction collapses to a
/// single bracket at the target level, and the stationarity equations hold.
/// `perturbation` is added to the non-target direction entries (0 for the real check).
OracleReport p1_reduction_check(const QuantileGrid& grid, const ScalarCurve& curve,
                                const std::vector<double>& xs, double perturbation = 0.0);

struct GainInstance {
  double tau1 = 0.3;
  double tau2 = 0.7;
  double f1 = 1.0;
  double f2 = 1.0;
  Vector d1;
  Vector d2;
  Vector x;
};

struct GainValues {
  double q1 = 0.0;
  double q2 = 0.0;
  double direct = 0.0;     // q2 - q1
  double completed = 0.0;  // completed-square form
};

GainValues efficiency_gain_values(const GainInstance& inst);

// Both forms agree (relative 1e-12) and are >= -1e-12.
OracleReport efficiency_gain_check(const GainInstance& inst);

}  // namespace effqr::oracle
