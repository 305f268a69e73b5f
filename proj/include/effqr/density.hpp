#pragma once

#include "effqr/core.hpp"

#include <cstddef>
#include <string>

namespace effqr {

/// Plug-in conditional densities f(x_i' beta(tau_l)) = 1 / (x_i' dbeta(tau_l)).
struct DensityEstimates {
  Matrix f_hat;      // n x L
  Matrix dbeta_hat;  // p x L
  double h = 0.0;
  double floor = 0.01;
  std::size_t clamped_count = 0;
};

struct BandwidthChoice {
  double h = 0.0;
  bool capped = false;
  std::string warning;  // non-empty when the feasibility cap was applied
};

// c * n^exponent; defaults to n^(-1/5).
double default_bandwidth(std::size_t n, double constant = 1.0, double exponent = -0.2);

/// Resolves the configured rule for sample size n. Automatic bandwidths are capped at
/// min(tau_1, 1 - tau_L) / 2 so every off-grid fit stays inside (0,1).
BandwidthChoice select_bandwidth(std::size_t n, const QuantileGrid& grid, const BandwidthRule& rule);

// (beta(tau + h) - beta(tau - h)) / (2h)
Vector estimate_derivative(const Vector& fits_plus, const Vector& fits_minus, double h);

DensityEstimates estimate_density(const Dataset& data, const CoefficientSet& coeffs,
                                  const FitConfig& cfg);
DensityEstimates estimate_density(const Matrix& x, const CoefficientSet& coeffs,
                                  const FitConfig& cfg);

}  // namespace effqr
