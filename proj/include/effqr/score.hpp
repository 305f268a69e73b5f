#pragma once

#include "effqr/core.hpp"
#include "effqr/density.hpp"

#include <cstddef>

namespace effqr {

/// Information system for the pL stacked coefficients (level-major: index
/// m = l * p + j for level l, coefficient j, both 0-based).
struct ScoreSystem {
  std::size_t p = 0;
  std::size_t levels = 0;
  Matrix U;           // pL x pL, block tridiagonal
  Matrix U_inv;
  Vector W;           // diagonal of W: 1 / diag(U_inv)
  Matrix directions;  // column m is u_m = (U_inv W) e_m
  Vector sigma2;      // variance bounds, sigma2(m) = 1 / (u_m' U u_m)

  Eigen::Index index(std::size_t level, std::size_t coef) const {
    return static_cast<Eigen::Index>(level * p + coef);
  }
};

// Block-diagonal 2pL x 2pL matrix of interval blocks with sample averages for the
// expectations. Reference path only; production assembles U directly.
Matrix assemble_A(const Matrix& x, const DensityEstimates& dens, const QuantileGrid& grid);
Matrix assemble_B(std::size_t p, std::size_t levels);

// U = B A B' assembled block by block:
//   U_ll     = E(f_l^2 xx') (1/(tau_l - tau_{l-1}) + 1/(tau_{l+1} - tau_l))
//   U_l,l+1  = -E(f_l f_{l+1} xx') / (tau_{l+1} - tau_l)
Matrix assemble_U(const Matrix& x, const Matrix& f_hat, const QuantileGrid& grid);

/// Minimises d'Ud subject to d_m = 1 for every m via the closed form
/// d = U^{-1} W e_m. Throws Error(Numerical) naming the smallest eigenvalue when
/// U is not positive definite.
ScoreSystem solve_directions(const Matrix& U, std::size_t p);

ScoreSystem build_score_system(const Matrix& x, const Matrix& f_hat, const QuantileGrid& grid);

/// Efficient score of one observation along direction d (length pL, level-major).
/// `crossed` reports whether the boundaries x'beta(tau_l) were out of order; `rule`
/// says how such rows are scored. A response exactly on a boundary belongs to the
/// upper interval.
double efficient_score(double y, const Vector& x, const Matrix& beta, const Vector& dens_row,
                       const Vector& direction, const QuantileGrid& grid, bool* crossed = nullptr,
                       CrossingRule rule = CrossingRule::Anchored);
double efficient_score(double y, const Vector& x, const CoefficientSet& coeffs,
                       const Vector& dens_row, const Vector& direction, bool* crossed = nullptr,
                       CrossingRule rule = CrossingRule::Anchored);

// f (tau - 1{y < x'beta}) d'x / (tau (1 - tau))
double single_quantile_score(double y, const Vector& x, const Vector& beta_tau, double f_hat,
                             double tau, const Vector& direction);

/// Scores of every observation along every direction: n x pL. `crossings`
/// receives the number of observations with out-of-order boundaries.
Matrix efficient_score_matrix(const Matrix& x, const Vector& y, const Matrix& beta,
                              const Matrix& f_hat, const ScoreSystem& system,
                              const QuantileGrid& grid, std::size_t* crossings = nullptr,
                              CrossingRule rule = CrossingRule::Anchored);

}  // namespace effqr
