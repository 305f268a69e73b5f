#include "effqr/density.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace effqr {

double default_bandwidth(std::size_t n, double constant, double exponent) {
  return constant * std::pow(static_cast<double>(n), exponent);
}

BandwidthChoice select_bandwidth(std::size_t n, const QuantileGrid& grid, const BandwidthRule& rule) {
  BandwidthChoice out;
  if (rule.kind == BandwidthRule::Kind::Explicit) {
    out.h = rule.h;
    return out;
  }
  const double raw = default_bandwidth(std::max<std::size_t>(n, 1), rule.constant, rule.exponent);
  const double cap = std::min(grid[0], 1.0 - grid[grid.size() - 1]) / 2.0;
  out.h = std::min(raw, cap);
  if (raw > cap) {
    out.capped = true;
    std::ostringstream msg;
    msg << "bandwidth " << raw << " capped to " << cap << " to keep off-grid levels in (0,1)";
    out.warning = msg.str();
  }
  if (n < 2) {
    out.warning += out.warning.empty() ? "" : "; ";
    out.warning += "sample size below 2";
  }
  return out;
}

Vector estimate_derivative(const Vector& fits_plus, const Vector& fits_minus, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::Usage, "density", "bandwidth must be > 0");
  if (fits_plus.size() != fits_minus.size()) {
    throw Error(ErrorKind::Data, "density", "off-grid fits differ in length");
  }
  return (fits_plus - fits_minus) / (2.0 * h);
}

DensityEstimates estimate_density(const Matrix& x, const CoefficientSet& coeffs,
                                  const FitConfig& cfg) {
  if (!coeffs.has_offgrid_fits()) {
    throw Error(ErrorKind::Usage, "density", "coefficient set lacks the tau +/- h fits");
  }
  if (x.cols() != coeffs.beta.rows()) {
    throw Error(ErrorKind::Data, "density", "design width does not match coefficients");
  }
  const Eigen::Index levels = coeffs.beta.cols();
  DensityEstimates out;
  out.h = coeffs.h;
  out.floor = cfg.density_floor;
  out.dbeta_hat.resize(x.cols(), levels);
  for (Eigen::Index l = 0; l < levels; ++l) {
    out.dbeta_hat.col(l) = estimate_derivative(coeffs.beta_plus.col(l), coeffs.beta_minus.col(l), coeffs.h);
  }
  const Matrix slope = x * out.dbeta_hat;  // n x L values of x_i' dbeta(tau_l)
  out.f_hat.resize(x.rows(), levels);
  for (Eigen::Index l = 0; l < levels; ++l) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double s = slope(i, l);
      if (s < cfg.density_floor) {
        out.f_hat(i, l) = 1.0 / cfg.density_floor;
        ++out.clamped_count;
      } else {
        out.f_hat(i, l) = 1.0 / s;
      }
    }
  }
  return out;
}

DensityEstimates estimate_density(const Dataset& data, const CoefficientSet& coeffs,
                                  const FitConfig& cfg) {
  return estimate_density(data.x(), coeffs, cfg);
}

}  // namespace effqr
