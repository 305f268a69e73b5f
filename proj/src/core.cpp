#include "effqr/core.hpp"

#include <cmath>
#include <sstream>

namespace effqr {

Error::Error(ErrorKind kind, std::string stage, const std::string& message,
             std::optional<std::size_t> row)
    : std::runtime_error(stage + ": " + message), kind_(kind), stage_(std::move(stage)), message_(message), row_(row) {}

Dataset make_dataset(Vector y, Matrix x) {
  if (y.size() == 0 || x.cols() == 0) {
    throw Error(ErrorKind::Data, "core", "dataset needs n >= 1 and p >= 1");
  }
  if (x.rows() != y.size()) {
    std::ostringstream msg;
    msg << "dimension mismatch: y has " << y.size() << " entries but x has " << x.rows() << " rows";
    throw Error(ErrorKind::Data, "core", msg.str());
  }
  double bound = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    bool finite = std::isfinite(y(i));
    for (Eigen::Index j = 0; j < x.cols() && finite; ++j) finite = std::isfinite(x(i, j));
    if (!finite) {
      const auto row = static_cast<std::size_t>(i) + 1;
      throw Error(ErrorKind::Data, "core", "non-finite entry at row " + std::to_string(row), row);
    }
    bound = std::max(bound, x.row(i).cwiseAbs().maxCoeff());
  }
  return Dataset(std::move(y), std::move(x), bound);
}

double QuantileGrid::level_ext(std::size_t l) const {
  if (l == 0) return 0.0;
  if (l == levels_.size() + 1) return 1.0;
  return levels_.at(l - 1);
}

std::vector<double> QuantileGrid::spacings() const {
  std::vector<double> out(levels_.size() + 1);
  for (std::size_t l = 1; l <= levels_.size() + 1; ++l) out[l - 1] = spacing(l);
  return out;
}

QuantileGrid make_grid(std::vector<double> levels) {
  if (levels.empty()) throw Error(ErrorKind::Usage, "core", "quantile grid is empty");
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const double t = levels[l];
    if (!(t > 0.0 && t < 1.0)) {
      std::ostringstream msg;
      msg << "quantile level " << t << " outside (0,1)";
      throw Error(ErrorKind::Usage, "core", msg.str());
    }
    if (l > 0 && !(t > levels[l - 1])) {
      std::ostringstream msg;
      msg << "quantile levels not strictly increasing at position " << l + 1;
      throw Error(ErrorKind::Usage, "core", msg.str());
    }
  }
  return QuantileGrid(std::move(levels));
}

void FitConfig::validate() const {
  if (!(density_floor > 0.0)) throw Error(ErrorKind::Usage, "core", "density floor must be > 0");
  if (!(solver_tolerance > 0.0)) throw Error(ErrorKind::Usage, "core", "solver tolerance must be > 0");
  if (max_iterations < 1) throw Error(ErrorKind::Usage, "core", "max_iterations must be >= 1");
  if (bandwidth.kind == BandwidthRule::Kind::Explicit) {
    if (!(bandwidth.h > 0.0 && bandwidth.h < 0.5)) {
      throw Error(ErrorKind::Usage, "core", "explicit bandwidth must lie in (0, 0.5)");
    }
  } else {
    if (!(bandwidth.constant > 0.0)) {
      throw Error(ErrorKind::Usage, "core", "bandwidth constant must be > 0");
    }
    // h -> 0 and n h^2 -> infinity require an exponent in (-1/2, 0).
    if (!(bandwidth.exponent < 0.0 && bandwidth.exponent > -0.5)) {
      throw Error(ErrorKind::Usage, "core", "bandwidth exponent must lie in (-1/2, 0)");
    }
  }
}

}  // namespace effqr
