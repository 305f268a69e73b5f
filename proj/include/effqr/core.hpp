#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace effqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error categories map one-to-one onto CLI exit codes (usage=1, data=2, numerical=3).
enum class ErrorKind { Usage, Data, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& message,
        std::optional<std::size_t> row = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  // Message without the stage prefix.
  const std::string& message() const noexcept { return message_; }
  // 1-based row of the offending observation, when the error concerns one.
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string message_;
  std::optional<std::size_t> row_;
};

/// Regression sample: n responses and an n x p design. An intercept, if wanted,
/// is an ordinary column of ones supplied by the caller.
class Dataset {
 public:
  const Vector& y() const noexcept { return y_; }
  const Matrix& x() const noexcept { return x_; }
  std::size_t n() const noexcept { return static_cast<std::size_t>(y_.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  // max_i ||x_i||_inf, kept for diagnostics only.
  double max_row_norm() const noexcept { return max_row_norm_; }

  friend Dataset make_dataset(Vector y, Matrix x);

 private:
  Dataset(Vector y, Matrix x, double bound)
      : y_(std::move(y)), x_(std::move(x)), max_row_norm_(bound) {}

  Vector y_;
  Matrix x_;
  double max_row_norm_;
};

Dataset make_dataset(Vector y, Matrix x);

/// Strictly increasing quantile levels inside (0,1). The virtual endpoints
/// tau_0 = 0 and tau_{L+1} = 1 are implied.
class QuantileGrid {
 public:
  std::size_t size() const noexcept { return levels_.size(); }
  const std::vector<double>& levels() const noexcept { return levels_; }
  double operator[](std::size_t l) const { return levels_[l]; }

  // Level with the virtual endpoints: level_ext(0) = 0, level_ext(L+1) = 1.
  double level_ext(std::size_t l) const;
  // tau_l - tau_{l-1} for l = 1..L+1 (1-based interval index).
  double spacing(std::size_t l) const { return level_ext(l) - level_ext(l - 1); }
  std::vector<double> spacings() const;

  friend QuantileGrid make_grid(std::vector<double> levels);

 private:
  explicit QuantileGrid(std::vector<double> levels) : levels_(std::move(levels)) {}
  std::vector<double> levels_;
};

QuantileGrid make_grid(std::vector<double> levels);

struct BandwidthRule {
  enum class Kind { Explicit, Automatic };
  Kind kind = Kind::Automatic;
  double h = 0.0;           // used when kind == Explicit
  double constant = 1.0;    // automatic: constant * n^exponent
  double exponent = -0.2;

  static BandwidthRule fixed(double h) { return {Kind::Explicit, h, 1.0, -0.2}; }
  static BandwidthRule automatic(double c = 1.0, double exponent = -0.2) {
    return {Kind::Automatic, 0.0, c, exponent};
  }
};

// How the score treats an observation whose fitted boundaries x'beta(tau_l) are
// out of order. Sort relabels intervals by sorted boundary; Anchored keeps every
// level's indicator 1{y < x'beta(tau_l)} on its own boundary. Both agree whenever
// the boundaries are ordered.
enum class CrossingRule { Sort, Anchored };

struct FitConfig {
  BandwidthRule bandwidth{};
  CrossingRule crossing = CrossingRule::Anchored;
  double density_floor = 0.01;
  double solver_tolerance = 1e-9;
  int max_iterations = 200;
  std::uint64_t seed = 1;

  // Throws Error(Usage) on an invalid combination.
  void validate() const;
};

/// Pinball fits on a grid. Column l of beta is beta(tau_l); beta_minus/beta_plus hold
/// the fits at tau_l -/+ h used for derivative estimation.
struct CoefficientSet {
  QuantileGrid grid;
  Matrix beta;
  std::optional<Matrix> dbeta;
  double h = 0.0;
  Matrix beta_minus;
  Matrix beta_plus;
  int iterations = 0;
  bool converged = true;

  bool has_offgrid_fits() const noexcept {
    return h > 0.0 && beta_minus.cols() == beta.cols() && beta_plus.cols() == beta.cols();
  }
};

}  // namespace effqr
