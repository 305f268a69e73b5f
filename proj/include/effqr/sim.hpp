#pragma once

#include "effqr/core.hpp"
#include "effqr/estimator.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

namespace effqr {

enum class ModelId { M1, M2, M3, M4, M5 };

/// Two-covariate design Q(tau | X) = X1 beta1(tau) + X2 beta2(tau).
/// X2 is standard log-normal; X1 is 1 or standard log-normal depending on the model.
class SimModel {
 public:
  explicit SimModel(ModelId id) : id_(id) {}

  ModelId id() const noexcept { return id_; }
  std::string name() const;
  bool x1_lognormal() const noexcept;

  double beta1(double tau) const;
  double beta2(double tau) const;
  double dbeta1(double tau) const;
  double dbeta2(double tau) const;

  Vector beta(double tau) const;   // (beta1, beta2)
  Vector dbeta(double tau) const;
  Matrix beta(const QuantileGrid& grid) const;  // 2 x L
  Matrix dbeta(const QuantileGrid& grid) const;

 private:
  ModelId id_;
};

// Accepts "M1".."M5" (case-insensitive); throws Error(Usage) otherwise.
SimModel parse_model(const std::string& name);

struct GenerateOptions {
  std::optional<double> fixed_u;  // evaluate every response at this level
};

/// y_i = x1_i beta1(u_i) + x2_i beta2(u_i) with u_i ~ U(0,1), so x' beta(tau) is the
/// conditional tau-quantile. Draws within 1e-12 of 0 or 1 are redrawn.
Dataset generate(const SimModel& model, std::size_t n, std::uint64_t seed,
                 const GenerateOptions& opts = {});

struct MonteCarloSummary {
  ModelId model = ModelId::M1;
  std::size_t n = 0;
  QuantileGrid grid;
  std::size_t replications = 0;
  std::size_t failures = 0;
  std::uint64_t seed = 0;
  Matrix truth;                  // 2 x L
  std::array<Matrix, 3> mean{};  // per estimator, 2 x L
  std::array<Matrix, 3> sd{};

  // Monte Carlo standard error of the mean.
  double mc_se(Estimator e, Eigen::Index coef, Eigen::Index level) const;
};

/// Generate / estimate / record `replications` times from the master seed
/// cfg.seed. Replicate failures are counted; more than 2% failing is an error.
MonteCarloSummary run_monte_carlo(const SimModel& model, std::size_t n, const QuantileGrid& grid,
                                  std::size_t replications, const FitConfig& cfg,
                                  std::size_t threads = 0);

}  // namespace effqr
