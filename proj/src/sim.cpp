#include "effqr/sim.hpp"

#include "effqr/normal.hpp"
#include "effqr/parallel.hpp"
#include "effqr/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace effqr {

namespace {

double probit(double tau) { return normal_quantile(tau); }
double dprobit(double tau) { return 1.0 / normal_pdf(normal_quantile(tau)); }
double logit(double tau) { return std::log(tau / (1.0 - tau)); }
double dlogit(double tau) { return 1.0 / (tau * (1.0 - tau)); }
double tangent(double tau) { return std::tan(std::numbers::pi * (tau - 0.5)); }
double dtangent(double tau) {
  const double c = std::cos(std::numbers::pi * (tau - 0.5));
  return std::numbers::pi / (c * c);
}

}  // namespace

std::string SimModel::name() const { return "M" + std::to_string(static_cast<int>(id_) + 1); }

bool SimModel::x1_lognormal() const noexcept { return id_ == ModelId::M2 || id_ == ModelId::M5; }

double SimModel::beta1(double tau) const {
  switch (id_) {
    case ModelId::M2: return 2.0 + probit(tau);
    case ModelId::M5: return 1.0 + logit(tau);
    default: return 2.0;
  }
}

double SimModel::beta2(double tau) const {
  switch (id_) {
    case ModelId::M1: return 1.0 + probit(tau);
    case ModelId::M2: return 2.0 + probit(tau);
    case ModelId::M3: return 1.0 + logit(tau);
    case ModelId::M4: return 1.0 + tangent(tau);
    case ModelId::M5: return 2.0 + tangent(tau);
  }
  return 0.0;
}

double SimModel::dbeta1(double tau) const {
  switch (id_) {
    case ModelId::M2: return dprobit(tau);
    case ModelId::M5: return dlogit(tau);
    default: return 0.0;
  }
}

double SimModel::dbeta2(double tau) const {
  switch (id_) {
    case ModelId::M1:
    case ModelId::M2: return dprobit(tau);
    case ModelId::M3: return dlogit(tau);
    case ModelId::M4:
    case ModelId::M5: return dtangent(tau);
  }
  return 0.0;
}

Vector SimModel::beta(double tau) const { return Vector{{beta1(tau), beta2(tau)}}; }
Vector SimModel::dbeta(double tau) const { return Vector{{dbeta1(tau), dbeta2(tau)}}; }

Matrix SimModel::beta(const QuantileGrid& grid) const {
  Matrix out(2, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t l = 0; l < grid.size(); ++l) out.col(static_cast<Eigen::Index>(l)) = beta(grid[l]);
  return out;
}

Matrix SimModel::dbeta(const QuantileGrid& grid) const {
  Matrix out(2, static_cast<Eigen::Index>(grid.size()));
  for (std::size_t l = 0; l < grid.size(); ++l) out.col(static_cast<Eigen::Index>(l)) = dbeta(grid[l]);
  return out;
}

SimModel parse_model(const std::string& name) {
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::toupper(c); });
  static const std::pair<const char*, ModelId> table[] = {
      {"M1", ModelId::M1}, {"M2", ModelId::M2}, {"M3", ModelId::M3}, {"M4", ModelId::M4}, {"M5", ModelId::M5}};
  for (const auto& [label, id] : table) {
    if (key == label) return SimModel(id);
  }
  throw Error(ErrorKind::Usage, "sim", "unknown model '" + name + "' (expected M1..M5)");
}

Dataset generate(const SimModel& model, std::size_t n, std::uint64_t seed, const GenerateOptions& opts) {
  if (n < 1) throw Error(ErrorKind::Usage, "sim", "sample size must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(n);
  Matrix x(rows, 2);
  Vector y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double x1 = model.x1_lognormal() ? std::exp(normal(rng)) : 1.0;
    const double x2 = std::exp(normal(rng));
    double u = 0.5;
    do {
      u = uniform(rng);
    } while (u < 1e-12 || u > 1.0 - 1e-12);
    if (opts.fixed_u) u = *opts.fixed_u;
    x(i, 0) = x1;
    x(i, 1) = x2;
    y(i) = x1 * model.beta1(u) + x2 * model.beta2(u);
  }
  return make_dataset(std::move(y), std::move(x));
}

double MonteCarloSummary::mc_se(Estimator e, Eigen::Index coef, Eigen::Index level) const {
  return sd[static_cast<std::size_t>(e)](coef, level) /
         std::sqrt(static_cast<double>(replications - failures));
}

MonteCarloSummary run_monte_carlo(const SimModel& model, std::size_t n, const QuantileGrid& grid,
                                  std::size_t replications, const FitConfig& cfg, std::size_t threads) {
  if (replications < 2) throw Error(ErrorKind::Usage, "sim", "need at least 2 replications");
  const auto levels = static_cast<Eigen::Index>(grid.size());

  std::vector<std::optional<EstimateReport>> reps(replications);
  parallel_for(replications, threads, [&](std::size_t r) {
    try {
      const Dataset data = generate(model, n, stream_seed(cfg.seed, r));
      reps[r] = estimate(data, grid, cfg);
    } catch (const std::exception&) {
      reps[r].reset();
    }
  });

  MonteCarloSummary out{model.id(), n, grid, replications, 0, cfg.seed, model.beta(grid), {}, {}};
  for (const auto& rep : reps) {
    if (!rep) ++out.failures;
  }
  const std::size_t ok = replications - out.failures;
  if (out.failures * 50 > replications || ok < 2) {
    std::ostringstream msg;
    msg << out.failures << " of " << replications << " Monte Carlo replicates failed";
    throw Error(ErrorKind::Numerical, "sim", msg.str());
  }
  for (Estimator e : kEstimators) {
    const auto idx = static_cast<std::size_t>(e);
    Matrix sum = Matrix::Zero(2, levels);
    for (const auto& rep : reps) {
      if (rep) sum += rep->get(e);
    }
    out.mean[idx] = sum / static_cast<double>(ok);
    Matrix ss = Matrix::Zero(2, levels);
    for (const auto& rep : reps) {
      if (rep) ss += (rep->get(e) - out.mean[idx]).cwiseAbs2();
    }
    out.sd[idx] = (ss / static_cast<double>(ok - 1)).cwiseSqrt();
  }
  return out;
}

}  // namespace effqr
