#include "effqr/estimator.hpp"

#include "effqr/normal.hpp"
#include "effqr/parallel.hpp"
#include "effqr/pinball.hpp"
#include "effqr/rng.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace effqr {

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::TQE: return "TQE";
    case Estimator::SEF: return "SEF";
    case Estimator::EFF: return "EFF";
  }
  return "?";
}

const Matrix& EstimateReport::get(Estimator e) const {
  switch (e) {
    case Estimator::TQE: return tqe;
    case Estimator::SEF: return sef;
    case Estimator::EFF: return eff;
  }
  return tqe;
}

namespace {

using Index = Eigen::Index;

template <class Fn>
auto in_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + "/" + e.stage(), e.message(), e.row());
  }
}

}  // namespace

EstimateReport estimate(const Matrix& x, const Vector& y, const QuantileGrid& grid,
                        const FitConfig& cfg) {
  const Index n = x.rows();
  const Index p = x.cols();
  const auto levels = static_cast<Index>(grid.size());

  // Step 1: pinball fits on and around the grid.
  const CoefficientSet coeffs = in_stage("fit", [&] { return fit_grid(x, y, grid, cfg); });
  // Step 2: plug-in densities.
  const DensityEstimates dens = in_stage("density", [&] {
    DensityEstimates d = estimate_density(x, coeffs, cfg);
    if (d.clamped_count == static_cast<std::size_t>(d.f_hat.size())) {
      throw Error(ErrorKind::Numerical, "density",
                  "every derivative estimate hit the density floor (no quantile variation)");
    }
    return d;
  });

  EstimateReport rep{grid,
                     static_cast<std::size_t>(n),
                     static_cast<std::size_t>(p),
                     coeffs.beta,
                     Matrix(p, levels),
                     Matrix(p, levels),
                     Matrix(p, levels),
                     Matrix(p, levels),
                     Matrix(p, levels),
                     Matrix(p, levels),
                     Matrix(p, levels),
                     {}};
  rep.diagnostics.clamped_cells = dens.clamped_count;
  rep.diagnostics.solver_iterations = coeffs.iterations;
  rep.diagnostics.solver_converged = coeffs.converged;
  rep.diagnostics.bandwidth = coeffs.h;
  rep.diagnostics.bandwidth_warning =
      select_bandwidth(static_cast<std::size_t>(n), grid, cfg.bandwidth).warning;

  // Step 3: multi-level efficient scores and bounds.
  in_stage("score", [&] {
    const ScoreSystem sys = build_score_system(x, dens.f_hat, grid);
    std::size_t crossed = 0;
    const Matrix scores = efficient_score_matrix(x, y, coeffs.beta, dens.f_hat, sys, grid, &crossed, cfg.crossing);
    rep.diagnostics.crossed_rows = crossed;
    const Vector mean = scores.colwise().mean().transpose();
    for (Index k = 0; k < levels; ++k) {
      for (Index j = 0; j < p; ++j) {
        const Index m = k * p + j;
        rep.mean_score_eff(j, k) = mean(m);
        rep.sigma2_eff(j, k) = sys.sigma2(m);
      }
    }

    // Single-level variant: an L = 1 system per level.
    for (Index k = 0; k < levels; ++k) {
      const double tau = grid[static_cast<std::size_t>(k)];
      const Vector f = dens.f_hat.col(k);
      const Matrix scaled = x.array().colwise() * f.array();
      const Matrix u = (scaled.transpose() * scaled) / (static_cast<double>(n) * tau * (1.0 - tau));
      const ScoreSystem single = solve_directions(u, static_cast<std::size_t>(p));
      {
        // Sandwich for the pinball fit at this level.
        const Matrix d1 = (x.transpose() * scaled) / static_cast<double>(n);
        const Matrix d0 = (x.transpose() * x) / static_cast<double>(n);
        const Eigen::PartialPivLU<Matrix> lu(d1);
        const Matrix sandwich = tau * (1.0 - tau) * lu.solve(lu.solve(d0).transpose());
        rep.sigma2_tqe.col(k) = sandwich.diagonal();
      }

      const Vector beta_k = coeffs.beta.col(k);
      for (Index j = 0; j < p; ++j) {
        const Vector d = single.directions.col(j);
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
          total += single_quantile_score(y(i), x.row(i).transpose(), beta_k, f(i), tau, d);
        }
        rep.mean_score_sef(j, k) = total / static_cast<double>(n);
        rep.sigma2_sef(j, k) = single.sigma2(j);
      }
    }
    return 0;
  });

  // Step 4: one-step update.
  rep.eff = rep.tqe + rep.sigma2_eff.cwiseProduct(rep.mean_score_eff);
  rep.sef = rep.tqe + rep.sigma2_sef.cwiseProduct(rep.mean_score_sef);
  return rep;
}

EstimateReport estimate(const Dataset& data, const QuantileGrid& grid, const FitConfig& cfg) {
  return estimate(data.x(), data.y(), grid, cfg);
}

double bootstrap_pvalue(double est, double esd) {
  if (esd == 0.0) return est == 0.0 ? 0.5 : 0.0;
  return 1.0 - normal_cdf(std::abs(est / esd));
}

BootstrapResult bootstrap_se(const Dataset& data, const QuantileGrid& grid, const FitConfig& cfg,
                             std::size_t replications, std::uint64_t seed, std::size_t threads) {
  if (replications < 2) throw Error(ErrorKind::Usage, "bootstrap", "need at least 2 replications");
  BootstrapResult out{grid, replications, 0, {}, in_stage("bootstrap", [&] { return estimate(data, grid, cfg); }), {}, {}};

  const Index n = static_cast<Index>(data.n());
  const Index p = static_cast<Index>(data.p());
  const auto levels = static_cast<Index>(grid.size());

  std::vector<std::optional<EstimateReport>> reps(replications);
  std::vector<std::string> errors(replications);
  parallel_for(replications, threads, [&](std::size_t r) {
    Rng rng(stream_seed(seed, r));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Matrix xb(n, p);
    Vector yb(n);
    for (Index i = 0; i < n; ++i) {
      const Index src = pick(rng);
      xb.row(i) = data.x().row(src);
      yb(i) = data.y()(src);
    }
    try {
      reps[r] = estimate(xb, yb, grid, cfg);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });

  std::size_t ok = 0;
  for (std::size_t r = 0; r < replications; ++r) {
    if (reps[r]) {
      ++ok;
    } else {
      ++out.failures;
      out.failure_messages.push_back("replicate " + std::to_string(r) + ": " + errors[r]);
    }
  }
  if (out.failures * 10 > replications || ok < 2) {
    std::ostringstream msg;
    msg << out.failures << " of " << replications << " bootstrap replicates failed";
    if (!out.failure_messages.empty()) msg << " (first: " << out.failure_messages.front() << ")";
    throw Error(ErrorKind::Numerical, "bootstrap", msg.str());
  }

  for (Estimator e : kEstimators) {
    const auto idx = static_cast<std::size_t>(e);
    Matrix sum = Matrix::Zero(p, levels);
    for (const auto& rep : reps) {
      if (rep) sum += rep->get(e);
    }
    const Matrix mean = sum / static_cast<double>(ok);
    Matrix ss = Matrix::Zero(p, levels);
    for (const auto& rep : reps) {
      if (rep) ss += (rep->get(e) - mean).cwiseAbs2();
    }
    out.esd[idx] = (ss / static_cast<double>(ok - 1)).cwiseSqrt();
    out.pvalue[idx].resize(p, levels);
    const Matrix& est = out.point.get(e);
    for (Index k = 0; k < levels; ++k) {
      for (Index j = 0; j < p; ++j) out.pvalue[idx](j, k) = bootstrap_pvalue(est(j, k), out.esd[idx](j, k));
    }
  }
  return out;
}

}  // namespace effqr
