#include "effqr/selftest.hpp"

#include "effqr/normal.hpp"
#include "effqr/pinball.hpp"
#include "effqr/rng.hpp"
#include "effqr/score.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace effqr {

namespace {

using oracle::OracleReport;

OracleReport make_report(std::string check, std::string instance, double discrepancy, double tol) {
  return {std::move(check), std::move(instance), discrepancy, tol, discrepancy <= tol};
}

Dataset random_regression(Rng& rng, int n, int p) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, p);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (int j = 1; j < p; ++j) x(i, j) = normal(rng);
    y(i) = x.row(i).sum() + (1.0 + std::abs(x(i, p - 1))) * normal(rng);
  }
  return make_dataset(y, x);
}

Matrix random_spd(Rng& rng, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = normal(rng);
  return g * g.transpose() + 0.1 * Matrix::Identity(dim, dim);
}

}  // namespace

std::vector<OracleReport> run_selftest(std::uint64_t seed) {
  std::vector<OracleReport> out;
  Rng rng(seed);
  FitConfig cfg;

  {
    std::uniform_int_distribution<int> pick_n(5, 30), pick_p(1, 3);
    std::uniform_real_distribution<double> pick_tau(0.1, 0.9);
    double worst = 0.0;
    const int count = 20;
    for (int t = 0; t < count; ++t) {
      const int p = pick_p(rng);
      const Dataset data = random_regression(rng, std::max(pick_n(rng), p + 2), p);
      const double tau = pick_tau(rng);
      const Vector solver = fit_quantile(data, tau, cfg).beta_hat;
      const Vector brute = oracle::pinball_vertex_oracle(data, tau);
      worst = std::max(worst, (solver - brute).cwiseAbs().maxCoeff());
    }
    out.push_back(make_report("pinball_vs_vertex", std::to_string(count) + " instances, n<=30, p<=3", worst, 1e-8));
  }

  {
    std::uniform_int_distribution<int> pick_l(1, 4), pick_p(1, 3);
    double worst = 0.0;
    const int count = 20;
    for (int t = 0; t < count; ++t) {
      const int p = pick_p(rng);
      const int dim = p * pick_l(rng);
      const Matrix u = random_spd(rng, dim);
      const ScoreSystem sys = solve_directions(u, static_cast<std::size_t>(p));
      for (int m = 0; m < dim; ++m) {
        const auto qm = oracle::quadratic_min_oracle(u, static_cast<std::size_t>(m));
        worst = std::max(worst, (sys.directions.col(m) - qm.d).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(sys.sigma2(m) - 1.0 / qm.value) / sys.sigma2(m));
      }
    }
    out.push_back(make_report("directions_vs_elimination", std::to_string(count) + " SPD instances, pL<=12", worst, 1e-9));
  }

  {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.2, 2.0);
    double worst = 0.0;
    const int count = 10;
    for (int t = 0; t < count; ++t) {
      const int p = 2;
      const int n = 40;
      Matrix x(n, p);
      for (int i = 0; i < n; ++i) x.row(i) << 1.0, normal(rng);
      const auto grid = make_grid({0.2, 0.5, 0.8});
      DensityEstimates dens;
      dens.f_hat.resize(n, 3);
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < 3; ++l) dens.f_hat(i, l) = unit(rng);
      const Matrix b = assemble_B(p, 3);
      const Matrix via_a = b * assemble_A(x, dens, grid) * b.transpose();
      worst = std::max(worst, (via_a - assemble_U(x, dens.f_hat, grid)).cwiseAbs().maxCoeff());
    }
    out.push_back(make_report("U_block_vs_BAB", std::to_string(count) + " instances, p=2, L=3", worst, 1e-10));
  }

  {
    const auto grid = make_grid({0.25, 0.5, 0.75});
    const oracle::ScalarCurve probit{[](double t) { return normal_quantile(t); },
                                     [](double t) { return 1.0 / normal_pdf(normal_quantile(t)); }};
    out.push_back(oracle::p1_reduction_check(grid, probit, {0.5, 1.0, 2.0}));
  }

  {
    std::uniform_real_distribution<double> unit(0.0, 1.0), pos(0.1, 3.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    bool ok = true;
    const int count = 1000;
    for (int t = 0; t < count; ++t) {
      oracle::GainInstance inst;
      inst.tau1 = 0.05 + 0.8 * unit(rng);
      inst.tau2 = inst.tau1 + 0.01 + (0.94 - inst.tau1) * unit(rng);
      inst.f1 = pos(rng);
      inst.f2 = pos(rng);
      inst.x = Vector{{1.0, normal(rng)}};
      inst.d1 = Vector{{normal(rng), normal(rng)}};
      inst.d2 = Vector{{normal(rng), normal(rng)}};
      const auto rep = oracle::efficiency_gain_check(inst);
      worst = std::max(worst, rep.discrepancy);
      ok = ok && rep.pass;
    }
    auto rep = make_report("efficiency_gain", std::to_string(count) + " random L=2 instances", worst, 1e-12);
    rep.pass = ok;
    out.push_back(rep);
  }
  return out;
}

}  // namespace effqr
