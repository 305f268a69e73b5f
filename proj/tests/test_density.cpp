#include <doctest.h>

#include "effqr/density.hpp"
#include "effqr/pinball.hpp"
#include "effqr/sim.hpp"

using namespace effqr;

namespace {

CoefficientSet one_level(const Vector& minus, const Vector& plus, double h) {
  CoefficientSet cs{make_grid({0.5}), Matrix::Zero(minus.size(), 1), std::nullopt, h, minus, plus};
  return cs;
}

}  // namespace

TEST_CASE("difference quotient") {
  CHECK(estimate_derivative(Vector{{3.0}}, Vector{{1.0}}, 0.1)(0) == doctest::Approx(10.0));
  CHECK(estimate_derivative(Vector{{2.0, -1.0}}, Vector{{2.0, -1.0}}, 0.05).norm() == 0.0);
  CHECK_THROWS_AS(estimate_derivative(Vector{{1.0}}, Vector{{1.0}}, 0.0), Error);
}

TEST_CASE("density reciprocal and floor") {
  FitConfig cfg;
  const double h = 0.1;
  // slope  x'dbeta = 4  ->  f = 0.25
  Matrix x(2, 2);
  x << 1.0, 1.0, 1.0, -3.0;
  const Vector dbeta{{2.0, 2.0}};
  const Vector mid{{0.0, 0.0}};
  auto cs = one_level(Matrix(mid - h * dbeta), Matrix(mid + h * dbeta), h);
  const auto dens = estimate_density(x, cs, cfg);
  CHECK(dens.f_hat(0, 0) == doctest::Approx(0.25));
  // slope -4 < floor: clamped to 1/floor
  CHECK(dens.f_hat(1, 0) == doctest::Approx(100.0));
  CHECK(dens.clamped_count == 1);

  cfg.density_floor = 0.05;
  Matrix x2(1, 2);
  x2 << 1.0, -1.15;  // slope 2 - 2.3 = -0.3
  const auto d2 = estimate_density(x2, cs, cfg);
  CHECK(d2.f_hat(0, 0) == doctest::Approx(20.0));
  CHECK(d2.clamped_count == 1);

  // reciprocal identity wherever no floor bites
  for (Eigen::Index i = 0; i < dens.f_hat.rows(); ++i) {
    const double s = x.row(i).dot(dens.dbeta_hat.col(0));
    if (s >= FitConfig{}.density_floor) CHECK(dens.f_hat(i, 0) * s == doctest::Approx(1.0));
  }
}

TEST_CASE("bandwidth rule") {
  const auto central = make_grid({0.3, 0.5, 0.7});
  const auto raw = default_bandwidth(1000);
  CHECK(raw == doctest::Approx(0.251189).epsilon(1e-5));
  const auto wide = make_grid({0.5, 0.55});
  auto c = select_bandwidth(1000, wide, BandwidthRule{});
  CHECK(c.h == doctest::Approx(0.2251).epsilon(1e-3));  // capped by (1-0.55)/2
  CHECK(c.capped);
  CHECK_FALSE(c.warning.empty());
  c = select_bandwidth(100000, central, BandwidthRule{});
  CHECK(c.h == doctest::Approx(0.1));
  CHECK_FALSE(c.capped);
  c = select_bandwidth(1000, central, BandwidthRule{});
  CHECK(c.h == doctest::Approx(0.15));
  CHECK(c.capped);
  c = select_bandwidth(1, central, BandwidthRule{});
  CHECK(c.warning.find("below 2") != std::string::npos);
  c = select_bandwidth(1000, central, BandwidthRule::fixed(0.02));
  CHECK(c.h == 0.02);
  CHECK(c.warning.empty());
}

TEST_CASE("plug-in density tracks the truth") {
  // M1: f(x'beta(tau)) = 1/(x2 dprobit(tau)); compare medians of the ratio
  const SimModel m(ModelId::M1);
  const Dataset d = generate(m, 20000, 9);
  FitConfig cfg;
  const auto grid = make_grid({0.5});
  const auto cs = fit_grid(d, grid, cfg);
  const auto dens = estimate_density(d, cs, cfg);
  const Vector truth = m.dbeta(0.5);
  CHECK(dens.dbeta_hat(1, 0) == doctest::Approx(truth(1)).epsilon(0.1));
  CHECK(std::abs(dens.dbeta_hat(0, 0)) < 0.25);
}
