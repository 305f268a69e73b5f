#include <doctest.h>

#include "effqr/rng.hpp"
#include "effqr/score.hpp"

#include <random>

using namespace effqr;

namespace {

DensityEstimates flat_density(Eigen::Index n, Eigen::Index levels, double value = 1.0) {
  DensityEstimates d;
  d.f_hat = Matrix::Constant(n, levels, value);
  return d;
}

Matrix random_design(Rng& rng, int n, int p) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(n, p);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (int j = 1; j < p; ++j) x(i, j) = z(rng);
  }
  return x;
}

Matrix random_density(Rng& rng, int n, int levels) {
  std::uniform_real_distribution<double> u(0.2, 2.0);
  Matrix f(n, levels);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < levels; ++l) f(i, l) = u(rng);
  return f;
}

}  // namespace

TEST_CASE("interval blocks, hand computed") {
  const Matrix one = Matrix::Ones(1, 1);
  Matrix a1 = assemble_A(one, flat_density(1, 1), make_grid({0.5}));
  CHECK((a1 - 2.0 * Matrix::Identity(2, 2)).norm() < 1e-14);

  const Matrix a2 = assemble_A(one, flat_density(1, 2), make_grid({0.5, 0.7}));
  Matrix expect = Matrix::Zero(4, 4);
  expect(0, 0) = 2.0;
  expect.block(1, 1, 2, 2) << 5.0, -5.0, -5.0, 5.0;
  expect(3, 3) = 10.0 / 3.0;
  CHECK((a2 - expect).norm() < 1e-12);

  const Matrix b = assemble_B(1, 2);
  Matrix expect_b(2, 4);
  expect_b << 1, 1, 0, 0, 0, 0, 1, 1;
  CHECK(b == expect_b);
  const Matrix b2 = assemble_B(2, 1);
  CHECK(b2.rows() == 2);
  CHECK(b2.cols() == 4);
  CHECK(b2.block(0, 0, 2, 2) == Matrix::Identity(2, 2));
  CHECK(b2.block(0, 2, 2, 2) == Matrix::Identity(2, 2));
}

TEST_CASE("block tridiagonal assembly equals B A B'") {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const int p = 1 + t % 3, levels = 1 + t % 4, n = 25;
    const Matrix x = random_design(rng, n, p);
    DensityEstimates d;
    d.f_hat = random_density(rng, n, levels);
    std::vector<double> taus;
    for (int l = 0; l < levels; ++l) taus.push_back((l + 1.0) / (levels + 1.0));
    const auto grid = make_grid(taus);
    const Matrix b = assemble_B(p, levels);
    const Matrix u = assemble_U(x, d.f_hat, grid);
    CHECK((b * assemble_A(x, d, grid) * b.transpose() - u).cwiseAbs().maxCoeff() < 1e-10);
    // blocks beyond the first off-diagonal vanish
    for (int l = 0; l < levels; ++l)
      for (int k = l + 2; k < levels; ++k) CHECK(u.block(l * p, k * p, p, p).norm() == 0.0);
  }
}

TEST_CASE("direction identities and minimality") {
  Rng rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const int p = 1 + t % 3, levels = 1 + t % 4, dim = p * levels;
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) g(i, j) = z(rng);
    const Matrix u = g * g.transpose() + 0.2 * Matrix::Identity(dim, dim);
    const ScoreSystem sys = solve_directions(u, static_cast<std::size_t>(p));
    const Matrix inv = u.inverse();
    for (int m = 0; m < dim; ++m) {
      CHECK(sys.directions(m, m) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(sys.sigma2(m) - inv(m, m)) < 1e-10 * (1.0 + std::abs(inv(m, m))));
    }
  }

  // no other d with d_m = 1 does better
  const int dim = 6;
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = z(rng);
  const Matrix u = g * g.transpose() + Matrix::Identity(dim, dim);
  const ScoreSystem sys = solve_directions(u, 2);
  for (int m = 0; m < dim; ++m) {
    const Vector best = sys.directions.col(m);
    const double floor_value = best.dot(u * best);
    int violations = 0;
    for (int trial = 0; trial < 100000 / dim; ++trial) {
      Vector d = best;
      for (int k = 0; k < dim; ++k)
        if (k != m) d(k) += z(rng) * (trial % 2 ? 1.0 : 1e-3);
      if (d.dot(u * d) < floor_value - 1e-12 * floor_value) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("non positive definite information is reported") {
  Matrix u = Matrix::Identity(2, 2);
  u(1, 1) = -1.0;
  try {
    solve_directions(u, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
    CHECK(std::string(e.what()).find("-1") != std::string::npos);
  }
}

TEST_CASE("single level: interval score equals the quantile score") {
  const auto grid = make_grid({0.5});
  const Vector x{{1.0}};
  const Matrix beta = Matrix::Zero(1, 1);
  const Vector f{{1.0}};
  const Vector d{{1.0}};
  CHECK(efficient_score(-1.0, x, beta, f, d, grid) == doctest::Approx(-2.0));
  CHECK(efficient_score(1.0, x, beta, f, d, grid) == doctest::Approx(2.0));
  CHECK(efficient_score(0.0, x, beta, f, d, grid) == doctest::Approx(2.0));  // tie goes up

  Rng rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 0.95), pos(0.1, 3.0);
  for (int t = 0; t < 200; ++t) {
    const double tau = u(rng);
    const auto g = make_grid({tau});
    const Vector xi{{1.0, z(rng), z(rng)}};
    const Matrix b = Matrix::NullaryExpr(3, 1, [&] { return z(rng); });
    const Vector dir{{z(rng), z(rng), z(rng)}};
    const double fi = pos(rng), y = z(rng);
    const double full = efficient_score(y, xi, b, Vector{{fi}}, dir, g);
    const double single = single_quantile_score(y, xi, b.col(0), fi, tau, dir);
    CHECK(std::abs(full - single) < 1e-12 * (1.0 + std::abs(single)));
  }
}

TEST_CASE("score centering identity and crossing rules") {
  const auto grid = make_grid({0.3, 0.5, 0.7});
  const Vector x{{1.0}};
  const Vector f{{1.0, 2.0, 0.5}};
  const Vector d{{0.4, 1.0, -0.7}};
  Matrix ordered(1, 3);
  ordered << -1.0, 0.0, 1.0;
  for (double y : {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0}) {
    bool crossed = true;
    const double s = efficient_score(y, x, ordered, f, d, grid, &crossed, CrossingRule::Sort);
    CHECK_FALSE(crossed);
    CHECK(s == doctest::Approx(efficient_score(y, x, ordered, f, d, grid, nullptr, CrossingRule::Anchored)));
  }
  // two boundaries swapped: both rules flag the row, but score it differently
  Matrix crossed_beta(1, 3);
  crossed_beta << 0.5, -0.5, 1.0;
  bool crossed = false;
  const double sorted = efficient_score(0.0, x, crossed_beta, f, d, grid, &crossed, CrossingRule::Sort);
  CHECK(crossed);
  const double anchored = efficient_score(0.0, x, crossed_beta, f, d, grid, &crossed, CrossingRule::Anchored);
  CHECK(crossed);
  CHECK(std::abs(sorted - anchored) > 1e-6);

  // anchored form: sum_l (c_l - c_{l+1})(1{y < b_l} - tau_l)
  std::vector<double> a(3), c(5, 0.0);
  for (int l = 0; l < 3; ++l) a[l] = f(l) * d(l);
  for (std::size_t l = 1; l <= 4; ++l) {
    const double prev = l == 1 ? 0.0 : a[l - 2];
    const double cur = l == 4 ? 0.0 : a[l - 1];
    c[l - 1] = (prev - cur) / grid.spacing(l);
  }
  double expect = 0.0;
  for (int l = 0; l < 3; ++l) expect += (c[l] - c[l + 1]) * ((0.0 < crossed_beta(0, l) ? 1.0 : 0.0) - grid[l]);
  CHECK(anchored == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("score matrix counts crossings") {
  const auto grid = make_grid({0.3, 0.7});
  Matrix x(3, 2);
  x << 1, 0, 1, 1, 1, -1;
  Matrix beta(2, 2);
  beta << 0.0, 0.2, 0.0, 0.5;  // x'beta crosses at the third row only
  const Matrix f = Matrix::Ones(3, 2);
  const ScoreSystem sys = build_score_system(x, f, grid);
  std::size_t crossings = 99;
  const Matrix s = efficient_score_matrix(x, Vector{{0.1, 0.1, 0.1}}, beta, f, sys, grid, &crossings);
  CHECK(crossings == 1);
  CHECK(s.rows() == 3);
  CHECK(s.cols() == 4);
}
