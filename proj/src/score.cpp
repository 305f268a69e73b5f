#include "effqr/score.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace effqr {

namespace {

using Index = Eigen::Index;

// (1/n) sum_i w_i x_i x_i'
Matrix weighted_gram(const Matrix& x, const Vector& weight) {
  const Matrix scaled = x.array().colwise() * weight.array();
  return (x.transpose() * scaled) / static_cast<double>(x.rows());
}

void check_shapes(const Matrix& x, const Matrix& f_hat, const QuantileGrid& grid) {
  if (f_hat.rows() != x.rows() || f_hat.cols() != static_cast<Index>(grid.size())) {
    throw Error(ErrorKind::Data, "score", "density matrix does not match data and grid");
  }
}

}  // namespace

Matrix assemble_A(const Matrix& x, const DensityEstimates& dens, const QuantileGrid& grid) {
  check_shapes(x, dens.f_hat, grid);
  const Index p = x.cols();
  const auto levels = static_cast<Index>(grid.size());
  const Matrix& f = dens.f_hat;
  Matrix a = Matrix::Zero(2 * p * levels, 2 * p * levels);

  a.topLeftCorner(p, p) = weighted_gram(x, f.col(0).cwiseAbs2()) / grid.spacing(1);
  for (Index l = 2; l <= levels; ++l) {
    const double gap = grid.spacing(static_cast<std::size_t>(l));
    const Index at = p + 2 * p * (l - 2);
    const Matrix cross = weighted_gram(x, f.col(l - 2).cwiseProduct(f.col(l - 1))) / gap;
    a.block(at, at, p, p) = weighted_gram(x, f.col(l - 2).cwiseAbs2()) / gap;
    a.block(at, at + p, p, p) = -cross;
    a.block(at + p, at, p, p) = -cross;
    a.block(at + p, at + p, p, p) = weighted_gram(x, f.col(l - 1).cwiseAbs2()) / gap;
  }
  a.bottomRightCorner(p, p) =
      weighted_gram(x, f.col(levels - 1).cwiseAbs2()) / grid.spacing(grid.size() + 1);
  return a;
}

Matrix assemble_B(std::size_t p, std::size_t levels) {
  const auto pp = static_cast<Index>(p);
  const auto ll = static_cast<Index>(levels);
  Matrix b = Matrix::Zero(pp * ll, 2 * pp * ll);
  for (Index l = 0; l < ll; ++l) {
    b.block(l * pp, 2 * l * pp, pp, pp).setIdentity();
    b.block(l * pp, (2 * l + 1) * pp, pp, pp).setIdentity();
  }
  return b;
}

Matrix assemble_U(const Matrix& x, const Matrix& f_hat, const QuantileGrid& grid) {
  check_shapes(x, f_hat, grid);
  const Index p = x.cols();
  const auto levels = static_cast<Index>(grid.size());
  Matrix u = Matrix::Zero(p * levels, p * levels);
  for (Index l = 0; l < levels; ++l) {
    const auto k = static_cast<std::size_t>(l) + 1;  // 1-based level
    const double w = 1.0 / grid.spacing(k) + 1.0 / grid.spacing(k + 1);
    u.block(l * p, l * p, p, p) = weighted_gram(x, f_hat.col(l).cwiseAbs2()) * w;
    if (l + 1 < levels) {
      const Matrix cross =
          weighted_gram(x, f_hat.col(l).cwiseProduct(f_hat.col(l + 1))) / grid.spacing(k + 1);
      u.block(l * p, (l + 1) * p, p, p) = -cross;
      u.block((l + 1) * p, l * p, p, p) = -cross;
    }
  }
  return u;
}

ScoreSystem solve_directions(const Matrix& U, std::size_t p) {
  if (U.rows() != U.cols() || U.rows() == 0 || p == 0 || U.rows() % static_cast<Index>(p) != 0) {
    throw Error(ErrorKind::Data, "score", "information matrix has an invalid shape");
  }
  const double asym = (U - U.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * (1.0 + U.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::Numerical, "score", "information matrix is not symmetric");
  }
  Eigen::LLT<Matrix> llt(U);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(U, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "information matrix is not positive definite (smallest eigenvalue "
        << eig.eigenvalues().minCoeff() << ")";
    throw Error(ErrorKind::Numerical, "score", msg.str());
  }
  ScoreSystem sys;
  sys.p = p;
  sys.levels = static_cast<std::size_t>(U.rows()) / p;
  sys.U = U;
  sys.U_inv = llt.solve(Matrix::Identity(U.rows(), U.cols()));
  sys.U_inv = 0.5 * (sys.U_inv + sys.U_inv.transpose()).eval();
  sys.W = sys.U_inv.diagonal().cwiseInverse();
  sys.directions = sys.U_inv * sys.W.asDiagonal();
  sys.sigma2.resize(U.rows());
  for (Index m = 0; m < U.rows(); ++m) {
    const auto u = sys.directions.col(m);
    sys.sigma2(m) = 1.0 / u.dot(U * u);
  }
  return sys;
}

ScoreSystem build_score_system(const Matrix& x, const Matrix& f_hat, const QuantileGrid& grid) {
  return solve_directions(assemble_U(x, f_hat, grid), static_cast<std::size_t>(x.cols()));
}

namespace {

// Interval (1-based, 1..L+1) of y among sorted boundaries; ties go up.
std::size_t locate_sorted(double y, const std::vector<double>& sorted) {
  return 1 + static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), y) - sorted.begin());
}

// sum_{l=1}^{L+1} (a_{l-1} - a_l) / gap_l * (1{l = hit} - gap_l), a_0 = a_{L+1} = 0.
double interval_score(const std::vector<double>& a, std::size_t hit, const QuantileGrid& grid) {
  const std::size_t levels = grid.size();
  double total = 0.0;
  for (std::size_t l = 1; l <= levels + 1; ++l) {
    const double prev = (l == 1) ? 0.0 : a[l - 2];
    const double cur = (l == levels + 1) ? 0.0 : a[l - 1];
    const double gap = grid.spacing(l);
    total += (prev - cur) / gap * ((l == hit ? 1.0 : 0.0) - gap);
  }
  return total;
}

// Same sum after summation by parts: sum_l (c_l - c_{l+1}) (1{y < b_l} - tau_l),
// c_l = (a_{l-1} - a_l) / gap_l. Each indicator stays on its own boundary.
double anchored_score(const std::vector<double>& a, const std::vector<char>& below,
                      const QuantileGrid& grid) {
  const std::size_t levels = grid.size();
  auto coef = [&](std::size_t l) {
    const double prev = (l == 1) ? 0.0 : a[l - 2];
    const double cur = (l == levels + 1) ? 0.0 : a[l - 1];
    return (prev - cur) / grid.spacing(l);
  };
  double total = 0.0;
  for (std::size_t l = 1; l <= levels; ++l) {
    total += (coef(l) - coef(l + 1)) * ((below[l - 1] ? 1.0 : 0.0) - grid[l - 1]);
  }
  return total;
}

// Where one observation falls; shared by every direction.
struct Placement {
  bool crossed = false;
  std::size_t hit = 0;      // ordered rows, or crossed rows under Sort
  std::vector<char> below;  // crossed rows under Anchored
};

Placement place(double y, std::vector<double>& bounds, CrossingRule rule) {
  Placement out;
  out.crossed = !std::is_sorted(bounds.begin(), bounds.end());
  if (out.crossed && rule == CrossingRule::Anchored) {
    out.below.resize(bounds.size());
    for (std::size_t l = 0; l < bounds.size(); ++l) out.below[l] = y < bounds[l];
    return out;
  }
  if (out.crossed) std::sort(bounds.begin(), bounds.end());
  out.hit = locate_sorted(y, bounds);
  return out;
}

double score_at(const Placement& where, const std::vector<double>& a, const QuantileGrid& grid) {
  return where.below.empty() ? interval_score(a, where.hit, grid) : anchored_score(a, where.below, grid);
}

}  // namespace

double efficient_score(double y, const Vector& x, const Matrix& beta, const Vector& dens_row,
                       const Vector& direction, const QuantileGrid& grid, bool* crossed,
                       CrossingRule rule) {
  const std::size_t levels = grid.size();
  const Index p = x.size();
  if (beta.rows() != p || beta.cols() != static_cast<Index>(levels) ||
      dens_row.size() != static_cast<Index>(levels) || direction.size() != p * beta.cols()) {
    throw Error(ErrorKind::Data, "score", "efficient score inputs have inconsistent sizes");
  }
  std::vector<double> bounds(levels), a(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    const auto col = static_cast<Index>(l);
    bounds[l] = x.dot(beta.col(col));
    a[l] = dens_row(col) * x.dot(direction.segment(col * p, p));
  }
  const Placement where = place(y, bounds, rule);
  if (crossed != nullptr) *crossed = where.crossed;
  return score_at(where, a, grid);
}

double efficient_score(double y, const Vector& x, const CoefficientSet& coeffs,
                       const Vector& dens_row, const Vector& direction, bool* crossed,
                       CrossingRule rule) {
  return efficient_score(y, x, coeffs.beta, dens_row, direction, coeffs.grid, crossed, rule);
}

double single_quantile_score(double y, const Vector& x, const Vector& beta_tau, double f_hat,
                             double tau, const Vector& direction) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::Usage, "score", "quantile level outside (0,1)");
  const double below = (y < x.dot(beta_tau)) ? 1.0 : 0.0;
  return f_hat * (tau - below) * direction.dot(x) / ((1.0 - tau) * tau);
}

Matrix efficient_score_matrix(const Matrix& x, const Vector& y, const Matrix& beta,
                              const Matrix& f_hat, const ScoreSystem& system,
                              const QuantileGrid& grid, std::size_t* crossings, CrossingRule rule) {
  check_shapes(x, f_hat, grid);
  const Index n = x.rows();
  const Index p = x.cols();
  const auto levels = static_cast<Index>(grid.size());
  const Index dim = p * levels;
  Matrix out(n, dim);
  std::size_t crossed_rows = 0;
  std::vector<double> bounds(static_cast<std::size_t>(levels)), a(static_cast<std::size_t>(levels));
  const Matrix fitted = x * beta;  // n x L boundaries
  for (Index i = 0; i < n; ++i) {
    for (Index l = 0; l < levels; ++l) bounds[static_cast<std::size_t>(l)] = fitted(i, l);
    const Placement where = place(y(i), bounds, rule);
    if (where.crossed) ++crossed_rows;
    for (Index m = 0; m < dim; ++m) {
      for (Index l = 0; l < levels; ++l) {
        a[static_cast<std::size_t>(l)] =
            f_hat(i, l) * x.row(i).dot(system.directions.col(m).segment(l * p, p));
      }
      out(i, m) = score_at(where, a, grid);
    }
  }
  if (crossings != nullptr) *crossings = crossed_rows;
  return out;
}

}  // namespace effqr
