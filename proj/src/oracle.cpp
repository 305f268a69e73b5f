#include "effqr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace effqr::oracle {

namespace {

using Index = Eigen::Index;

double check_loss(const Matrix& x, const Vector& y, const Vector& beta, double tau) {
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double r = y(i) - x.row(i).dot(beta);
    total += r >= 0.0 ? tau * r : (tau - 1.0) * r;
  }
  return total;
}

bool lex_less(const Vector& a, const Vector& b) {
  for (Index k = 0; k < a.size(); ++k) {
    const double tol = 1e-9 * (1.0 + std::max(std::abs(a(k)), std::abs(b(k))));
    if (a(k) < b(k) - tol) return true;
    if (a(k) > b(k) + tol) return false;
  }
  return false;
}

}  // namespace

Vector pinball_vertex_oracle(const Dataset& data, double tau) {
  const auto n = static_cast<Index>(data.n());
  const auto p = static_cast<Index>(data.p());
  if (n > 50 || p > 3) throw Error(ErrorKind::Usage, "oracle", "vertex enumeration needs n <= 50, p <= 3");
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::Usage, "oracle", "quantile level outside (0,1)");
  const Matrix& x = data.x();
  const Vector& y = data.y();

  bool found = false;
  double best_value = std::numeric_limits<double>::infinity();
  Vector best;
  std::vector<Index> pick(static_cast<std::size_t>(p));
  // Odometer over strictly increasing index tuples.
  for (Index k = 0; k < p; ++k) pick[static_cast<std::size_t>(k)] = k;
  while (true) {
    Matrix xs(p, p);
    Vector ys(p);
    for (Index k = 0; k < p; ++k) {
      xs.row(k) = x.row(pick[static_cast<std::size_t>(k)]);
      ys(k) = y(pick[static_cast<std::size_t>(k)]);
    }
    Eigen::FullPivLU<Matrix> lu(xs);
    lu.setThreshold(1e-12);
    if (lu.isInvertible()) {
      const Vector beta = lu.solve(ys);
      const double value = check_loss(x, y, beta, tau);
      const double tol = 1e-10 * (1.0 + std::abs(best_value == std::numeric_limits<double>::infinity() ? value : best_value));
      if (!found || value < best_value - tol) {
        best_value = value;
        best = beta;
        found = true;
      } else if (std::abs(value - best_value) <= tol && lex_less(beta, best)) {
        best_value = std::min(best_value, value);
        best = beta;
      }
    }
    Index k = p - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == n - p + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (Index r = k + 1; r < p; ++r) pick[static_cast<std::size_t>(r)] = pick[static_cast<std::size_t>(r - 1)] + 1;
  }
  if (!found) throw Error(ErrorKind::Numerical, "oracle", "every p-subset of observations is singular");
  return best;
}

QuadraticMin quadratic_min_oracle(const Matrix& U, std::size_t m) {
  const Index dim = U.rows();
  if (U.cols() != dim || dim == 0 || dim > 12) {
    throw Error(ErrorKind::Usage, "oracle", "quadratic oracle needs a square matrix of size <= 12");
  }
  if (static_cast<Index>(m) >= dim) throw Error(ErrorKind::Usage, "oracle", "constrained index out of range");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (U + U.transpose()), Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw Error(ErrorKind::Numerical, "oracle", "matrix is not positive definite");
  }
  const auto mi = static_cast<Index>(m);
  QuadraticMin out;
  out.d = Vector::Zero(dim);
  out.d(mi) = 1.0;
  if (dim > 1) {
    std::vector<Index> rest;
    for (Index r = 0; r < dim; ++r) {
      if (r != mi) rest.push_back(r);
    }
    const auto k = static_cast<Index>(rest.size());
    Matrix urr(k, k);
    Vector urm(k);
    for (Index a = 0; a < k; ++a) {
      urm(a) = U(rest[static_cast<std::size_t>(a)], mi);
      for (Index b = 0; b < k; ++b) urr(a, b) = U(rest[static_cast<std::size_t>(a)], rest[static_cast<std::size_t>(b)]);
    }
    const Vector dr = urr.colPivHouseholderQr().solve(-urm);
    for (Index a = 0; a < k; ++a) out.d(rest[static_cast<std::size_t>(a)]) = dr(a);
  }
  out.value = out.d.dot(U * out.d);
  return out;
}

OracleReport p1_reduction_check(const QuantileGrid& grid, const ScalarCurve& curve,
                                const std::vector<double>& xs, double perturbation) {
  const std::size_t levels = grid.size();
  const auto dim = static_cast<Index>(levels);
  std::vector<double> slope(levels), value(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    slope[l] = curve.dbeta(grid[l]);
    value[l] = curve.beta(grid[l]);
  }
  // With p = 1 and f = 1/(x beta'), f x = 1/beta' whatever the covariate law.
  Matrix U = Matrix::Zero(dim, dim);
  for (std::size_t l = 0; l < levels; ++l) {
    const auto li = static_cast<Index>(l);
    U(li, li) = (1.0 / (slope[l] * slope[l])) * (1.0 / grid.spacing(l + 1) + 1.0 / grid.spacing(l + 2));
    if (l + 1 < levels) {
      const double off = -1.0 / (slope[l] * slope[l + 1] * grid.spacing(l + 2));
      U(li, li + 1) = off;
      U(li + 1, li) = off;
    }
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < levels; ++k) {
    QuadraticMin qm = quadratic_min_oracle(U, k);
    for (std::size_t l = 0; l < levels; ++l) {
      if (l != k) qm.d(static_cast<Index>(l)) += perturbation;
    }
    // a_l = d_l / beta'(tau_l), padded with a_0 = a_{L+1} = 0.
    std::vector<double> a(levels + 2, 0.0);
    for (std::size_t l = 0; l < levels; ++l) a[l + 1] = qm.d(static_cast<Index>(l)) / slope[l];

    for (std::size_t l = 1; l <= levels; ++l) {
      if (l == k + 1) continue;
      const double stationarity = grid.spacing(l + 1) * (a[l - 1] - a[l]) - grid.spacing(l) * (a[l] - a[l + 1]);
      worst = std::max(worst, std::abs(stationarity));
    }

    const std::size_t target = k + 1;
    const double bracket = (a[target] - a[target + 1]) / grid.spacing(target + 1) -
                           (a[target - 1] - a[target]) / grid.spacing(target);
    for (double x : xs) {
      std::vector<double> ys;
      std::vector<double> bounds(levels);
      for (std::size_t l = 0; l < levels; ++l) bounds[l] = x * value[l];
      ys.push_back(bounds.front() - 1.0);
      ys.push_back(bounds.back() + 1.0);
      for (std::size_t l = 0; l < levels; ++l) {
        ys.push_back(bounds[l]);
        if (l + 1 < levels) ys.push_back(0.5 * (bounds[l] + bounds[l + 1]));
      }
      for (double y : ys) {
        // Full interval score: sum_l (F_{l-1} - F_l) / gap_l (1{interval l} - gap_l).
        double full = 0.0;
        for (std::size_t l = 1; l <= levels + 1; ++l) {
          const double lo = (l == 1) ? -std::numeric_limits<double>::infinity() : bounds[l - 2];
          const double hi = (l == levels + 1) ? std::numeric_limits<double>::infinity() : bounds[l - 1];
          const double f_prev = (l == 1) ? 0.0 : 1.0 / (x * slope[l - 2]);
          const double f_cur = (l == levels + 1) ? 0.0 : 1.0 / (x * slope[l - 1]);
          const double d_prev = (l == 1) ? 0.0 : qm.d(static_cast<Index>(l - 2));
          const double d_cur = (l == levels + 1) ? 0.0 : qm.d(static_cast<Index>(l - 1));
          const double gap = grid.spacing(l);
          const double inside = (lo <= y && y < hi) ? 1.0 : 0.0;
          full += (f_prev * x * d_prev - f_cur * x * d_cur) / gap * (inside - gap);
        }
        const double collapsed = bracket * (grid[k] - (y < bounds[k] ? 1.0 : 0.0));
        worst = std::max(worst, std::abs(full - collapsed));
      }
    }
  }
  OracleReport rep;
  rep.check = "p1_reduction";
  std::ostringstream desc;
  desc << "L=" << levels << " xs=" << xs.size() << " perturbation=" << perturbation;
  rep.instance = desc.str();
  rep.discrepancy = worst;
  rep.tolerance = 1e-8;
  rep.pass = worst < rep.tolerance;
  return rep;
}

GainValues efficiency_gain_values(const GainInstance& inst) {
  const double t1 = inst.tau1;
  const double t2 = inst.tau2;
  const double g1 = inst.f1 * inst.x.dot(inst.d1);
  const double g2 = inst.f2 * inst.x.dot(inst.d2);
  GainValues v;
  v.q1 = g1 * g1 / (t1 * (1.0 - t1));
  v.q2 = g1 * g1 / t1 + g2 * g2 / (1.0 - t2) + (g1 - g2) * (g1 - g2) / (t2 - t1);
  v.direct = v.q2 - v.q1;
  const double r = std::sqrt((1.0 - t2) / (1.0 - t1));
  const double diff = r * g1 - g2 / r;
  v.completed = diff * diff / (t2 - t1);
  return v;
}

OracleReport efficiency_gain_check(const GainInstance& inst) {
  if (!(inst.tau1 > 0.0 && inst.tau1 < inst.tau2 && inst.tau2 < 1.0)) {
    throw Error(ErrorKind::Usage, "oracle", "need 0 < tau1 < tau2 < 1");
  }
  const GainValues v = efficiency_gain_values(inst);
  const double scale = std::max(1.0, std::abs(v.q2));
  OracleReport rep;
  rep.check = "efficiency_gain";
  std::ostringstream desc;
  desc << "tau=(" << inst.tau1 << "," << inst.tau2 << ") p=" << inst.x.size();
  rep.instance = desc.str();
  rep.discrepancy = std::abs(v.direct - v.completed) / scale;
  rep.tolerance = 1e-12;
  rep.pass = rep.discrepancy <= rep.tolerance && v.completed >= -1e-12 && v.direct >= -1e-12 * scale;
  return rep;
}

}  // namespace effqr::oracle
