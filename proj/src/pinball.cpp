#include "effqr/pinball.hpp"

#include "effqr/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace effqr {

double pinball_loss(double u, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error(ErrorKind::Usage, "pinball", "quantile level outside (0,1)");
  }
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

double pinball_objective(const Matrix& x, const Vector& y, const Vector& beta, double tau) {
  const Vector r = y - x * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += r(i) * (tau - (r(i) < 0.0 ? 1.0 : 0.0));
  return total;
}

namespace {

using Index = Eigen::Index;

constexpr double kStepScale = 0.99995;
constexpr std::size_t kMaxBasesPerVertex = 500;
constexpr std::size_t kMaxFaceVertices = 200;

// Frisch-Newton style primal-dual interior point for
//   min c'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1,  c = -y.
// The dual variables give beta = -dual.
struct InteriorPointResult {
  Vector beta;
  int iterations = 0;
  bool converged = false;
};

double max_step(const Vector& v, const Vector& dv) {
  double step = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) step = std::min(step, -v(i) / dv(i));
  }
  return step;
}

InteriorPointResult interior_point(const Matrix& x, const Vector& y, double tau, double tol,
                                   int max_iter) {
  const Index n = x.rows();
  InteriorPointResult out;

  Vector a = Vector::Constant(n, 1.0 - tau);
  Vector s = Vector::Constant(n, tau);
  const Vector c = -y;

  Matrix gram = x.transpose() * x;
  Vector dual = gram.ldlt().solve(x.transpose() * c);
  Vector r = c - x * dual;
  const double shift = std::max(1e-8, 1e-3 * r.cwiseAbs().mean());
  Vector z = r.cwiseMax(0.0).array() + shift;
  Vector w = (-r).cwiseMax(0.0).array() + shift;

  Vector q(n), v(n), dx(n), ds(n), dz(n), dw(n), r1(n), r2(n);
  Vector dy;
  auto solve_direction = [&](const Vector& rhs1, const Vector& rhs2) {
    v = rhs1.cwiseQuotient(a) - rhs2.cwiseQuotient(s);
    const Matrix m = x.transpose() * q.asDiagonal() * x;
    dy = m.ldlt().solve(-(x.transpose() * q.cwiseProduct(v)));
    dx = q.cwiseProduct(x * dy + v);
    ds = -dx;
    dz = (rhs1 - z.cwiseProduct(dx)).cwiseQuotient(a);
    dw = (rhs2 + w.cwiseProduct(dx)).cwiseQuotient(s);
  };

  for (int it = 0; it < max_iter; ++it) {
    const double gap = a.dot(z) + s.dot(w);
    const double primal = c.dot(a);
    if (gap <= tol * (1.0 + std::abs(primal))) {
      out.converged = true;
      break;
    }
    ++out.iterations;
    q = (z.cwiseQuotient(a) + w.cwiseQuotient(s)).cwiseInverse();

    // Affine-scaling predictor.
    r1 = -a.cwiseProduct(z);
    r2 = -s.cwiseProduct(w);
    solve_direction(r1, r2);
    double step_p = std::min(1.0, kStepScale * std::min(max_step(a, dx), max_step(s, ds)));
    double step_d = std::min(1.0, kStepScale * std::min(max_step(z, dz), max_step(w, dw)));
    const double gap_aff = (a + step_p * dx).dot(z + step_d * dz) +
                           (s + step_p * ds).dot(w + step_d * dw);
    const double sigma = std::pow(gap_aff / gap, 3.0);
    const double mu = sigma * gap / (2.0 * static_cast<double>(n));

    // Mehrotra corrector.
    r1 = (Vector::Constant(n, mu) - a.cwiseProduct(z) - dx.cwiseProduct(dz));
    r2 = (Vector::Constant(n, mu) - s.cwiseProduct(w) - ds.cwiseProduct(dw));
    solve_direction(r1, r2);
    step_p = std::min(1.0, kStepScale * std::min(max_step(a, dx), max_step(s, ds)));
    step_d = std::min(1.0, kStepScale * std::min(max_step(z, dz), max_step(w, dw)));

    a += step_p * dx;
    s += step_p * ds;
    dual += step_d * dy;
    z += step_d * dz;
    w += step_d * dw;
  }
  out.beta = -dual;
  return out;
}

// Rows of x indexed by a basis form a p x p interpolation system.
Matrix basis_rows(const Matrix& x, const std::vector<Index>& basis) {
  Matrix xb(static_cast<Index>(basis.size()), x.cols());
  for (std::size_t k = 0; k < basis.size(); ++k) xb.row(static_cast<Index>(k)) = x.row(basis[k]);
  return xb;
}

bool lexicographically_less(const Vector& a, const Vector& b) {
  for (Index k = 0; k < a.size(); ++k) {
    const double scale = 1e-9 * (1.0 + std::max(std::abs(a(k)), std::abs(b(k))));
    if (a(k) < b(k) - scale) return true;
    if (a(k) > b(k) + scale) return false;
  }
  return false;
}

class VertexSolver {
 public:
  VertexSolver(const Matrix& x, const Vector& y, double tau)
      : x_(x), y_(y), tau_(tau), n_(x.rows()), p_(x.cols()) {}

  struct Vertex {
    std::vector<Index> basis;
    Vector beta;
    Vector residual;
    double objective = 0.0;
    std::vector<Index> zeros;  // observations with (numerically) zero residual
  };

  struct Edge {
    std::vector<Index> basis;
    Index released = 0;  // position inside basis
    double sign = 1.0;
    double slope = 0.0;
    double tolerance = 0.0;
    Vector direction;   // change in beta per unit step
    Vector movement;    // x_i' direction for every i
  };

  // Greedily picks p well-conditioned rows in the given preference order.
  bool initial_basis(const std::vector<Index>& order, std::vector<Index>& basis) const {
    basis.clear();
    Matrix q(p_, 0);
    for (Index i : order) {
      Vector row = x_.row(i).transpose();
      const double norm = row.norm();
      if (norm == 0.0) continue;
      Vector rem = row;
      for (Index k = 0; k < q.cols(); ++k) rem -= q.col(k).dot(rem) * q.col(k);
      if (rem.norm() <= 1e-8 * norm) continue;
      q.conservativeResize(p_, q.cols() + 1);
      q.col(q.cols() - 1) = rem / rem.norm();
      basis.push_back(i);
      if (static_cast<Index>(basis.size()) == p_) return true;
    }
    return false;
  }

  bool make_vertex(std::vector<Index> basis, Vertex& out) const {
    const Matrix xb = basis_rows(x_, basis);
    Eigen::FullPivLU<Matrix> lu(xb);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) return false;
    Vector yb(p_);
    for (Index k = 0; k < p_; ++k) yb(k) = y_(basis[static_cast<std::size_t>(k)]);
    out.beta = lu.solve(yb);
    out.residual = y_ - x_ * out.beta;
    for (Index b : basis) out.residual(b) = 0.0;
    out.objective = 0.0;
    out.zeros.clear();
    for (Index i = 0; i < n_; ++i) {
      const double r = out.residual(i);
      const double scale = 1.0 + std::abs(y_(i)) + x_.row(i).cwiseAbs().dot(out.beta.cwiseAbs());
      if (std::abs(r) <= 1e-11 * scale) {
        out.residual(i) = 0.0;
        out.zeros.push_back(i);
      } else {
        out.objective += r * (tau_ - (r < 0.0 ? 1.0 : 0.0));
      }
    }
    std::sort(basis.begin(), basis.end());
    out.basis = std::move(basis);
    return true;
  }

  // All edges leaving the vertex: for every nonsingular p-subset of the zero set,
  // release one member in either direction.
  std::vector<Edge> edges(const Vertex& v) const {
    std::vector<std::vector<Index>> bases;
    if (static_cast<Index>(v.zeros.size()) == p_) {
      bases.push_back(v.basis);
    } else {
      bases.push_back(v.basis);
      std::vector<Index> pick;
      enumerate_subsets(v.zeros, 0, pick, bases);
    }
    std::vector<Edge> out;
    std::set<std::vector<Index>> seen;
    for (auto& basis : bases) {
      if (!seen.insert(basis).second) continue;
      const Matrix xb = basis_rows(x_, basis);
      Eigen::FullPivLU<Matrix> lu(xb);
      lu.setThreshold(1e-12);
      if (!lu.isInvertible()) continue;
      const Matrix inv = lu.inverse();
      const Matrix move = x_ * inv;
      for (Index j = 0; j < p_; ++j) {
        for (double sign : {1.0, -1.0}) {
          Edge e;
          e.basis = basis;
          e.released = j;
          e.sign = sign;
          e.direction = sign * inv.col(j);
          e.movement = sign * move.col(j);
          for (Index b = 0; b < p_; ++b) {
            e.movement(basis[static_cast<std::size_t>(b)]) = (b == j) ? sign : 0.0;
          }
          double slope = 0.0;
          double mag = 0.0;
          for (Index i = 0; i < n_; ++i) slope += slope_term(v.residual(i), e.movement(i));
          for (Index i = 0; i < n_; ++i) mag += std::abs(e.movement(i));
          e.slope = slope;
          e.tolerance = 1e-11 * (1.0 + mag);
          out.push_back(std::move(e));
        }
      }
    }
    return out;
  }

  // Walk along an edge to the first breakpoint where the slope turns non-negative.
  // Returns the observation entering the basis, or -1 if the ray has no breakpoint.
  Index line_search(const Vertex& v, const Edge& e, bool stop_at_first) const {
    std::vector<std::pair<double, Index>> breaks;
    for (Index i = 0; i < n_; ++i) {
      const double r = v.residual(i);
      const double m = e.movement(i);
      if (r == 0.0 || m == 0.0) continue;
      const double t = r / m;
      if (t > 0.0) breaks.emplace_back(t, i);
    }
    if (breaks.empty()) return -1;
    std::sort(breaks.begin(), breaks.end());
    if (stop_at_first) return breaks.front().second;
    double slope = e.slope;
    for (const auto& [t, i] : breaks) {
      slope += std::abs(e.movement(i));
      if (slope >= -e.tolerance) return i;
    }
    return breaks.back().second;
  }

  std::vector<Index> replace(const Edge& e, Index incoming) const {
    std::vector<Index> basis = e.basis;
    basis[static_cast<std::size_t>(e.released)] = incoming;
    return basis;
  }

 private:
  // d/dt of rho(r - t m) at t = 0+.
  double slope_term(double r, double m) const {
    if (m == 0.0) return 0.0;
    if (r > 0.0) return -m * tau_;
    if (r < 0.0) return m * (1.0 - tau_);
    return m > 0.0 ? (1.0 - tau_) * m : -tau_ * m;
  }

  void enumerate_subsets(const std::vector<Index>& pool, std::size_t start, std::vector<Index>& pick,
                         std::vector<std::vector<Index>>& out) const {
    if (out.size() >= kMaxBasesPerVertex) return;
    if (static_cast<Index>(pick.size()) == p_) {
      out.push_back(pick);
      return;
    }
    for (std::size_t k = start; k < pool.size(); ++k) {
      pick.push_back(pool[k]);
      enumerate_subsets(pool, k + 1, pick, out);
      pick.pop_back();
      if (out.size() >= kMaxBasesPerVertex) return;
    }
  }

  const Matrix& x_;
  const Vector& y_;
  double tau_;
  Index n_;
  Index p_;
};

void check_rank(const Matrix& x) {
  if (x.rows() < x.cols()) {
    throw Error(ErrorKind::Numerical, "pinball", "design has fewer rows than columns");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    std::ostringstream msg;
    msg << "design is rank deficient (rank " << qr.rank() << " < p = " << x.cols() << ")";
    throw Error(ErrorKind::Numerical, "pinball", msg.str());
  }
}

}  // namespace

PinballFit fit_quantile(const Matrix& x, const Vector& y, double tau, const FitConfig& cfg) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error(ErrorKind::Usage, "pinball", "quantile level outside (0,1)");
  }
  if (x.rows() != y.size()) throw Error(ErrorKind::Data, "pinball", "dimension mismatch");
  check_rank(x);

  const Index n = x.rows();
  PinballFit fit;
  fit.level = tau;

  const InteriorPointResult ip = interior_point(x, y, tau, cfg.solver_tolerance, cfg.max_iterations);
  fit.ip_iterations = ip.iterations;

  VertexSolver solver(x, y, tau);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  {
    const Vector r = (y - x * ip.beta).cwiseAbs();
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return r(a) < r(b); });
  }
  std::vector<Index> basis;
  VertexSolver::Vertex current;
  if (!solver.initial_basis(order, basis) || !solver.make_vertex(basis, current)) {
    throw Error(ErrorKind::Numerical, "pinball", "could not form a nonsingular starting basis");
  }
  fit.objective_trace.push_back(current.objective);

  const int pivot_cap = std::max(1000, 20 * static_cast<int>(n));
  bool optimal = false;
  while (fit.pivots < pivot_cap) {
    const auto edges = solver.edges(current);
    const VertexSolver::Edge* best = nullptr;
    for (const auto& e : edges) {
      if (e.slope < -e.tolerance && (best == nullptr || e.slope < best->slope)) best = &e;
    }
    if (best == nullptr) {
      optimal = true;
      break;
    }
    const Index incoming = solver.line_search(current, *best, false);
    VertexSolver::Vertex next;
    if (incoming < 0 || !solver.make_vertex(solver.replace(*best, incoming), next) ||
        next.objective > current.objective) {
      break;
    }
    current = std::move(next);
    ++fit.pivots;
    fit.objective_trace.push_back(current.objective);
  }

  // Explore the optimal face through zero-slope edges and keep its
  // lexicographically smallest vertex.
  if (optimal) {
    std::set<std::vector<Index>> visited{current.zeros};
    std::vector<VertexSolver::Vertex> queue{current};
    VertexSolver::Vertex chosen = current;
    const double face_tol = 1e-10 * (1.0 + std::abs(current.objective));
    for (std::size_t head = 0; head < queue.size() && visited.size() < kMaxFaceVertices; ++head) {
      const auto edges = solver.edges(queue[head]);
      for (const auto& e : edges) {
        if (std::abs(e.slope) > e.tolerance) continue;
        const Index incoming = solver.line_search(queue[head], e, true);
        VertexSolver::Vertex next;
        if (incoming < 0 || !solver.make_vertex(solver.replace(e, incoming), next)) continue;
        if (next.objective > current.objective + face_tol) continue;
        if (!visited.insert(next.zeros).second) continue;
        if (lexicographically_less(next.beta, chosen.beta)) chosen = next;
        queue.push_back(std::move(next));
      }
    }
    current = std::move(chosen);
  }

  fit.beta_hat = current.beta;
  fit.objective_value = pinball_objective(x, y, current.beta, tau);
  fit.converged = optimal;
  fit.iterations = fit.ip_iterations + fit.pivots;
  return fit;
}

PinballFit fit_quantile(const Dataset& data, double tau, const FitConfig& cfg) {
  return fit_quantile(data.x(), data.y(), tau, cfg);
}

CoefficientSet fit_grid(const Matrix& x, const Vector& y, const QuantileGrid& grid,
                        const FitConfig& cfg) {
  cfg.validate();
  const auto bw = select_bandwidth(static_cast<std::size_t>(x.rows()), grid, cfg.bandwidth);
  const double h = bw.h;
  const std::size_t levels = grid.size();
  if (!(grid[0] - h > 0.0) || !(grid[levels - 1] + h < 1.0)) {
    std::ostringstream msg;
    msg << "bandwidth " << h << " pushes an off-grid level outside (0,1)";
    throw Error(ErrorKind::Usage, "pinball", msg.str());
  }

  const Index p = x.cols();
  const auto cols = static_cast<Index>(levels);
  CoefficientSet out{grid, Matrix(p, cols), std::nullopt, h, Matrix(p, cols), Matrix(p, cols), 0, true};
  auto run = [&](double tau, Matrix& dest, Index col) {
    const PinballFit f = fit_quantile(x, y, tau, cfg);
    dest.col(col) = f.beta_hat;
    out.iterations += f.iterations;
    out.converged = out.converged && f.converged;
  };
  for (std::size_t l = 0; l < levels; ++l) {
    const auto col = static_cast<Index>(l);
    run(grid[l], out.beta, col);
    run(grid[l] - h, out.beta_minus, col);
    run(grid[l] + h, out.beta_plus, col);
  }
  return out;
}

CoefficientSet fit_grid(const Dataset& data, const QuantileGrid& grid, const FitConfig& cfg) {
  return fit_grid(data.x(), data.y(), grid, cfg);
}

}  // namespace effqr
