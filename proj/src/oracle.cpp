#include <wgal/oracle.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace wgal {

namespace {

struct Tridiagonal {
  std::vector<double> lower, diag, upper, rhs;  // lower[0], upper[n-1] unused

  explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0) {}

  std::vector<double> solve() const {
    const std::size_t n = diag.size();
    std::vector<double> cp(n), dp(n), x(n);
    double max_diag = 0.0;
    double min_pivot = std::numeric_limits<double>::infinity();
    for (double v : diag) max_diag = std::max(max_diag, std::fabs(v));
    double pivot = diag[0];
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) pivot = diag[i] - lower[i] * cp[i - 1];
      min_pivot = std::min(min_pivot, std::fabs(pivot));
      if (!(std::fabs(pivot) > 1e-14 * max_diag)) {
        throw SolverError("tridiagonal system is singular to working precision",
                          min_pivot > 0 ? max_diag / min_pivot
                                        : std::numeric_limits<double>::infinity());
      }
      cp[i] = upper[i] / pivot;
      dp[i] = (rhs[i] - (i > 0 ? lower[i] * dp[i - 1] : 0.0)) / pivot;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];

    // Residual of the h^2-scaled rows, relative to the row scale.
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = diag[i] * x[i] - rhs[i];
      if (i > 0) r += lower[i] * x[i - 1];
      if (i + 1 < n) r += upper[i] * x[i + 1];
      res = std::max(res, std::fabs(r));
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(rhs[i]));
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(diag[i] * x[i]));
    if (res > 1e-10 * std::max(1.0, scale)) {
      throw SolverError("tridiagonal residual " + std::to_string(res) + " exceeds tolerance",
                        max_diag / min_pivot);
    }
    return x;
  }
};

double eval1(const Expr& e, double x) { return e.eval(std::span<const double>(&x, 1)); }

}  // namespace

Grid1D fd_solve_1d(const EllipticProblem& p, std::size_t n, FdBoundary bc) {
  if (p.dim() != 1) throw std::invalid_argument("fd_solve_1d needs a one-dimensional problem");
  if (n < 2) throw std::invalid_argument("fd_solve_1d needs n >= 2");
  if (bc.kind == FdBoundaryKind::robin && p.beta == 0.0) {
    throw std::invalid_argument("Robin discretization needs beta != 0");
  }
  const double h = 1.0 / static_cast<double>(n);
  const double h2 = h * h;
  const Expr& a = p.a[0];
  const Expr& b = p.b[0];
  Tridiagonal sys(n + 1);
  std::vector<double> xs(n + 1);
  for (std::size_t j = 0; j <= n; ++j) xs[j] = static_cast<double>(j) * h;

  // Rows scaled by h^2 so entries are O(1).
  for (std::size_t j = 1; j < n; ++j) {
    const double am = eval1(a, xs[j] - 0.5 * h);
    const double ap = eval1(a, xs[j] + 0.5 * h);
    const double bj = eval1(b, xs[j]);
    sys.lower[j] = -am - 0.5 * h * bj;
    sys.upper[j] = -ap + 0.5 * h * bj;
    sys.diag[j] = am + ap + h2 * eval1(p.c, xs[j]);
    sys.rhs[j] = h2 * eval1(p.f, xs[j]);
  }

  if (bc.kind == FdBoundaryKind::dirichlet) {
    sys.diag[0] = 1.0;
    sys.rhs[0] = bc.left;
    sys.diag[n] = 1.0;
    sys.rhs[n] = bc.right;
  } else {
    // Half-cell balance: the end flux a u' is eliminated with the Robin
    // relation, which keeps the scheme second order.
    const double alpha = p.alpha;
    const double beta = p.beta;
    const double nl = -1.0;
    const double nr = 1.0;
    const double y0 = 0.0;
    const double y1 = 1.0;
    const double g0 = p.g.eval(std::span<const double>(&y0, 1), std::span<const double>(&nl, 1));
    const double g1 = p.g.eval(std::span<const double>(&y1, 1), std::span<const double>(&nr, 1));
    {
      const double ah = eval1(a, 0.5 * h);
      const double a0 = eval1(a, 0.0);
      const double b0 = eval1(b, 0.0);
      const double c0 = eval1(p.c, 0.0);
      // (a u')(0) = (alpha u0 - g0) / beta
      sys.diag[0] = 2.0 * ah + 2.0 * h * alpha / beta + h2 * (b0 * alpha / (beta * a0) + c0);
      sys.upper[0] = -2.0 * ah;
      sys.rhs[0] = h2 * eval1(p.f, 0.0) + 2.0 * h * g0 / beta + h2 * b0 * g0 / (beta * a0);
    }
    {
      const double ah = eval1(a, 1.0 - 0.5 * h);
      const double a1 = eval1(a, 1.0);
      const double b1 = eval1(b, 1.0);
      const double c1 = eval1(p.c, 1.0);
      // (a u')(1) = (g1 - alpha un) / beta
      sys.diag[n] = 2.0 * ah + 2.0 * h * alpha / beta + h2 * (-b1 * alpha / (beta * a1) + c1);
      sys.lower[n] = -2.0 * ah;
      sys.rhs[n] = h2 * eval1(p.f, 1.0) + 2.0 * h * g1 / beta - h2 * b1 * g1 / (beta * a1);
    }
  }
  Grid1D g;
  g.n = n;
  g.h = h;
  g.values = sys.solve();
  return g;
}

Grid2D fd_solve_poisson_2d(const Expr& f, double c, std::size_t n) {
  if (f.dimension() != 2) throw std::invalid_argument("fd_solve_poisson_2d needs f(x1, x2)");
  if (n < 2) throw std::invalid_argument("fd_solve_poisson_2d needs n >= 2");
  const double h = 1.0 / static_cast<double>(n);
  const std::size_t m = n - 1;  // interior nodes per side
  const std::size_t size = m * m;
  std::vector<double> rhs(size);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      const double x[2] = {static_cast<double>(i + 1) * h, static_cast<double>(j + 1) * h};
      rhs[j * m + i] = h * h * f.eval(x);
    }
  }
  const double diag = 4.0 + h * h * c;
  auto apply = [&](const std::vector<double>& u, std::vector<double>& out) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t k = j * m + i;
        double s = diag * u[k];
        if (i > 0) s -= u[k - 1];
        if (i + 1 < m) s -= u[k + 1];
        if (j > 0) s -= u[k - m];
        if (j + 1 < m) s -= u[k + m];
        out[k] = s;
      }
    }
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> t(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) t[k] = a[k] * b[k];
    return pairwise_sum(t);
  };

  std::vector<double> u(size, 0.0);
  std::vector<double> r = rhs;
  std::vector<double> pdir = r;
  std::vector<double> ap(size);
  const double rhs_norm = std::sqrt(dot(rhs, rhs));
  double rr = rhs_norm * rhs_norm;
  const std::size_t max_iter = 10 * n * n;
  std::size_t it = 0;
  while (std::sqrt(rr) > 1e-10 * rhs_norm) {
    if (++it > max_iter) {
      throw SolverError("conjugate gradients did not converge in " + std::to_string(max_iter) +
                        " iterations");
    }
    apply(pdir, ap);
    const double pap = dot(pdir, ap);
    if (!(pap > 0.0)) throw SolverError("operator is not positive definite");
    const double step = rr / pap;
    for (std::size_t k = 0; k < size; ++k) {
      u[k] += step * pdir[k];
      r[k] -= step * ap[k];
    }
    const double rr_new = dot(r, r);
    const double ratio = rr_new / rr;
    rr = rr_new;
    for (std::size_t k = 0; k < size; ++k) pdir[k] = r[k] + ratio * pdir[k];
  }

  Grid2D g;
  g.n = n;
  g.h = h;
  g.values.assign((n + 1) * (n + 1), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) g.at(i + 1, j + 1) = u[j * m + i];
  }
  return g;
}

namespace {

double h1_from_diff_1d(const std::vector<double>& e, double h) {
  const std::size_t n = e.size() - 1;
  std::vector<double> l2(n + 1);
  std::vector<double> semi(n);
  for (std::size_t j = 0; j <= n; ++j) l2[j] = (j == 0 || j == n ? 0.5 : 1.0) * e[j] * e[j];
  for (std::size_t j = 0; j < n; ++j) {
    const double d = (e[j + 1] - e[j]) / h;
    semi[j] = d * d;
  }
  return std::sqrt(h * pairwise_sum(l2) + h * pairwise_sum(semi));
}

double h1_from_diff_2d(const std::vector<double>& e, std::size_t n, double h) {
  auto at = [&](std::size_t i, std::size_t j) { return e[j * (n + 1) + i]; };
  auto w = [&](std::size_t i) { return i == 0 || i == n ? 0.5 : 1.0; };
  std::vector<double> l2;
  std::vector<double> semi;
  l2.reserve((n + 1) * (n + 1));
  semi.reserve(2 * n * (n + 1));
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) l2.push_back(w(i) * w(j) * at(i, j) * at(i, j));
  }
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = (at(i + 1, j) - at(i, j)) / h;
      semi.push_back(w(j) * dx * dx);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      const double dy = (at(i, j + 1) - at(i, j)) / h;
      semi.push_back(w(i) * dy * dy);
    }
  }
  return std::sqrt(h * h * pairwise_sum(l2) + h * h * pairwise_sum(semi));
}

}  // namespace

double grid_h1_error(const Grid1D& a, const Grid1D& b) {
  if (a.n != b.n || a.values.size() != b.values.size()) {
    throw std::invalid_argument("grid shapes do not match");
  }
  std::vector<double> e(a.values.size());
  for (std::size_t j = 0; j < e.size(); ++j) e[j] = a.values[j] - b.values[j];
  return h1_from_diff_1d(e, a.h);
}

double grid_h1_error(const Grid1D& a, const FieldEvaluator& b) {
  std::vector<double> e(a.values.size());
  for (std::size_t j = 0; j < e.size(); ++j) {
    const double x = a.x(j);
    e[j] = a.values[j] - b(std::span<const double>(&x, 1)).value;
  }
  return h1_from_diff_1d(e, a.h);
}

double grid_h1_error(const Grid2D& a, const Grid2D& b) {
  if (a.n != b.n || a.values.size() != b.values.size()) {
    throw std::invalid_argument("grid shapes do not match");
  }
  std::vector<double> e(a.values.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = a.values[k] - b.values[k];
  return h1_from_diff_2d(e, a.n, a.h);
}

double grid_h1_error(const Grid2D& a, const FieldEvaluator& b) {
  std::vector<double> e(a.values.size());
  for (std::size_t j = 0; j <= a.n; ++j) {
    for (std::size_t i = 0; i <= a.n; ++i) {
      const double x[2] = {static_cast<double>(i) * a.h, static_cast<double>(j) * a.h};
      e[j * (a.n + 1) + i] = a.at(i, j) - b(x).value;
    }
  }
  return h1_from_diff_2d(e, a.n, a.h);
}

double grid_max_error(const Grid1D& a, const Expr& exact) {
  double m = 0.0;
  for (std::size_t j = 0; j <= a.n; ++j) m = std::max(m, std::fabs(a.values[j] - eval1(exact, a.x(j))));
  return m;
}

double grid_max_error(const Grid2D& a, const Expr& exact) {
  double m = 0.0;
  for (std::size_t j = 0; j <= a.n; ++j) {
    for (std::size_t i = 0; i <= a.n; ++i) {
      const double x[2] = {static_cast<double>(i) * a.h, static_cast<double>(j) * a.h};
      m = std::max(m, std::fabs(a.at(i, j) - exact.eval(x)));
    }
  }
  return m;
}

void write_grid_csv(std::ostream& os, const Grid1D& g) {
  os << "x,u\n" << std::setprecision(17);
  for (std::size_t j = 0; j <= g.n; ++j) os << g.x(j) << ',' << g.values[j] << '\n';
}

void write_grid_csv(std::ostream& os, const Grid2D& g) {
  os << "x1,x2,u\n" << std::setprecision(17);
  for (std::size_t j = 0; j <= g.n; ++j) {
    for (std::size_t i = 0; i <= g.n; ++i) {
      os << static_cast<double>(i) * g.h << ',' << static_cast<double>(j) * g.h << ','
         << g.at(i, j) << '\n';
    }
  }
}

PenaltyStudyResult penalty_study(const EllipticProblem& problem, std::vector<double> betas,
                                 std::size_t n) {
  if (problem.dim() != 1) throw std::invalid_argument("penalty_study needs a 1D problem");
  if (betas.size() < 2) throw std::invalid_argument("penalty_study needs at least two betas");
  for (double b : betas) {
    if (!(b > 0.0)) throw std::invalid_argument("penalty_study betas must be positive");
  }
  std::sort(betas.begin(), betas.end(), std::greater<>());

  const Grid1D u_d = fd_solve_1d(problem, n, FdBoundary::dirichlet());
  PenaltyStudyResult res;
  res.betas = betas;
  for (double beta : betas) {
    EllipticProblem robin = problem;
    robin.alpha = 1.0;
    robin.beta = beta;
    robin.g = BoundaryData::zero(1);
    robin.kind = BoundaryKind::dirichlet_penalty;
    res.errors.push_back(grid_h1_error(fd_solve_1d(robin, n, FdBoundary::robin()), u_d));
  }
  res.slope = loglog_slope(res.betas, res.errors);
  res.c_fit = res.errors.front() / std::sqrt(res.betas.front());
  res.monotone = true;
  res.within_rate = true;
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (k > 0 && !(res.errors[k] < res.errors[k - 1])) res.monotone = false;
    // Relative slack covers rounding at the anchor point itself.
    if (res.errors[k] > res.c_fit * std::sqrt(betas[k]) * (1.0 + 1e-12)) res.within_rate = false;
  }
  return res;
}

}  // namespace wgal
