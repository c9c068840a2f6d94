#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include <wgal/expr.hpp>
#include <wgal/pde.hpp>

namespace wgal {

/// Nodes x_j = j h, j = 0..n, h = 1/n.
struct Grid1D {
  std::size_t n = 0;
  double h = 0.0;
  std::vector<double> values;  // n + 1

  double x(std::size_t j) const { return static_cast<double>(j) * h; }
};

/// Nodes (i h, j h), i, j = 0..n, stored row-major with i fastest. Boundary
/// nodes are included and carry the Dirichlet value 0.
struct Grid2D {
  std::size_t n = 0;
  double h = 0.0;
  std::vector<double> values;  // (n + 1)^2

  double& at(std::size_t i, std::size_t j) { return values[j * (n + 1) + i]; }
  double at(std::size_t i, std::size_t j) const { return values[j * (n + 1) + i]; }
};

enum class FdBoundaryKind { robin, dirichlet };

struct FdBoundary {
  FdBoundaryKind kind = FdBoundaryKind::robin;
  double left = 0.0;   // Dirichlet values
  double right = 0.0;

  static FdBoundary robin() { return {}; }
  static FdBoundary dirichlet(double left = 0.0, double right = 0.0) {
    return {FdBoundaryKind::dirichlet, left, right};
  }
};

/// Conservative second-order scheme for -(a u')' + b u' + c u = f on [0,1]
/// with the problem's Robin condition (half-cell balance at the ends) or
/// Dirichlet values. Solved by the Thomas algorithm without pivoting.
Grid1D fd_solve_1d(const EllipticProblem& problem, std::size_t n,
                   FdBoundary bc = FdBoundary::robin());

/// -Laplace(u) + c u = f on the unit square, u = 0 on the boundary.
/// Five-point stencil, conjugate gradients to relative residual 1e-10.
Grid2D fd_solve_poisson_2d(const Expr& f, double c, std::size_t n);

/// Trapezoid L2 plus forward-difference seminorm of gA - gB.
double grid_h1_error(const Grid1D& a, const Grid1D& b);
double grid_h1_error(const Grid1D& a, const FieldEvaluator& b);
double grid_h1_error(const Grid2D& a, const Grid2D& b);
double grid_h1_error(const Grid2D& a, const FieldEvaluator& b);

double grid_max_error(const Grid1D& a, const Expr& exact);
double grid_max_error(const Grid2D& a, const Expr& exact);

void write_grid_csv(std::ostream& os, const Grid1D& g);
void write_grid_csv(std::ostream& os, const Grid2D& g);

struct PenaltyStudyResult {
  std::vector<double> betas;
  std::vector<double> errors;  // discrete H1 distance of u_R(beta) to u_D
  double slope = 0.0;          // least-squares log-log slope
  double c_fit = 0.0;          // error(beta_max) / sqrt(beta_max)
  bool monotone = false;       // errors strictly decrease as beta decreases
  bool within_rate = false;    // error(beta) <= c_fit sqrt(beta) for every beta
};

/// Compares the FD Robin solution with alpha = 1, g = 0 against the FD
/// Dirichlet solution for each beta. `problem` supplies a, b, c, f and must be
/// one-dimensional; its alpha, beta and g are ignored.
PenaltyStudyResult penalty_study(const EllipticProblem& problem, std::vector<double> betas,
                                 std::size_t n);

}  // namespace wgal
