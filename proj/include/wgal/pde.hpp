#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <wgal/expr.hpp>
#include <wgal/network.hpp>

namespace wgal {

/// Unit hypercube [0,1]^d or a ball whose closure lies in [0,1]^d. Both have
/// closed-form measures and exact uniform samplers.
class Domain {
 public:
  enum class Kind { hypercube, ball };

  static Domain hypercube(int dim);
  static Domain ball(std::vector<double> center, double radius);

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  const std::vector<double>& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

  double volume() const;            // |Omega|
  double boundary_measure() const;  // |dOmega|

  bool contains_strictly(std::span<const double> x) const;
  bool on_boundary(std::span<const double> y, double tol = 1e-12) const;

 private:
  Domain(Kind k, int d, std::vector<double> c, double r)
      : kind_(k), dim_(d), center_(std::move(c)), radius_(r) {}
  Kind kind_;
  int dim_;
  std::vector<double> center_;
  double radius_ = 0.0;
};

/// Row-major list of points in R^dim.
struct PointSet {
  int dim = 1;
  std::vector<double> coords;

  std::size_t size() const noexcept { return coords.size() / dim; }
  std::span<const double> operator[](std::size_t k) const {
    return std::span<const double>(coords).subspan(k * dim, dim);
  }
};

struct BoundarySample {
  PointSet points;
  PointSet normals;  // unit outward normals
};

struct EmpiricalBatch {
  PointSet interior;
  PointSet boundary;
  PointSet normals;
  std::uint64_t seed = 0;
};

PointSet sample_interior(const Domain& domain, std::size_t n, std::uint64_t seed);
BoundarySample sample_boundary(const Domain& domain, std::size_t m, std::uint64_t seed);
/// Interior and boundary draws use independent child streams of `seed`.
EmpiricalBatch sample_batch(const Domain& domain, std::size_t n, std::size_t m,
                            std::uint64_t seed);

/// Value and spatial gradient of a scalar field.
using FieldEvaluator = std::function<DualEval(std::span<const double>)>;

FieldEvaluator expr_field(const Expr& e);
FieldEvaluator network_field(const NetworkParams& net);

/// Boundary datum g(y, n). The manufactured variant needs the outward normal
/// (g = alpha u + beta sum_ij a_ij d_i u n_j), so g is an evaluator, not an
/// expression.
class BoundaryData {
 public:
  static BoundaryData zero(int dim);
  static BoundaryData from_expr(Expr g);
  static BoundaryData manufactured(const Expr& u, std::vector<Expr> a, double alpha, double beta);

  double eval(std::span<const double> y, std::span<const double> normal) const;
  bool is_zero() const noexcept { return kind_ == Kind::zero; }
  std::string describe() const;

 private:
  enum class Kind { zero, expr, manufactured };
  BoundaryData() = default;
  Kind kind_ = Kind::zero;
  int dim_ = 1;
  std::vector<Expr> exprs_;  // expr: {g}; manufactured: {u, du_1..du_d, a_11..a_dd}
  double alpha_ = 0.0;
  double beta_ = 1.0;
};

enum class BoundaryKind { robin, neumann, dirichlet_penalty };

std::string to_string(BoundaryKind k);
BoundaryKind boundary_kind_from_string(const std::string& s);

/// -sum_ij d_j(a_ij d_i u) + sum_i b_i d_i u + c u = f in Omega,
/// alpha u + beta sum_ij a_ij d_i u n_j = g on dOmega.
struct EllipticProblem {
  Domain domain;
  std::vector<Expr> a;  // d*d, a_ij at (i-1)*d + (j-1)
  std::vector<Expr> b;  // d
  Expr c;
  Expr f;
  BoundaryData g;
  double alpha = 0.0;
  double beta = 1.0;
  BoundaryKind kind = BoundaryKind::robin;
  std::optional<Expr> u_exact;
  bool a_symmetric = true;

  int dim() const noexcept { return domain.dim(); }
  const Expr& a_at(int i, int j) const { return a.at((i - 1) * dim() + (j - 1)); }
  void validate() const;
};

/// Builds a problem from explicit coefficient, source and boundary data.
/// Neumann forces alpha = 0; dirichlet_penalty forces alpha = 1, g = 0.
EllipticProblem make_problem(const Domain& domain, std::vector<Expr> a, std::vector<Expr> b,
                             Expr c, Expr f, BoundaryData g, double alpha, double beta,
                             BoundaryKind kind);

/// Builds f symbolically from `u_exact` and g pointwise from the Robin
/// operator, so `u_exact` solves the Robin problem exactly. For
/// dirichlet_penalty, alpha = 1 and g = 0 so the exact solution of the
/// returned problem is the penalized u_R(beta) approximating `u_exact`.
EllipticProblem manufactured_problem(const Expr& u_exact, std::vector<Expr> a, std::vector<Expr> b,
                                     Expr c, double alpha, double beta, const Domain& domain,
                                     BoundaryKind kind = BoundaryKind::robin);

/// Sampled ellipticity and coercivity check. Also records the coefficient
/// sup-norms the statistical-error constants are instantiated with.
struct CoercivityReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double c_min = 0.0;
  double b_sup = 0.0;
  double condition = 0.0;  // 4 lambda c_min - d max_i |b_i|^2
  bool holds = false;
  double a_sup = 0.0;
  double c_sup = 0.0;
  double f_sup = 0.0;
  double g_sup = 0.0;
  std::size_t probes = 0;
};

CoercivityReport check_coercivity(const EllipticProblem& problem, std::size_t probes,
                                  std::uint64_t seed = 0);

}  // namespace wgal
