#include <wgal/pde.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <memory>
#include <stdexcept>

namespace wgal {

Domain Domain::hypercube(int dim) {
  if (dim < 1) throw std::invalid_argument("domain dimension must be >= 1");
  return Domain(Kind::hypercube, dim, std::vector<double>(dim, 0.5), 0.0);
}

Domain Domain::ball(std::vector<double> center, double radius) {
  if (center.empty()) throw std::invalid_argument("ball center must be non-empty");
  if (!(radius > 0)) throw std::invalid_argument("ball radius must be positive");
  for (double c : center) {
    if (c - radius < 0.0 || c + radius > 1.0) {
      throw std::invalid_argument("ball closure must lie inside [0,1]^d");
    }
  }
  const int d = static_cast<int>(center.size());
  return Domain(Kind::ball, d, std::move(center), radius);
}

double Domain::volume() const {
  if (kind_ == Kind::hypercube) return 1.0;
  const double d = dim_;
  return std::exp(0.5 * d * std::log(std::numbers::pi) + d * std::log(radius_) -
                  std::lgamma(0.5 * d + 1.0));
}

double Domain::boundary_measure() const {
  if (kind_ == Kind::hypercube) return 2.0 * dim_;
  return dim_ * volume() / radius_;
}

bool Domain::contains_strictly(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) return false;
  if (kind_ == Kind::hypercube) {
    return std::all_of(x.begin(), x.end(), [](double v) { return v > 0.0 && v < 1.0; });
  }
  double r2 = 0.0;
  for (int i = 0; i < dim_; ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
  return r2 < radius_ * radius_;
}

bool Domain::on_boundary(std::span<const double> y, double tol) const {
  if (static_cast<int>(y.size()) != dim_) return false;
  if (kind_ == Kind::hypercube) {
    int on_face = 0;
    for (double v : y) {
      if (v < 0.0 || v > 1.0) return false;
      if (v == 0.0 || v == 1.0) ++on_face;
    }
    return on_face >= 1;
  }
  double r2 = 0.0;
  for (int i = 0; i < dim_; ++i) r2 += (y[i] - center_[i]) * (y[i] - center_[i]);
  return std::fabs(std::sqrt(r2) - radius_) <= tol;
}

namespace {

void unit_direction(Rng& rng, std::span<double> out) {
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& v : out) {
      v = rng.normal();
      n2 += v * v;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : out) v *= inv;
}

}  // namespace

PointSet sample_interior(const Domain& domain, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_interior needs N >= 1");
  const int d = domain.dim();
  PointSet ps{d, std::vector<double>(n * d)};
  Rng rng(seed);
  std::vector<double> dir(d);
  for (std::size_t k = 0; k < n; ++k) {
    std::span<double> x(ps.coords.data() + k * d, d);
    if (domain.kind() == Domain::Kind::hypercube) {
      for (double& v : x) v = rng.uniform_open();
    } else {
      do {
        unit_direction(rng, dir);
        const double rho = domain.radius() * std::pow(rng.uniform_open(), 1.0 / d);
        for (int i = 0; i < d; ++i) x[i] = domain.center()[i] + rho * dir[i];
      } while (!domain.contains_strictly(x));
    }
  }
  return ps;
}

BoundarySample sample_boundary(const Domain& domain, std::size_t m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_boundary needs M >= 1");
  const int d = domain.dim();
  BoundarySample out{{d, std::vector<double>(m * d)}, {d, std::vector<double>(m * d, 0.0)}};
  Rng rng(seed);
  for (std::size_t k = 0; k < m; ++k) {
    double* y = out.points.coords.data() + k * d;
    double* nrm = out.normals.coords.data() + k * d;
    if (domain.kind() == Domain::Kind::hypercube) {
      const auto face = static_cast<int>(rng.below(2 * static_cast<std::uint64_t>(d)));
      const int axis = face / 2;
      const bool upper = face % 2 == 1;
      for (int i = 0; i < d; ++i) y[i] = rng.uniform_open();
      y[axis] = upper ? 1.0 : 0.0;
      nrm[axis] = upper ? 1.0 : -1.0;
    } else {
      unit_direction(rng, std::span<double>(nrm, d));
      for (int i = 0; i < d; ++i) y[i] = domain.center()[i] + domain.radius() * nrm[i];
    }
  }
  return out;
}

EmpiricalBatch sample_batch(const Domain& domain, std::size_t n, std::size_t m,
                            std::uint64_t seed) {
  EmpiricalBatch batch;
  batch.interior = sample_interior(domain, n, derive_seed(seed, 1));
  BoundarySample bs = sample_boundary(domain, m, derive_seed(seed, 2));
  batch.boundary = std::move(bs.points);
  batch.normals = std::move(bs.normals);
  batch.seed = seed;
  return batch;
}

FieldEvaluator expr_field(const Expr& e) {
  auto g = std::make_shared<ExprGradient>(e);
  return [g](std::span<const double> x) {
    DualEval out;
    out.value = g->value.eval(x);
    out.gradient.reserve(g->partials.size());
    for (const auto& p : g->partials) out.gradient.push_back(p.eval(x));
    return out;
  };
}

FieldEvaluator network_field(const NetworkParams& net) {
  auto copy = std::make_shared<NetworkParams>(net);
  return [copy](std::span<const double> x) { return forward_dual(*copy, x); };
}

BoundaryData BoundaryData::zero(int dim) {
  BoundaryData g;
  g.dim_ = dim;
  return g;
}

BoundaryData BoundaryData::from_expr(Expr e) {
  BoundaryData g;
  g.dim_ = e.dimension();
  if (e.is_constant(0.0)) return g;
  g.kind_ = Kind::expr;
  g.exprs_.push_back(std::move(e));
  return g;
}

BoundaryData BoundaryData::manufactured(const Expr& u, std::vector<Expr> a, double alpha,
                                        double beta) {
  const int d = u.dimension();
  if (static_cast<int>(a.size()) != d * d) throw std::invalid_argument("a must be d x d");
  BoundaryData g;
  g.kind_ = Kind::manufactured;
  g.dim_ = d;
  g.alpha_ = alpha;
  g.beta_ = beta;
  g.exprs_.push_back(u);
  for (int i = 1; i <= d; ++i) g.exprs_.push_back(u.diff(i));
  for (auto& e : a) g.exprs_.push_back(std::move(e));
  return g;
}

double BoundaryData::eval(std::span<const double> y, std::span<const double> normal) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::expr:
      return exprs_[0].eval(y);
    case Kind::manufactured: {
      const int d = dim_;
      double flux = 0.0;
      for (int i = 0; i < d; ++i) {
        const double du = exprs_[1 + i].eval(y);
        for (int j = 0; j < d; ++j) {
          flux += exprs_[1 + d + i * d + j].eval(y) * du * normal[j];
        }
      }
      return alpha_ * exprs_[0].eval(y) + beta_ * flux;
    }
  }
  return 0.0;
}

std::string BoundaryData::describe() const {
  switch (kind_) {
    case Kind::zero: return "0";
    case Kind::expr: return exprs_[0].to_string();
    case Kind::manufactured: return "manufactured Robin trace of " + exprs_[0].to_string();
  }
  return "?";
}

std::string to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::robin: return "robin";
    case BoundaryKind::neumann: return "neumann";
    case BoundaryKind::dirichlet_penalty: return "dirichlet";
  }
  return "?";
}

BoundaryKind boundary_kind_from_string(const std::string& s) {
  if (s == "robin") return BoundaryKind::robin;
  if (s == "neumann") return BoundaryKind::neumann;
  if (s == "dirichlet" || s == "dirichlet_penalty") return BoundaryKind::dirichlet_penalty;
  throw std::invalid_argument("unknown bc_kind '" + s + "'");
}

void EllipticProblem::validate() const {
  const int d = dim();
  if (static_cast<int>(a.size()) != d * d) throw std::invalid_argument("a must have d*d entries");
  if (static_cast<int>(b.size()) != d) throw std::invalid_argument("b must have d entries");
  auto check = [d](const Expr& e, const char* what) {
    if (e.dimension() != d) {
      throw std::invalid_argument(std::string(what) + " has the wrong dimension");
    }
  };
  for (const auto& e : a) check(e, "a_ij");
  for (const auto& e : b) check(e, "b_i");
  check(c, "c");
  check(f, "f");
  if (beta == 0.0 || !std::isfinite(beta)) throw std::invalid_argument("beta must be nonzero");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
}

namespace {

bool sampled_symmetric(const Domain& domain, const std::vector<Expr>& a) {
  const int d = domain.dim();
  const PointSet pts = sample_interior(domain, 16, 0x5eed);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        const double aij = a[i * d + j].eval(pts[k]);
        const double aji = a[j * d + i].eval(pts[k]);
        if (std::fabs(aij - aji) > 1e-12 * (1.0 + std::fabs(aij))) return false;
      }
    }
  }
  return true;
}

}  // namespace

EllipticProblem make_problem(const Domain& domain, std::vector<Expr> a, std::vector<Expr> b,
                             Expr c, Expr f, BoundaryData g, double alpha, double beta,
                             BoundaryKind kind) {
  if (kind == BoundaryKind::neumann) alpha = 0.0;
  if (kind == BoundaryKind::dirichlet_penalty) {
    alpha = 1.0;
    g = BoundaryData::zero(domain.dim());
  }
  EllipticProblem p{domain,       std::move(a), std::move(b), std::move(c), std::move(f),
                    std::move(g), alpha,        beta,         kind,         std::nullopt,
                    true};
  p.validate();
  p.a_symmetric = sampled_symmetric(domain, p.a);
  return p;
}

EllipticProblem manufactured_problem(const Expr& u, std::vector<Expr> a, std::vector<Expr> b,
                                     Expr c, double alpha, double beta, const Domain& domain,
                                     BoundaryKind kind) {
  const int d = domain.dim();
  if (u.dimension() != d) throw std::invalid_argument("u_exact has the wrong dimension");
  if (static_cast<int>(a.size()) != d * d || static_cast<int>(b.size()) != d) {
    throw std::invalid_argument("coefficient shapes do not match the dimension");
  }
  std::vector<Expr> du;
  for (int i = 1; i <= d; ++i) du.push_back(u.diff(i));

  Expr f = c * u;
  for (int i = 0; i < d; ++i) {
    f = f + b[i] * du[i];
    for (int j = 0; j < d; ++j) {
      f = f - (a[i * d + j] * du[i]).diff(j + 1);
    }
  }

  if (kind == BoundaryKind::neumann) alpha = 0.0;
  if (kind == BoundaryKind::dirichlet_penalty) alpha = 1.0;
  BoundaryData g = kind == BoundaryKind::dirichlet_penalty
                       ? BoundaryData::zero(d)
                       : BoundaryData::manufactured(u, a, alpha, beta);
  EllipticProblem p = make_problem(domain, std::move(a), std::move(b), std::move(c), std::move(f),
                                   std::move(g), alpha, beta, kind);
  p.u_exact = u;
  return p;
}

CoercivityReport check_coercivity(const EllipticProblem& problem, std::size_t probes,
                                  std::uint64_t seed) {
  if (probes < 1) throw std::invalid_argument("check_coercivity needs at least one probe");
  const int d = problem.dim();
  const PointSet pts = sample_interior(problem.domain, probes, derive_seed(seed, 11));
  const BoundarySample bpts = sample_boundary(problem.domain, probes, derive_seed(seed, 12));

  CoercivityReport r;
  r.probes = probes;
  r.lambda_min = std::numeric_limits<double>::infinity();
  r.lambda_max = -std::numeric_limits<double>::infinity();
  r.c_min = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd m(d, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto x = pts[k];
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double v = problem.a[i * d + j].eval(x);
        m(i, j) = v;
        r.a_sup = std::max(r.a_sup, std::fabs(v));
      }
    }
    // The quadratic form only sees the symmetric part.
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    solver.compute(sym, Eigen::EigenvaluesOnly);
    r.lambda_min = std::min(r.lambda_min, solver.eigenvalues()(0));
    r.lambda_max = std::max(r.lambda_max, solver.eigenvalues()(d - 1));
    for (const auto& bi : problem.b) r.b_sup = std::max(r.b_sup, std::fabs(bi.eval(x)));
    const double c = problem.c.eval(x);
    r.c_min = std::min(r.c_min, c);
    r.c_sup = std::max(r.c_sup, std::fabs(c));
    // Data that overflows somewhere gets an infinite sup; training reports where.
    try {
      r.f_sup = std::max(r.f_sup, std::fabs(problem.f.eval(x)));
    } catch (const EvalError&) {
      r.f_sup = std::numeric_limits<double>::infinity();
    }
    try {
      r.g_sup = std::max(r.g_sup, std::fabs(problem.g.eval(bpts.points[k], bpts.normals[k])));
    } catch (const EvalError&) {
      r.g_sup = std::numeric_limits<double>::infinity();
    }
  }
  r.condition = 4.0 * r.lambda_min * r.c_min - d * r.b_sup * r.b_sup;
  r.holds = r.condition > 0.0 && r.lambda_min > 0.0;
  return r;
}

}  // namespace wgal
