#include <doctest.h>

#include <cmath>
#include <vector>
#include <wgal/loss.hpp>
#include <wgal/numeric.hpp>

using namespace wgal;

namespace {

Expr k(double v, int d) { return Expr::constant(v, d); }

NetworkParams affine1d(double a, double b) {
  NetworkParams n(NetworkArch{{1, 1}, Activation::tanh(), 5.0});
  n.weights(1)[0] = a;
  n.bias(1)[0] = b;
  return n;
}

EllipticProblem poisson_like(int d, double alpha, double beta) {
  std::vector<Expr> a;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a.push_back(k(i == j ? 1.0 : 0.0, d));
  std::vector<Expr> b(d, k(0, d));
  return make_problem(Domain::hypercube(d), a, b, k(1, d), k(0, d), BoundaryData::zero(d), alpha,
                      beta, BoundaryKind::robin);
}

// Variable-coefficient problem exercising every term of the loss.
EllipticProblem rich_problem(double beta) {
  const Expr off = parse_expr("0.2*x1*x2", 2);
  std::vector<Expr> a{parse_expr("1+x1^2", 2), off, off, parse_expr("2+sin(x2)", 2)};
  std::vector<Expr> b{parse_expr("0.3*x2", 2), parse_expr("-0.4", 2)};
  return make_problem(Domain::hypercube(2), a, b, parse_expr("1.5+x1", 2),
                      parse_expr("cos(x1)*x2", 2), BoundaryData::from_expr(parse_expr("x1-x2", 2)),
                      0.8, beta, BoundaryKind::robin);
}

void scale_last_layer(NetworkParams& v, double s) {
  const int D = v.arch().depth();
  for (double& w : v.weights(D)) w *= s;
  for (double& w : v.bias(D)) w *= s;
}

}  // namespace

TEST_CASE("empirical_loss hand example") {
  const EllipticProblem p = make_problem(Domain::hypercube(1), {k(1, 1)}, {k(0, 1)}, k(0, 1),
                                         k(1, 1), BoundaryData::zero(1), 0.0, 1.0,
                                         BoundaryKind::robin);
  EmpiricalBatch b;
  b.interior = PointSet{1, {0.5}};
  b.boundary = PointSet{1, {0.0, 1.0}};
  b.normals = PointSet{1, {-1.0, 1.0}};
  const LossValue l = empirical_loss(affine1d(2, 0), affine1d(1, 0), p, b);
  CHECK(l.interior == doctest::Approx(1.5));
  CHECK(l.boundary == 0.0);
  CHECK(l.total == doctest::Approx(1.5));
  CHECK(l.n == 1);
  CHECK(l.m == 2);
}

TEST_CASE("boundary term uses alpha, or alpha/2 behind the switch") {
  // u = v = 1 on [0,1], alpha = 2, beta = 0.5, g = 0: boundary = |dO|/(beta M) sum alpha = 8.
  const EllipticProblem p = make_problem(Domain::hypercube(1), {k(1, 1)}, {k(0, 1)}, k(0, 1),
                                         k(0, 1), BoundaryData::zero(1), 2.0, 0.5,
                                         BoundaryKind::robin);
  const EmpiricalBatch b = sample_batch(p.domain, 4, 6, 1);
  const NetworkParams one = affine1d(0, 1);
  CHECK(empirical_loss(one, one, p, b).boundary == doctest::Approx(8.0));
  CHECK(empirical_loss(one, one, p, b, {true}).boundary == doctest::Approx(4.0));
}

TEST_CASE("loss is linear in v and vanishes at v = 0") {
  const EllipticProblem p = rich_problem(0.3);
  const NetworkArch arch{{2, 6, 6, 1}, Activation::tanh(), 3.0};
  const NetworkParams u = init_network(arch, 1, {InitScheme::uniform, 1.0});
  NetworkParams v = init_network(arch, 2, {InitScheme::uniform, 1.0});
  const EmpiricalBatch b = sample_batch(p.domain, 64, 32, 3);

  CHECK(empirical_loss(u, NetworkParams(arch), p, b).total == 0.0);
  const LossGradients g0 = loss_gradients(u, NetworkParams(arch), p, b);
  for (double g : g0.grad_u) CHECK(g == 0.0);

  const double l1 = empirical_loss(u, v, p, b).total;
  scale_last_layer(v, 3.0);
  const double l3 = empirical_loss(u, v, p, b).total;
  CHECK(std::abs(l3 - 3 * l1) <= 1e-12 * std::abs(l3));
}

TEST_CASE("loss gradients match parameter-wise finite differences") {
  const EllipticProblem p = rich_problem(0.3);
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const NetworkArch ua{{2, 1 + static_cast<int>(rng.below(5)), 4, 1}, Activation::tanh(), 2.0};
    const NetworkArch va{{2, 3, 1}, Activation::logistic(), 2.0};
    NetworkParams u = init_network(ua, 10 + trial, {InitScheme::uniform, 1.0});
    NetworkParams v = init_network(va, 20 + trial, {InitScheme::uniform, 1.0});
    const PreparedBatch b = prepare_batch(p, sample_batch(p.domain, 16, 8, 30 + trial));
    const LossGradients g = loss_gradients(u, v, p, b);
    const double h = 1e-5;
    auto check = [&](NetworkParams& net, const std::vector<double>& grad) {
      for (std::size_t j = 0; j < net.size(); ++j) {
        const double t = net.values()[j];
        net.values()[j] = t + h;
        const double fp = empirical_loss(u, v, p, b).total;
        net.values()[j] = t - h;
        const double fm = empirical_loss(u, v, p, b).total;
        net.values()[j] = t;
        const double fd = (fp - fm) / (2 * h);
        CHECK(std::abs(grad[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    };
    check(u, g.grad_u);
    check(v, g.grad_v);

    const LossGradients only_u = loss_gradients(u, v, p, b, {}, GradTarget::u_only);
    CHECK(only_u.grad_v.empty());
    CHECK(only_u.grad_u == g.grad_u);
    CHECK(only_u.value.total == g.value.total);
  }
}

TEST_CASE("doubling beta halves the boundary part of grad_v") {
  const NetworkArch arch{{2, 4, 1}, Activation::tanh(), 2.0};
  const NetworkParams u = init_network(arch, 3, {InitScheme::uniform, 1.0});
  const NetworkParams v = init_network(arch, 4, {InitScheme::uniform, 1.0});
  const EmpiricalBatch b = sample_batch(Domain::hypercube(2), 32, 32, 5);
  const auto g1 = loss_gradients(u, v, rich_problem(0.4), b).grad_v;
  const auto g2 = loss_gradients(u, v, rich_problem(0.8), b).grad_v;
  // Interior-only reference: same data with the boundary term removed.
  EllipticProblem q = rich_problem(0.4);
  q.alpha = 0.0;
  q.g = BoundaryData::zero(2);
  const auto gi = loss_gradients(u, v, q, b).grad_v;
  for (std::size_t j = 0; j < g1.size(); ++j) {
    CHECK((g1[j] - gi[j]) == doctest::Approx(2 * (g2[j] - gi[j])).epsilon(1e-10));
  }
}

TEST_CASE("u = v gives a nonnegative loss for the coercive symmetric problem") {
  const EllipticProblem p = poisson_like(2, 0.7, 0.5);
  const NetworkArch arch{{2, 5, 1}, Activation::tanh(), 3.0};
  for (int s = 0; s < 20; ++s) {
    const NetworkParams u = init_network(arch, 50 + s, {InitScheme::uniform, 2.0});
    const EmpiricalBatch b = sample_batch(p.domain, 17, 9, 70 + s);
    CHECK(empirical_loss(u, u, p, b).total >= 0.0);
  }
}

TEST_CASE("continuous_loss_estimate examples") {
  const EllipticProblem p = rich_problem(0.5);
  const NetworkArch arch{{2, 5, 1}, Activation::tanh(), 2.0};
  const NetworkParams u = init_network(arch, 1, {InitScheme::uniform, 1.0});
  const NetworkParams v = init_network(arch, 2, {InitScheme::uniform, 1.0});
  const LossValue a = continuous_loss_estimate(u, v, p, 128, 99);
  const LossValue b = empirical_loss(u, v, p, sample_batch(p.domain, 128, 128, 99));
  CHECK(a.total == b.total);
  CHECK(continuous_loss_estimate(u, NetworkParams(arch), p, 64, 1).total == 0.0);
}

TEST_CASE("Monte Carlo deviation decays like N^-1/2") {
  const EllipticProblem p = rich_problem(0.5);
  const NetworkArch arch{{2, 4, 1}, Activation::tanh(), 2.0};
  const NetworkParams u = init_network(arch, 7, {InitScheme::uniform, 1.0});
  const NetworkParams v = init_network(arch, 8, {InitScheme::uniform, 1.0});
  const double ref = continuous_loss_estimate(u, v, p, 1000000, 12345).total;
  std::vector<double> ns{100, 1000, 10000}, dev;
  for (double n : ns) {
    double s = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      const auto nn = static_cast<std::size_t>(n);
      s += std::abs(empirical_loss(u, v, p, sample_batch(p.domain, nn, nn, 500 + seed)).total -
                    ref);
    }
    dev.push_back(s / 20);
  }
  const double slope = loglog_slope(ns, dev);
  CHECK(slope >= -0.65);
  CHECK(slope <= -0.35);
}

TEST_CASE("non-finite data aborts with component and sample index") {
  const EllipticProblem p = make_problem(Domain::hypercube(1), {k(1, 1)}, {k(0, 1)},
                                         parse_expr("1/(x1-0.5)", 1), k(0, 1),
                                         BoundaryData::zero(1), 1, 1, BoundaryKind::robin);
  EmpiricalBatch b;
  b.interior = PointSet{1, {0.25, 0.5}};
  b.boundary = PointSet{1, {0.0}};
  b.normals = PointSet{1, {-1.0}};
  const NetworkParams n = affine1d(1, 0);
  try {
    empirical_loss(n, n, p, b);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.component() == "interior");
    CHECK(e.sample_index() == 1);
  }
  NetworkParams bad = affine1d(1, 0);
  bad.values()[0] = std::nan("");
  b.interior = PointSet{1, {0.25}};
  CHECK_THROWS_AS(empirical_loss(bad, n, poisson_like(1, 1, 1), b), NumericalError);
}

TEST_CASE("h1_error examples") {
  const Domain line = Domain::hypercube(1);
  const NetworkArch arch{{1, 4, 1}, Activation::tanh(), 2.0};
  const NetworkParams u = init_network(arch, 3, {InitScheme::uniform, 1.0});
  CHECK(h1_error(u, network_field(u), line, 1000, 1).h1 == 0.0);

  const H1Estimate e = h1_error(NetworkParams(arch), expr_field(parse_expr("x1", 1)), line,
                                100000, 2);
  CHECK(e.l2_sq == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  CHECK(e.semi_sq == doctest::Approx(1.0));
  CHECK(e.h1 == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(0.01));
  CHECK(e.l2_sq_stderr > 0.0);
  CHECK(e.h1 >= e.l2);
  CHECK(e.h1 >= e.semi);

  NetworkParams shifted = u;
  shifted.bias(arch.depth())[0] += 1.0;
  const H1Estimate s = h1_error(u, network_field(shifted), line, 1000, 4);
  CHECK(s.l2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.semi == 0.0);
}

TEST_CASE("h1_norm_gradient matches finite differences") {
  const NetworkArch arch{{2, 4, 3, 1}, Activation::tanh(), 2.0};
  NetworkParams u = init_network(arch, 9, {InitScheme::uniform, 1.0});
  const PointSet pts = sample_interior(Domain::hypercube(2), 50, 3);
  const NormGradient g = h1_norm_gradient(u, pts, 1.0);
  CHECK(g.value == doctest::Approx(h1_norm(u, pts, 1.0).h1));
  const double h = 1e-6;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double t = u.values()[j];
    u.values()[j] = t + h;
    const double fp = h1_norm(u, pts, 1.0).h1;
    u.values()[j] = t - h;
    const double fm = h1_norm(u, pts, 1.0).h1;
    u.values()[j] = t;
    CHECK(g.grad[j] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
  }
}
