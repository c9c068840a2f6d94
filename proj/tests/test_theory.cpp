#include <doctest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <vector>
#include <wgal/theory.hpp>

using namespace wgal;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

FiniteVectorSet random_set(Rng& rng) {
  FiniteVectorSet s;
  s.n = 1 + rng.below(12);
  const std::size_t count = 1 + rng.below(16);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(s.n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    s.vectors.push_back(v);
  }
  return s;
}

Big big_chaining(Big b, Big l, Big n, Big bt, Big nn) {
  using boost::multiprecision::log;
  using boost::multiprecision::sqrt;
  return 4 / sqrt(nn) + 6 * sqrt(n) * b / sqrt(nn) * sqrt(log(2 * l * bt * sqrt(n) * sqrt(nn)));
}

}  // namespace

TEST_CASE("exact_rademacher examples") {
  CHECK(exact_rademacher(FiniteVectorSet{3, {{0, 0, 0}}}) == 0.0);
  CHECK(exact_rademacher(FiniteVectorSet{2, {{1, 1}, {-1, -1}}}) == doctest::Approx(0.5));
  CHECK(exact_rademacher(FiniteVectorSet{1, {{1}}}) == 0.0);
  FiniteVectorSet too_big{21, {std::vector<double>(21, 1.0)}};
  CHECK_THROWS(exact_rademacher(too_big));
  CHECK_THROWS(FiniteVectorSet{2, {{1, 1}, {1}}}.validate());
}

TEST_CASE("massart_bound examples") {
  CHECK(massart_bound(FiniteVectorSet{2, {{0, 0}}}) == 0.0);
  const FiniteVectorSet pm{2, {{1, 1}, {-1, -1}}};
  CHECK(massart_bound(pm) == doctest::Approx(std::sqrt(2.0) * std::sqrt(2 * std::log(2.0)) / 2));
  CHECK(massart_bound(pm) == doctest::Approx(0.8326).epsilon(1e-4));
  CHECK(massart_bound(pm) > exact_rademacher(pm));
  FiniteVectorSet scaled{2, {{2.5, 2.5}, {-2.5, -2.5}}};
  CHECK(massart_bound(scaled) == doctest::Approx(2.5 * massart_bound(pm)).epsilon(1e-14));
}

TEST_CASE("exact Rademacher never exceeds Massart and is sign symmetric") {
  Rng rng(17);
  for (int t = 0; t < 500; ++t) {
    const FiniteVectorSet s = random_set(rng);
    const double r = exact_rademacher(s);
    CHECK(r <= massart_bound(s) + 1e-12);
    FiniteVectorSet flipped = s;
    const std::size_t c = rng.below(s.n);
    for (auto& v : flipped.vectors) v[c] = -v[c];
    CHECK(exact_rademacher(flipped) == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("covering_bound_ball examples and monotonicity") {
  CHECK(covering_bound_ball(1, 1, 1).value() == 2.0);
  CHECK(covering_bound_ball(1, 2, 2 * std::sqrt(2.0)).value() == doctest::Approx(1.0));
  CHECK(covering_bound_ball(2, 1, 1).value() == doctest::Approx(4.0));
  CHECK(covering_bound_ball(1, 2, 0.1).log() > covering_bound_ball(1, 2, 0.2).log());
  CHECK(covering_bound_ball(2, 2, 0.1).log() > covering_bound_ball(1, 2, 0.1).log());
  CHECK(covering_bound_ball(1, 3, 0.1).log() > covering_bound_ball(1, 2, 0.1).log());
  CHECK_THROWS(covering_bound_ball(0, 1, 1));
}

TEST_CASE("chaining_bound examples") {
  // Decreasing over a doubling ladder once applicable.
  double prev = INFINITY;
  for (double n = 1e3; n <= 1e9; n *= 2) {
    const double v = chaining_bound(12.0, 1366.0, 10, 2.0, n).value();
    CHECK(v < prev);
    prev = v;
  }
  // Doubling B_i doubles the second term only.
  const double n = 1e4;
  const double t1 = chaining_bound(12.0, 1366.0, 10, 2.0, n).value() - 4 / std::sqrt(n);
  const double t2 = chaining_bound(24.0, 1366.0, 10, 2.0, n).value() - 4 / std::sqrt(n);
  CHECK(t2 == doctest::Approx(2 * t1).epsilon(1e-13));

  const Big ref = big_chaining(12, 1366, 10, 2, 10000);
  const double got = chaining_bound(12.0, 1366.0, 10, 2.0, 1e4).value();
  CHECK(std::abs(got - ref.convert_to<double>()) <= 1e-12 * ref.convert_to<double>());

  // Log-space overload agrees with the plain one.
  const LogValue lv = chaining_bound(LogValue::from_value(12.0), LogValue::from_value(1366.0),
                                     10, 2.0, 1e4);
  CHECK(lv.value() == doctest::Approx(got).epsilon(1e-13));

  CHECK_THROWS_AS(chaining_bound(0.1, 1366.0, 10, 2.0, 16), BoundNotApplicable);
  CHECK_THROWS_AS(chaining_bound(12.0, 1e-6, 1, 1.0, 4), BoundNotApplicable);
}

TEST_CASE("statistical_error_bound scaling and high-precision value") {
  const NetworkArch arch{{1, 3, 1}, Activation::tanh(), 2.0};
  const double base = statistical_error_bound(arch, 10, 1, 256, 1.0, 1.0).value();
  CHECK(statistical_error_bound(arch, 10, 1, 1024, 1.0, 1.0).value() ==
        doctest::Approx(base / std::sqrt(2.0)).epsilon(1e-13));
  CHECK(statistical_error_bound(arch, 10, 1, 256, 0.5, 1.0).value() ==
        doctest::Approx(2 * base).epsilon(1e-13));

  using boost::multiprecision::pow;
  using boost::multiprecision::sqrt;
  const Big ref = sqrt(Big(2)) * pow(Big(10), Big(5.5)) * pow(Big(2), Big(7.5)) / 4;
  CHECK(std::abs(base - ref.convert_to<double>()) <= 1e-12 * ref.convert_to<double>());

  // Bounds far beyond double range stay finite in log space.
  const NetworkArch huge{{3, 50, 50, 50, 1}, Activation::tanh(), 1e20};
  const LogValue h = statistical_error_bound(huge, 5000, 3, 1e4, 1e-3, 1.0);
  CHECK(h.overflows());
  const Big lref = boost::multiprecision::log(Big(1e20)) * Big(3.5 * 4 + 0.5) +
                   boost::multiprecision::log(Big(5000)) * Big(3.5 * 4 - 1.5) +
                   boost::multiprecision::log(Big(27)) + boost::multiprecision::log(Big(2)) -
                   boost::multiprecision::log(Big(1e-3)) -
                   boost::multiprecision::log(Big(1e4)) / 4;
  CHECK(h.log() == doctest::Approx(lref.convert_to<double>()).epsilon(1e-13));
}

TEST_CASE("class_constants examples") {
  const NetworkArch arch{{1, 3, 1}, Activation::tanh(), 2.0};
  CoefficientNorms one;
  const ClassConstants k = class_constants(arch, 10, one, 2.0);
  CHECK(k.b[4].value() == doctest::Approx(64.0));
  CHECK(k.l[3].value() == doctest::Approx(std::sqrt(10.0) * 2 * 3));
  CHECK(k.l[3].value() == doctest::Approx(18.97).epsilon(1e-3));

  for (int i = 0; i < 6; ++i) {
    double prev_b = 0.0, prev_l = 0.0;
    for (double bt : {1.0, 1.5, 2.0, 4.0, 8.0}) {
      NetworkArch a = arch;
      a.b_theta = bt;
      const ClassConstants c = class_constants(a, 10, one, 2.0);
      CHECK(c.b[i].value() >= 0.0);
      CHECK(c.b[i].value() >= prev_b);
      CHECK(c.l[i].value() >= prev_l);
      prev_b = c.b[i].value();
      prev_l = c.l[i].value();
    }
  }
  CHECK_THROWS(class_constants(NetworkArch{{1, 3, 1}, Activation::relu(1), 2.0}, 10, one, 1.0));
}

TEST_CASE("BoundReport hash depends on lemma and inputs only") {
  BoundReport a;
  a.lemma = "x";
  a.theoretical = LogValue::from_value(2.0);
  a.empirical = 1.0;
  a.inputs = {{"N", 64}};
  a.finalize();
  CHECK(a.ratio == 0.5);
  BoundReport b = a;
  b.empirical = 0.25;
  b.finalize();
  CHECK(b.config_hash == a.config_hash);
  b.inputs["N"] = 128;
  b.finalize();
  CHECK(b.config_hash != a.config_hash);
}

TEST_CASE("lipschitz_probe on small nets") {
  const NetworkArch affine{{2, 1}, Activation::tanh(), 1.0};
  const LipschitzReport a = lipschitz_probe(affine, 2000, 1);
  CHECK(a.violations == 0);
  CHECK(a.value.empirical <= std::sqrt(3.0) + 1e-12);

  const NetworkArch deep{{2, 5, 5, 1}, Activation::tanh(), 2.0};
  const LipschitzReport r = lipschitz_probe(deep, 3000, 2);
  CHECK(r.violations == 0);
  CHECK(r.value.ratio <= 1.0);
  CHECK(r.derivative.ratio <= 1.0);
  CHECK(r.gradient.ratio <= 1.0);
  CHECK(r.value.empirical > 0.0);
}

TEST_CASE("family probe respects the class sup bounds") {
  const Expr u = parse_expr("sin(pi*x1)", 1);
  const EllipticProblem p = manufactured_problem(u, {Expr::constant(1, 1)},
                                                 {Expr::constant(0.5, 1)}, Expr::constant(2, 1),
                                                 1.0, 1.0, Domain::hypercube(1));
  const CoefficientNorms c = CoefficientNorms::from_report(check_coercivity(p, 2048, 1));
  const NetworkArch arch{{1, 4, 4, 1}, Activation::tanh(), 2.0};
  const FamilyProbe fp = class_family_probe(arch, p, c, 2000, 3);
  CHECK(fp.violations == 0);
  for (int i = 0; i < 6; ++i) CHECK(fp.reports[i].ratio <= 1.0);
}

TEST_CASE("empirical statistical error is a lower estimate") {
  const EllipticProblem p = manufactured_problem(parse_expr("sin(pi*x1)", 1),
                                                 {Expr::constant(1, 1)}, {Expr::constant(0, 1)},
                                                 Expr::constant(1, 1), 1.0, 1.0,
                                                 Domain::hypercube(1));
  const NetworkArch arch{{1, 3, 1}, Activation::tanh(), 1.0};
  StaErrorOptions o;
  o.trials = 3;
  o.probe_budget = 2;
  o.ascent_steps = 1;
  o.big_factor = 10;
  o.seed = 4;
  const BoundReport r = empirical_sta_error(arch, arch, p, 32, o);
  CHECK(r.empirical >= 0.0);
  CHECK(r.ratio <= 1.0);
  CHECK(r.inputs.at("N") == 32.0);
  const BoundReport again = empirical_sta_error(arch, arch, p, 32, o);
  CHECK(again.empirical == r.empirical);

  StaErrorOptions zero = o;
  zero.probe_budget = 1;
  const NetworkArch one{{1, 1}, Activation::tanh(), 1.0};
  CHECK(empirical_sta_error(one, one, p, 16, zero).empirical >= 0.0);
}
