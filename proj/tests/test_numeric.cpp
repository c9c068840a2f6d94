#include <doctest.h>

#include <cmath>
#include <vector>
#include <wgal/numeric.hpp>

using namespace wgal;

TEST_CASE("LogValue arithmetic stays in log space") {
  const LogValue a = LogValue::from_value(8.0);
  const LogValue b = LogValue::from_value(2.0);
  CHECK((a * b).value() == doctest::Approx(16.0));
  CHECK((a / b).value() == doctest::Approx(4.0));
  CHECK((a + b).value() == doctest::Approx(10.0));
  CHECK(b.pow(10).value() == doctest::Approx(1024.0));
  CHECK(LogValue::zero().is_zero());
  CHECK((LogValue::zero() + b).value() == doctest::Approx(2.0));

  const LogValue huge = LogValue::from_log(1000.0);
  CHECK(huge.overflows());
  CHECK(std::isinf(huge.value()));
  CHECK(huge.to_string().find("exp(") == 0);
}

TEST_CASE("Rng is deterministic and stays inside the open interval") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform_open();
    CHECK(u == b.uniform_open());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
  CHECK(derive_seed(7, 9) == derive_seed(7, 9));
}

TEST_CASE("Rng normal draws have unit variance") {
  Rng r(3);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("pairwise_sum, norms, slopes and medians") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
  CHECK(l2_norm(std::vector<double>{3.0, 4.0}) == doctest::Approx(5.0));

  std::vector<double> x = {1, 2, 4, 8}, y;
  for (double t : x) y.push_back(3.0 * std::pow(t, 0.5));
  CHECK(loglog_slope(x, y) == doctest::Approx(0.5));

  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("fnv1a_hex matches the reference offset basis and vector") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("abc").size() == 16);
}
