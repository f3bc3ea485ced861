#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "dlmix/rng.hpp"

using namespace dlmix;

TEST_CASE("philox keystream is deterministic and key-sensitive") {
  Philox4x32 gen(42);
  const auto block1 = gen(0);
  const auto block2 = gen(0);
  CHECK(block1 == block2);
  CHECK(gen(1) != block1);
  Philox4x32 other(43);
  CHECK(other(0) != block1);
}

TEST_CASE("streams with the same path reproduce bit-for-bit") {
  RngStream a(123);
  RngStream b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c = RngStream(123).derive("chain", 2);
  RngStream d = RngStream(123).derive("chain", 2);
  for (int i = 0; i < 100; ++i) CHECK(c.uniform() == d.uniform());
}

TEST_CASE("derived streams are distinct") {
  RngStream root(5);
  RngStream a = root.derive("chain", 0);
  RngStream b = root.derive("chain", 1);
  RngStream c = root.derive("calib", 0);
  int equal_ab = 0;
  int equal_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    const auto vb = b.next_u64();
    const auto vc = c.next_u64();
    equal_ab += va == vb;
    equal_ac += va == vc;
  }
  CHECK(equal_ab == 0);
  CHECK(equal_ac == 0);
}

TEST_CASE("uniform stays inside the open unit interval with correct moments") {
  RngStream rng(777);
  double sum = 0.0;
  double sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum_sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12.0).epsilon(0.03));
}

TEST_CASE("normal moments") {
  RngStream rng(31337);
  const int n = 200000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
    m3 += z * z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  CHECK(m1 == doctest::Approx(0.0).epsilon(1).scale(0.01));
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.02));
  CHECK(m3 == doctest::Approx(0.0).epsilon(1).scale(0.05));
  CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("gamma and inverse-gamma moments") {
  RngStream rng(11);
  const int n = 200000;

  // Gamma(shape, scale): mean shape*scale, var shape*scale^2
  {
    double sum = 0, sum_sq = 0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(3.5, 2.0);
      sum += g;
      sum_sq += g * g;
    }
    const double mean = sum / n;
    CHECK(mean == doctest::Approx(7.0).epsilon(0.02));
    CHECK(sum_sq / n - mean * mean == doctest::Approx(14.0).epsilon(0.05));
  }
  // Shape below 1 uses the boosting branch.
  {
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += rng.gamma(0.4, 1.0);
    CHECK(sum / n == doctest::Approx(0.4).epsilon(0.03));
  }
  // InvGamma(shape, rate): mean rate/(shape-1)
  {
    double sum = 0;
    for (int i = 0; i < n; ++i) sum += rng.inv_gamma(5.0, 8.0);
    CHECK(sum / n == doctest::Approx(2.0).epsilon(0.03));
  }
}

TEST_CASE("beta moments") {
  RngStream rng(17);
  const int n = 200000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double b = rng.beta(2.0, 6.0);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    sum += b;
    sum_sq += b * b;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.25).epsilon(0.02));
  const double expected_var = 2.0 * 6.0 / (8.0 * 8.0 * 9.0);
  CHECK(sum_sq / n - mean * mean == doctest::Approx(expected_var).epsilon(0.05));
}

TEST_CASE("fnv1a64 matches reference vectors") {
  // Published FNV-1a test vectors.
  const char empty[] = "";
  CHECK(fnv1a64(empty, 0) == 0xcbf29ce484222325ull);
  const char a[] = "a";
  CHECK(fnv1a64(a, 1) == 0xaf63dc4c8601ec8cull);
}
