#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cbilab/rng.hpp"

using namespace cbilab;

TEST_CASE("philox known-answer vector") {
  // philox4x32-10, zero counter, zero key (Random123 kat_vectors)
  RngStream r(0, 0);
  CHECK(r.next_u32() == 0x6627e8d5u);
  CHECK(r.next_u32() == 0xe169c58du);
  CHECK(r.next_u32() == 0xbc57ac4cu);
  CHECK(r.next_u32() == 0x9b00dbd8u);
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform lies in the open unit interval with mean 1/2") {
  RngStream r(1, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  double se = std::sqrt(1.0 / 12.0 / n);
  CHECK(std::abs(sum / n - 0.5) < 4.0 * se);
}

TEST_CASE("poisson moments, both regimes") {
  for (double mean : {3.7, 300.0}) {
    RngStream r(2, static_cast<std::uint64_t>(mean));
    const int n = 50000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double k = static_cast<double>(r.poisson(mean));
      s1 += k;
      s2 += k * k;
    }
    double m = s1 / n;
    double var = s2 / n - m * m;
    CHECK(std::abs(m - mean) < 4.0 * std::sqrt(mean / n));
    // var(sample var) ~ (2 mean^2 + mean)/n for Poisson
    CHECK(std::abs(var - mean) < 4.0 * std::sqrt((2.0 * mean * mean + mean) / n));
  }
}

TEST_CASE("gamma moments") {
  RngStream r(3, 0);
  const int n = 50000;
  const double shape = 4.2;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = r.gamma(shape);
    s1 += g;
    s2 += g * g;
  }
  double m = s1 / n, var = s2 / n - m * m;
  CHECK(std::abs(m - shape) < 4.0 * std::sqrt(shape / n));
  CHECK(std::abs(var - shape) < 4.0 * std::sqrt(2.0 * shape * (shape + 3.0) / n));
}

TEST_CASE("exponential mean") {
  RngStream r(4, 0);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.exponential();
  CHECK(std::abs(s / n - 1.0) < 4.0 / std::sqrt(static_cast<double>(n)));
}
