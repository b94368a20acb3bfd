#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "qsmooth/rng.hpp"

using namespace qsmooth;

TEST_CASE("Philox4x32-10 known-answer vectors", "[rng]") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct", "[rng]") {
  CounterRng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  std::vector<double> va, vb, vc, vd;
  for (int k = 0; k < 100; ++k) {
    va.push_back(a.normal());
    vb.push_back(b.normal());
    vc.push_back(c.normal());
    vd.push_back(d.normal());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("uniforms stay in the open unit interval", "[rng]") {
  CounterRng r(0, 0);
  for (int k = 0; k < 100000; ++k) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal draws have unit variance and zero mean", "[rng]") {
  CounterRng r(2024, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = r.normal();
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  const double mean = sum / n, var = sum2 / n - mean * mean;
  // Standard errors: 1/sqrt(n) for the mean, sqrt(2/n) for the variance.
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sum4 / n - 3.0) < 0.1);
}
