#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "tavlab/tensor.hpp"

using namespace tavlab;

TEST_CASE("norm2 basics") {
  CHECK(norm2({0.0, 0.0, 0.0}) == 0.0);
  CHECK(norm2({3.0, 4.0}) == 5.0);
  CHECK_THROWS_WITH(norm2({1.0, std::numeric_limits<double>::quiet_NaN()}),
                    "non-finite vector");
  CHECK_THROWS_AS(norm2({std::numeric_limits<double>::infinity()}),
                  std::invalid_argument);
}

TEST_CASE("norm2 matches compensated-summation oracle") {
  SplitMix64 rng(101);
  ParamVector v(100);
  for (double& x : v) x = rng.next_normal() * 10.0;
  const double expected = oracle::kahan_norm2(v);
  CHECK(norm2(v) == Catch::Approx(expected).epsilon(1e-13));
}

TEST_CASE("norm2 absolute homogeneity") {
  SplitMix64 rng(7);
  ParamVector v(37);
  for (double& x : v) x = rng.next_normal();
  const double base = norm2(v);
  for (double a : {-1000.0, -3.7, -1.0, 0.5, 2.0, 999.0}) {
    CHECK(norm2(scaled(v, a)) ==
          Catch::Approx(std::abs(a) * base).epsilon(1e-12));
  }
}

TEST_CASE("cosine basics") {
  ParamVector v{1.0, 2.0, -3.0};
  CHECK(cosine(v, v) == 1.0);
  CHECK(cosine({1.0, 0.0}, {0.0, 1.0}) == 0.0);
  CHECK(cosine({1.0, 1.0}, {1.0, 0.0}) ==
        Catch::Approx(0.7071067811865475).margin(1e-12));
  CHECK_THROWS_WITH(cosine({0.0, 0.0}, {1.0, 0.0}), "undefined cosine");
}

TEST_CASE("cosine scale invariance") {
  SplitMix64 rng(21);
  ParamVector v(15), w(15);
  for (double& x : v) x = rng.next_normal();
  for (double& x : w) x = rng.next_normal();
  const double c = cosine(v, w);
  for (double a : {2.0, -0.5, 137.0}) {
    for (double b : {1.5, -8.0}) {
      const double sign = a * b > 0 ? 1.0 : -1.0;
      CHECK(cosine(scaled(v, a), scaled(w, b)) ==
            Catch::Approx(sign * c).margin(1e-12));
    }
  }
}

TEST_CASE("cosine stays clamped to [-1, 1]") {
  // Nearly parallel vectors can push the raw quotient past 1 by rounding.
  ParamVector v(64, 1.0 / 3.0), w(64, 1.0 / 3.0);
  w[0] = std::nextafter(w[0], 1.0);
  const double c = cosine(v, w);
  CHECK(c <= 1.0);
  CHECK(c >= 0.999999);
}

TEST_CASE("spectral norm on fixed matrices") {
  DenseMatrix eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  CHECK(spectral_norm(eye) == Catch::Approx(1.0).epsilon(1e-12));

  DenseMatrix diag(2, 2);
  diag.at(0, 0) = 3.0;
  diag.at(1, 1) = 1.0;
  CHECK(spectral_norm(diag) == Catch::Approx(3.0).epsilon(1e-10));

  CHECK(spectral_norm(DenseMatrix(4, 4)) == 0.0);
  CHECK_THROWS_AS(spectral_norm(eye, 0.0), std::invalid_argument);
}

TEST_CASE("spectral norm matches SVD oracle on seeded matrices") {
  SplitMix64 rng(55);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{5, 7}, {7, 5}, {12, 12}}) {
    DenseMatrix m(r, c);
    for (double& x : m.data) x = rng.next_normal();
    const double expected = oracle::svd_spectral_norm(m);
    CHECK(spectral_norm(m) == Catch::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("spectral norm dominates every probe direction") {
  SplitMix64 rng(91);
  DenseMatrix m(6, 9);
  for (double& x : m.data) x = rng.next_normal();
  const double sigma = spectral_norm(m);
  std::vector<double> probe(9), image;
  for (int trial = 0; trial < 50; ++trial) {
    for (double& x : probe) x = rng.next_normal();
    matvec(m, probe, image);
    CHECK(sigma * norm2(probe) >= norm2(image) * (1.0 - 1e-9));
  }
}

TEST_CASE("spectral norm non-convergence carries the last estimate") {
  SplitMix64 rng(3);
  DenseMatrix m(4, 4);
  for (double& x : m.data) x = rng.next_normal();
  try {
    spectral_norm(m, 1e-10, 1);
    FAIL("expected SpectralNormError");
  } catch (const SpectralNormError& e) {
    CHECK(e.last_estimate > 0.0);
  }
}
