#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prodsc/eigen.hpp"
#include "prodsc/rng.hpp"
#include "prodsc/selfexpress.hpp"

using namespace prodsc;

TEST_CASE("column normalization") {
  const Matrix raw{{3.0}, {4.0}};
  EmbeddingBatch e = normalize_columns(raw);
  REQUIRE(e.Y(0, 0) == Catch::Approx(0.6));
  REQUIRE(e.Y(1, 0) == Catch::Approx(0.8));

  // idempotence on already-unit columns
  EmbeddingBatch e2 = normalize_columns(e.Y);
  REQUIRE(frobenius_norm(subtract(e2.Y, e.Y)) <= 1e-12);

  RngState rng(5);
  EmbeddingBatch r = normalize_columns(rng.gaussian_matrix(5, 7));
  for (std::size_t j = 0; j < 7; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += r.Y(i, j) * r.Y(i, j);
    REQUIRE(std::sqrt(s) == Catch::Approx(1.0).margin(1e-10));
  }

  Matrix withzero(2, 2);
  withzero(0, 0) = 1.0;
  REQUIRE_THROWS_AS(normalize_columns(withzero), ZeroColumn);
}

TEST_CASE("doubly stochastic projection on uniform scores") {
  CoefficientMatrix c2 = sinkhorn_project(Matrix(2, 2), 0.1, 30, true);
  REQUIRE(c2.C(0, 0) == 0.0);
  REQUIRE(c2.C(1, 1) == 0.0);
  REQUIRE(c2.C(0, 1) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(c2.C(1, 0) == Catch::Approx(1.0).margin(1e-12));

  CoefficientMatrix c3 = sinkhorn_project(Matrix(3, 3), 0.7, 30, true);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      REQUIRE(c3.C(i, j) == Catch::Approx(i == j ? 0.0 : 0.5).margin(1e-9));
}

TEST_CASE("doubly stochastic projection marginals and invariants") {
  RngState rng(9);
  const Matrix y = normalize_columns(rng.gaussian_matrix(4, 16)).Y;
  const Matrix s = multiply_at_b(y, y);
  CoefficientMatrix c = sinkhorn_project(s, 0.1, 30, true);
  for (std::size_t i = 0; i < 16; ++i) {
    double rs = 0.0, cs = 0.0;
    for (std::size_t j = 0; j < 16; ++j) {
      rs += c.C(i, j);
      cs += c.C(j, i);
      REQUIRE(c.C(i, j) >= 0.0);
    }
    REQUIRE(rs == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(cs == Catch::Approx(1.0).margin(1e-6));
    REQUIRE(c.C(i, i) == 0.0);
  }

  REQUIRE_THROWS_AS(sinkhorn_project(Matrix(3, 3), -0.1, 30, true), NumericalOverflow);
  REQUIRE_THROWS_AS(sinkhorn_project(Matrix{{0.0}}, 0.1, 30, true), BatchTooSmall);
}

TEST_CASE("doubly stochastic projection fixed point and equivariance") {
  RngState rng(21);
  const std::size_t n = 8;
  const Matrix s = rng.uniform_matrix(n, n, -1.0, 1.0);
  const double tau = 0.5;
  CoefficientMatrix c = sinkhorn_project(s, tau, 2000, true);

  // feeding back tau*log(C) off-diagonal must reproduce C
  Matrix s2(n, n, -50.0 * tau);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && c.C(i, j) > 0.0) s2(i, j) = tau * std::log(c.C(i, j));
  CoefficientMatrix c2 = sinkhorn_project(s2, tau, 30, true);
  double dmax = 0.0;
  for (std::size_t i = 0; i < n * n; ++i)
    dmax = std::max(dmax, std::abs(c2.C.storage()[i] - c.C.storage()[i]));
  REQUIRE(dmax <= 1e-8);

  // permutation equivariance: rotate indices by one
  Matrix sp(n, n);
  auto perm = [n](std::size_t i) { return (i + 1) % n; };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sp(perm(i), perm(j)) = s(i, j);
  CoefficientMatrix cp = sinkhorn_project(sp, tau, 30, true);
  CoefficientMatrix cb = sinkhorn_project(s, tau, 30, true);
  double emax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      emax = std::max(emax, std::abs(cp.C(perm(i), perm(j)) - cb.C(i, j)));
  REQUIRE(emax <= 1e-12);
}

TEST_CASE("affinity construction") {
  CoefficientMatrix c{Matrix{{0, 1}, {0, 0}}, 0.1, 1};
  Affinity a = affinity_from(c);
  REQUIRE(a.A(0, 1) == Catch::Approx(0.5));
  REQUIRE(a.A(1, 0) == Catch::Approx(0.5));
  REQUIRE(a.A(0, 0) == 0.0);

  RngState rng(31);
  CoefficientMatrix cr{rng.gaussian_matrix(6, 6), 0.1, 1};
  for (std::size_t i = 0; i < 6; ++i) cr.C(i, i) = 0.0;
  Affinity ar = affinity_from(cr);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(ar.A(i, i) == 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
      REQUIRE(ar.A(i, j) == ar.A(j, i));
      REQUIRE(ar.A(i, j) >= 0.0);
    }
  }
}

TEST_CASE("residual quadratic form matrix") {
  REQUIRE(frobenius_norm(subtract(m_matrix(Matrix(3, 3)), Matrix::identity(3))) == 0.0);

  const Matrix m = m_matrix(Matrix{{0, 1}, {1, 0}});
  REQUIRE(m(0, 0) == Catch::Approx(2.0));
  REQUIRE(m(0, 1) == Catch::Approx(-2.0));
  REQUIRE(m(1, 0) == Catch::Approx(-2.0));
  REQUIRE(m(1, 1) == Catch::Approx(2.0));

  RngState rng(41);
  for (int t = 0; t < 100; ++t) {
    const Matrix mm = m_matrix(rng.gaussian_matrix(5, 5));
    EigenDecomposition e = sym_eigen(mm);
    REQUIRE(e.values.front() >= -1e-10);
  }
}
