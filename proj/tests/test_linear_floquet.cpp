#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "rgkit/errors.hpp"
#include "rgkit/linear_floquet.hpp"
#include "rgkit/rg_core.hpp"
#include "test_support.hpp"

using namespace rgkit;
using C = std::complex<double>;
using rgkit::testing::lift;
using rgkit::testing::mathieu;

namespace {

const BasisPtr kUnit = make_basis({Rational(1)});

QPPoly cst(const Scalar& c, const BasisPtr& b = kUnit) { return QPPoly::constant(0, b, c); }

// c e^{ikt} + c e^{-ikt}
QPPoly cosine(const Scalar& c, int k, const BasisPtr& b = kUnit) {
  QPPoly p(0, b);
  p.add_term(c, std::vector<int>{}, std::vector<int>{k});
  p.add_term(c, std::vector<int>{}, std::vector<int>{-k});
  return p;
}

QPMatrix zeros(std::size_t n, const BasisPtr& b = kUnit) {
  return QPMatrix(n, std::vector<QPPoly>(n, QPPoly(0, b)));
}

QPMatrix scaled(const QPMatrix& M, const QPPoly& f) {
  QPMatrix out = M;
  for (auto& row : out)
    for (auto& e : row) e = e * f;
  return out;
}

bool is_zero(const QPMatrix& M) {
  for (const auto& row : M)
    for (const auto& e : row)
      if (!e.is_zero()) return false;
  return true;
}

double spectral(const Eigen::MatrixXcd& M) {
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(M).singularValues()(0);
}

}  // namespace

TEST_CASE("linear_rg closed forms") {
  QPMatrix Cm = zeros(2);
  Cm[0][0] = cst(Scalar(1));
  Cm[0][1] = cst(Scalar(2));
  Cm[1][0] = cst(Scalar(Rational(-1, 3)));
  Cm[1][1] = cst(Scalar(ComplexRational(Rational(0), Rational(1))));

  SUBCASE("constant A_1") {
    const auto res = linear_rg(make_matrix_series(2, kUnit, {{1, Cm}}), 3);
    CHECK(res.R[0] == Cm);
    CHECK(is_zero(res.U[0]));
    CHECK(is_zero(res.R[1]));
    CHECK(is_zero(res.R[2]));
  }
  SUBCASE("A_1 = cos(t) C") {
    const auto res = linear_rg(make_matrix_series(2, kUnit, {{1, scaled(Cm, cosine(Scalar(Rational(1, 2)), 1))}}), 2);
    CHECK(is_zero(res.R[0]));
    // sin t = (e^{it} - e^{-it}) / 2i
    QPPoly sin(0, kUnit);
    sin.add_term(Scalar(ComplexRational(Rational(0), Rational(-1, 2))), std::vector<int>{}, std::vector<int>{1});
    sin.add_term(Scalar(ComplexRational(Rational(0), Rational(1, 2))), std::vector<int>{}, std::vector<int>{-1});
    CHECK(res.U[0] == scaled(Cm, sin));
    CHECK(is_zero(res.R[1]));
  }
  SUBCASE("nilpotent pair") {
    QPMatrix A1 = zeros(2), A2 = zeros(2);
    A1[1][0] = cosine(Scalar(Rational(1, 2)), 1);
    A2[0][1] = cst(Scalar(1));
    const auto res = linear_rg(make_matrix_series(2, kUnit, {{1, A1}, {2, A2}}), 2);
    CHECK(is_zero(res.R[0]));
    CHECK(res.R[1] == A2);
  }
  SUBCASE("R constant and U zero mean on random input") {
    std::mt19937 rng(91);
    for (int trial = 0; trial < 5; ++trial) {
      QPMatrix A1 = zeros(3), A2 = zeros(3);
      for (auto* M : {&A1, &A2})
        for (auto& row : *M)
          for (auto& e : row) e = testing::random_poly(rng, 0, kUnit);
      const auto res = linear_rg(make_matrix_series(3, kUnit, {{1, A1}, {2, A2}}), 3);
      for (int i = 0; i < 3; ++i)
        for (std::size_t r = 0; r < 3; ++r)
          for (std::size_t c = 0; c < 3; ++c) {
            CHECK(qp_average_t(res.R[i][r][c]) == res.R[i][r][c]);
            CHECK(qp_average_t(res.U[i][r][c]).is_zero());
          }
    }
  }
}

TEST_CASE("linear_rg equals the rg_core slice on random trigonometric systems") {
  std::mt19937 rng(2024);
  testing::PolyShape shape;
  shape.max_terms = 3;
  for (int trial = 0; trial < 20; ++trial) {
    std::map<int, QPMatrix> orders;
    for (int p = 1; p <= 2; ++p) {
      QPMatrix M = zeros(2);
      for (auto& row : M)
        for (auto& e : row) e = testing::random_poly(rng, 0, kUnit, shape);
      orders.emplace(p, M);
    }
    const auto A = make_matrix_series(2, kUnit, orders);
    const auto lin = linear_rg(A, 3);
    std::map<int, QPVector> fields;
    for (const auto& [p, M] : orders) fields.emplace(p, lift(M, kUnit));
    const auto rg = rg_derive(make_system(2, kUnit, fields), 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(lift(lin.R[i], kUnit) == rg.R[i]);
      CHECK(lift(lin.U[i], kUnit) == rg.U[i]);
    }
  }
}

TEST_CASE("Floquet exponents") {
  QPMatrix D = zeros(2);
  D[0][0] = cst(Scalar(-2));
  D[1][1] = cst(Scalar(Rational(1, 2)));
  const auto res = linear_rg(make_matrix_series(2, kUnit, {{1, D}}), 1);
  const auto mu = floquet_exponents(res, 0.1);
  CHECK(std::abs(mu[0] - C(-0.2)) < 1e-14);
  CHECK(std::abs(mu[1] - C(0.05)) < 1e-14);
  for (const auto& z : floquet_exponents(res, 0.0)) CHECK(z == C(0.0));
}

TEST_CASE("numeric monodromy") {
  IntegratorConfig tight;
  tight.abs_tol = 1e-13;
  tight.rel_tol = 1e-12;
  SUBCASE("zero matrix gives the identity") {
    const auto A = make_matrix_series(2, kUnit, {});
    CHECK(spectral(monodromy_numeric(A, 0.3) - Eigen::MatrixXcd::Identity(2, 2)) < 1e-14);
  }
  SUBCASE("constant A_1") {
    QPMatrix Cm = zeros(2);
    Cm[0][1] = cst(Scalar(1));
    Cm[1][0] = cst(Scalar(-2));
    Cm[1][1] = cst(Scalar(Rational(-1, 4)));
    const auto res = linear_rg(make_matrix_series(2, kUnit, {{1, Cm}}), 1);
    const double eps = 0.2;
    Eigen::MatrixXcd E(2, 2);
    E << 0, 1, -2, -0.25;
    const Eigen::MatrixXcd expected = (E * (eps * 2 * M_PI)).exp();
    CHECK(spectral(monodromy_numeric(res.A, eps, tight) - expected) < 1e-10);
    CHECK(monodromy_check(res, eps, tight).defect < 1e-10);
  }
  SUBCASE("defect order on a Mathieu-type system") {
    const auto A = mathieu();
    const std::vector<double> grid{0.1, 0.05, 0.025, 0.0125};
    for (int m : {1, 2}) {
      const auto res = linear_rg(A, m);
      std::vector<double> defects;
      for (double e : grid) defects.push_back(monodromy_check(res, e, tight).defect);
      CHECK(loglog_slope(grid, defects) >= m + 0.7);
    }
  }
  SUBCASE("exponents match the monodromy multipliers") {
    const auto res = linear_rg(mathieu(), 3);
    const double eps = 0.02, T = res.A.period();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(monodromy_numeric(res.A, eps, tight), false);
    std::vector<C> multipliers(es.eigenvalues().data(), es.eigenvalues().data() + 2);
    for (const auto& mu : floquet_exponents(res, eps)) {
      double best = 1e300;
      for (const auto& l : multipliers) best = std::min(best, std::abs(std::exp(mu * T) - l));
      CHECK(best < 1e-6);
    }
  }
}

TEST_CASE("alpha_t is periodic") {
  const auto res = linear_rg(mathieu(), 3);
  const double T = res.A.period();
  for (double t = 0.0; t < 2 * T; t += 0.13)
    CHECK(spectral(rg_alpha(res, t + T, 0.05) - rg_alpha(res, t, 0.05)) < 1e-10);
}

TEST_CASE("exponent sweep flags collisions") {
  const auto res = linear_rg(mathieu(), 2);
  const auto rows = exponent_sweep(res, {0.0, 0.01, 0.05});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].collision);
  CHECK(!rows[1].collision);
  CHECK(!rows[2].collision);
  CHECK(rows[2].eps == 0.05);
  CHECK(rows[2].defect > rows[1].defect);
}

TEST_CASE("matrix series validation") {
  CHECK_THROWS_AS(make_matrix_series(2, empty_basis(), {}), InputError);
  CHECK_THROWS_AS(make_matrix_series(2, make_basis({Rational(1), Rational(2)}), {}), InputError);
  QPMatrix bad = zeros(2);
  bad[0][0] = QPPoly::variable(1, kUnit, 0);
  CHECK_THROWS_AS(make_matrix_series(2, kUnit, {{1, bad}}), InputError);
  CHECK_THROWS_AS(make_matrix_series(3, kUnit, {{1, zeros(2)}}), InputError);
  CHECK_THROWS_AS(linear_rg(make_matrix_series(2, kUnit, {}), 0), InputError);
}
