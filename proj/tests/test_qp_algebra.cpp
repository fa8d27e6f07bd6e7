#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "rgkit/errors.hpp"
#include "rgkit/qp_algebra.hpp"
#include "test_support.hpp"

using namespace rgkit;
using rgkit::testing::random_point;
using rgkit::testing::random_poly;
using rgkit::testing::rel_diff;
using C = std::complex<double>;

namespace {

const BasisPtr kUnit = make_basis({Rational(1)});

QPPoly mono(const Scalar& c, std::vector<int> alpha, std::vector<int> k,
            const BasisPtr& basis = kUnit) {
  return QPPoly::monomial(alpha.size(), basis, c, alpha, k);
}

}  // namespace

TEST_CASE("rational parsing and formatting") {
  CHECK(parse_rational("3/6") == Rational(1, 2));
  CHECK(parse_rational("-16/3") == Rational(-16, 3));
  CHECK(parse_rational("1.8") == Rational(9, 5));
  CHECK(parse_rational("-2.5e-1") == Rational(-1, 4));
  CHECK(format_rational(Rational(4, 2)) == "2");
  CHECK(format_rational(Rational(-8, 3)) == "-8/3");
  CHECK_THROWS_AS(parse_rational("1/0"), InputError);
  CHECK_THROWS_AS(parse_rational("abc"), InputError);
  CHECK(rational_gcd(Rational(3, 2), Rational(9, 4)) == Rational(3, 4));
}

TEST_CASE("qp_add") {
  SUBCASE("cancellation leaves the empty polynomial") {
    auto p = mono(1, {1, 0}, {1}) + mono(-1, {1, 0}, {1});
    CHECK(p.is_zero());
  }
  SUBCASE("zero is the identity") {
    auto p = mono(Scalar(Rational(2), Rational(1, 3)), {2, 1}, {-1});
    CHECK(p + QPPoly(2, kUnit) == p);
  }
  SUBCASE("constants add") {
    auto p = mono(2, {0, 0}, {0}) + mono(3, {0, 0}, {0});
    CHECK(p == mono(5, {0, 0}, {0}));
  }
  SUBCASE("basis mismatch is rejected") {
    auto other = make_basis({Rational(2)});
    CHECK_THROWS_AS(mono(1, {1}, {1}) + mono(1, {1}, {1}, other), BasisMismatch);
    CHECK_THROWS_AS(mono(1, {1}, {1}) + mono(1, {1, 0}, {1}), BasisMismatch);
  }
}

TEST_CASE("qp_mul") {
  CHECK(mono(1, {1, 0}, {1}) * mono(2, {0, 1}, {-1}) == mono(2, {1, 1}, {0}));
  auto p = mono(Scalar(Rational(1, 2), Rational(-3)), {1, 2}, {2});
  CHECK(p * QPPoly::constant(2, kUnit, 1) == p);
  CHECK(mono(1, {1, 0}, {1}) * mono(1, {1, 0}, {1}) == mono(1, {2, 0}, {2}));
}

TEST_CASE("qp_diff_y") {
  CHECK(qp_diff_y(mono(1, {2, 0}, {1}), 0) == mono(2, {1, 0}, {1}));
  CHECK(qp_diff_y(mono(1, {2, 0}, {0}), 1).is_zero());
  CHECK(qp_diff_y(mono(3, {1, 1}, {0}), 0) == mono(3, {0, 1}, {0}));
}

TEST_CASE("qp_average_t") {
  SUBCASE("keeps the k = 0 slice") {
    auto p = mono(1, {1}, {1}) + mono(2, {1}, {0});
    CHECK(qp_average_t(p) == mono(2, {1}, {0}));
  }
  SUBCASE("purely oscillatory input averages to zero") {
    CHECK(qp_average_t(mono(1, {1}, {1}) + mono(4, {0}, {-3})).is_zero());
  }
  SUBCASE("constants are fixed") {
    CHECK(qp_average_t(mono(7, {0}, {0})) == mono(7, {0}, {0}));
  }
  SUBCASE("autonomous basis: averaging is the identity") {
    std::mt19937 rng(3);
    auto p = random_poly(rng, 2, empty_basis());
    CHECK(qp_average_t(p) == p);
  }
  SUBCASE("dependent basis is detected") {
    auto basis = make_basis({Rational(1), Rational(2)});
    auto p = mono(1, {1}, {2, -1}, basis);
    CHECK_THROWS_AS(qp_average_t(p), ZeroFrequencyCollision);
  }
  SUBCASE("long-time trapezoid average agrees with the k = 0 slice") {
    std::mt19937 rng(11);
    auto basis = make_basis({Rational(1), Rational(7, 3)});
    for (int trial = 0; trial < 5; ++trial) {
      auto p = random_poly(rng, 2, basis);
      const auto y = random_point(rng, 2);
      const double t_big = 2000.0;
      const int steps = 400000;
      const double h = t_big / steps;
      C sum = 0.5 * (qp_eval(p, 0.0, y) + qp_eval(p, t_big, y));
      CompiledQP cp(p);
      for (int s = 1; s < steps; ++s) sum += cp(s * h, y);
      const C numeric = sum * h / t_big;
      const C exact = qp_eval(qp_average_t(p), 0.0, y);
      double scale = 0.0;
      for (const auto& [key, c] : p.terms()) scale += std::abs(c.to_complex());
      // Oscillatory terms integrate to O(1/lambda); over T_big the average
      // error is bounded by sum |c| |y|^alpha / (|lambda| T_big).
      CHECK(std::abs(numeric - exact) <= 10.0 * scale / t_big);
    }
  }
}

TEST_CASE("qp_antiderivative_t") {
  SUBCASE("divides by i*lambda") {
    auto basis = make_basis({Rational(3)});
    auto p = mono(Scalar(Rational(2)), {1}, {1}, basis);
    // 2 y e^{3it} -> 2/(3i) y e^{3it} = -2i/3 y e^{3it}
    CHECK(qp_antiderivative_t(p) == mono(Scalar(Rational(0), Rational(-2, 3)), {1}, {1}, basis));
  }
  SUBCASE("zero maps to zero") { CHECK(qp_antiderivative_t(QPPoly(1, kUnit)).is_zero()); }
  SUBCASE("cosine integrates to sine over omega") {
    auto basis = make_basis({Rational(5, 2)});
    auto cosine = mono(Scalar(Rational(1, 2)), {1}, {1}, basis) +
                  mono(Scalar(Rational(1, 2)), {1}, {-1}, basis);
    auto prim = qp_antiderivative_t(cosine);
    const std::vector<C> y{{1.5, 0.0}};
    for (double t : {0.0, 0.3, 1.7, 4.0}) {
      CHECK(std::abs(qp_eval(prim, t, y) - 1.5 * std::sin(2.5 * t) / 2.5) < 1e-14);
    }
  }
  SUBCASE("nonzero mean is rejected") {
    CHECK_THROWS_AS(qp_antiderivative_t(mono(1, {1}, {0})), MeanNotZero);
  }
  SUBCASE("collision is rejected") {
    auto basis = make_basis({Rational(2), Rational(3)});
    CHECK_THROWS_AS(qp_antiderivative_t(mono(1, {0}, {3, -2}, basis)), ZeroFrequencyCollision);
  }
}

TEST_CASE("qp_substitute") {
  SUBCASE("binomial expansion") {
    auto p = mono(1, {2}, {0});
    QPPoly s = QPPoly::variable(1, kUnit, 0) + mono(1, {0}, {1});
    auto r = qp_substitute(p, std::span<const QPPoly>(&s, 1));
    CHECK(r == mono(1, {2}, {0}) + mono(2, {1}, {1}) + mono(1, {0}, {2}));
  }
  SUBCASE("identity substitution") {
    std::mt19937 rng(5);
    auto p = random_poly(rng, 3, kUnit);
    auto id = QPVector::identity(3, kUnit);
    CHECK(qp_substitute(p, id.components()) == p);
  }
  SUBCASE("substituting zero kills the product") {
    auto p = mono(1, {1, 1}, {0});
    std::vector<QPPoly> subs{QPPoly::variable(2, kUnit, 0), QPPoly(2, kUnit)};
    CHECK(qp_substitute(p, subs).is_zero());
  }
  SUBCASE("exponentials of p multiply those of the substitutes") {
    auto p = mono(3, {1}, {2});
    QPPoly s = mono(1, {1}, {-1});
    CHECK(qp_substitute(p, std::span<const QPPoly>(&s, 1)) == mono(3, {1}, {1}));
  }
}

TEST_CASE("qp_eval") {
  CHECK(qp_eval(QPPoly::constant(2, kUnit, 5), 1.3, std::vector<C>{{0.2, 0}, {1, 1}}) == C(5, 0));
  CHECK(qp_eval(mono(1, {1, 0}, {1}), 0.0, std::vector<C>{{2, 0}, {0, 0}}) == C(2, 0));
  std::mt19937 rng(17);
  auto basis = make_basis({Rational(1), Rational(3, 2)});
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_poly(rng, 2, basis);
    auto q = random_poly(rng, 2, basis);
    const auto y = random_point(rng, 2);
    const double t = std::uniform_real_distribution<double>(-5, 5)(rng);
    CHECK(rel_diff(qp_eval(p + q, t, y), qp_eval(p, t, y) + qp_eval(q, t, y)) < 1e-12);
  }
}

TEST_CASE("degenerate dimensions are legal") {
  // n = 0: pure time series.
  auto s = QPPoly::monomial(0, kUnit, 2, std::vector<int>{}, std::vector<int>{1});
  CHECK(qp_average_t(s).is_zero());
  CHECK(qp_antiderivative_t(s).size() == 1);
  CHECK(std::abs(qp_eval(s, std::numbers::pi / 2, std::vector<C>{}) - C(0, 2)) < 1e-15);
  // d = 0: autonomous.
  auto a = QPPoly::variable(2, empty_basis(), 1);
  CHECK(qp_average_t(a) == a);
}

TEST_CASE("ring laws hold exactly on random instances") {
  std::mt19937 rng(2024);
  auto basis = make_basis({Rational(1), Rational(5, 3)});
  for (int trial = 0; trial < 30; ++trial) {
    auto a = random_poly(rng, 2, basis);
    auto b = random_poly(rng, 2, basis);
    auto c = random_poly(rng, 2, basis);
    CHECK((a * b) * c == a * (b * c));
    CHECK(a * b == b * a);
    CHECK(a + b == b + a);
    CHECK(a * (b + c) == a * b + a * c);
  }
}

TEST_CASE("ring laws hold to 1e-12 in float mode") {
  std::mt19937 rng(7);
  auto basis = make_basis({Rational(1)});
  rgkit::testing::PolyShape shape;
  shape.exact = false;
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_poly(rng, 2, basis, shape);
    auto b = random_poly(rng, 2, basis, shape);
    auto c = random_poly(rng, 2, basis, shape);
    const auto lhs = (a * (b + c)) - (a * b + a * c);
    const auto y = random_point(rng, 2);
    const double t = 0.7;
    const double scale = std::abs(qp_eval(a * b, t, y)) + std::abs(qp_eval(a * c, t, y)) + 1.0;
    CHECK(std::abs(qp_eval(lhs, t, y)) / scale < 1e-12);
    CHECK(rel_diff(qp_eval((a * b) * c, t, y), qp_eval(a * (b * c), t, y)) < 1e-12);
  }
}

TEST_CASE("antiderivative and average are consistent") {
  std::mt19937 rng(99);
  auto basis = make_basis({Rational(2), Rational(7, 5)});
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_poly(rng, 3, basis);
    auto avg = qp_average_t(p);
    CHECK(qp_average_t(avg) == avg);  // projection
    auto mean_zero = p - avg;
    auto prim = qp_antiderivative_t(mean_zero);
    CHECK(qp_diff_t(prim) == mean_zero);
    CHECK(qp_average_t(prim).is_zero());
  }
}

TEST_CASE("numeric evaluation commutes with algebra at random points") {
  std::mt19937 rng(31);
  auto basis = make_basis({Rational(1), Rational(1, 2)});
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_poly(rng, 2, basis);
    auto b = random_poly(rng, 2, basis);
    QPPoly s0 = random_poly(rng, 2, basis);
    QPPoly s1 = random_poly(rng, 2, basis);
    std::vector<QPPoly> subs{s0, s1};
    auto combo = a * b - qp_substitute(a, subs);
    CompiledQP ca(a), cb(b), cc(combo), c0(s0), c1(s1);
    for (int pt = 0; pt < 20; ++pt) {
      const auto y = random_point(rng, 2);
      const double t = std::uniform_real_distribution<double>(0, 10)(rng);
      const std::vector<C> ys{c0(t, y), c1(t, y)};
      const C expected = ca(t, y) * cb(t, y) - ca(t, ys);
      CHECK(rel_diff(cc(t, y), expected) < 1e-10);
    }
  }
}
