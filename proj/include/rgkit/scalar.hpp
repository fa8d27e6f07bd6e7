#pragma once

#include <gmpxx.h>

#include <complex>
#include <string>
#include <variant>

namespace rgkit {

using Rational = mpq_class;

/// Parses "p", "p/q", "-p/q" or a finite decimal such as "1.8" or "-2.5e-3"
/// into an exact rational. Throws InputError on malformed text or q == 0.
Rational parse_rational(const std::string& text);

/// Canonical text form: "p" when the denominator is 1, else "p/q".
std::string format_rational(const Rational& q);

/// Rational gcd of two rationals: the largest r with a/r and b/r integers.
Rational rational_gcd(const Rational& a, const Rational& b);

struct ComplexRational {
  Rational re;
  Rational im;

  ComplexRational() = default;
  ComplexRational(Rational r, Rational i = 0) : re(std::move(r)), im(std::move(i)) {
    re.canonicalize();
    im.canonicalize();
  }
};

enum class ScalarMode { Exact, Float };

/// Complex coefficient, either exact (complex rational) or double precision.
///
/// Arithmetic between two exact scalars stays exact; any float operand
/// promotes the result to float.
class Scalar {
 public:
  Scalar() : value_(ComplexRational{}) {}
  Scalar(long v) : value_(ComplexRational{Rational(v)}) {}  // NOLINT
  Scalar(int v) : Scalar(static_cast<long>(v)) {}           // NOLINT
  Scalar(Rational re, Rational im = 0)                        // NOLINT
      : value_(ComplexRational{std::move(re), std::move(im)}) {}
  Scalar(ComplexRational c) : value_(std::move(c)) {}  // NOLINT
  Scalar(std::complex<double> c) : value_(c) {}        // NOLINT

  static Scalar i() { return Scalar(Rational(0), Rational(1)); }
  static Scalar from_double(double re, double im = 0.0) {
    return Scalar(std::complex<double>(re, im));
  }

  bool is_exact() const { return std::holds_alternative<ComplexRational>(value_); }
  ScalarMode mode() const { return is_exact() ? ScalarMode::Exact : ScalarMode::Float; }
  const ComplexRational& exact() const { return std::get<ComplexRational>(value_); }
  std::complex<double> to_complex() const;
  Scalar to_mode(ScalarMode mode) const;

  bool is_zero() const;
  bool is_real() const;
  Scalar conj() const;

  Scalar& operator+=(const Scalar& o);
  Scalar& operator-=(const Scalar& o);
  Scalar& operator*=(const Scalar& o);
  Scalar& operator/=(const Scalar& o);

  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(Scalar a, const Scalar& b) { return a *= b; }
  friend Scalar operator/(Scalar a, const Scalar& b) { return a /= b; }
  Scalar operator-() const;

  /// Exact equality for exact scalars; bitwise value equality for floats.
  friend bool operator==(const Scalar& a, const Scalar& b);
  friend bool operator!=(const Scalar& a, const Scalar& b) { return !(a == b); }

  /// Human form: "3/2", "-8/3*i", "(1/2-3*i)"; floats with 17 digits.
  std::string to_string() const;

 private:
  std::variant<ComplexRational, std::complex<double>> value_;
};

/// Formats a double with 17 significant digits (round-trip precision).
std::string format_double(double v);

}  // namespace rgkit
