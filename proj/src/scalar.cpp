#include "rgkit/scalar.hpp"

#include <cmath>
#include <cstdio>
#include <regex>

#include "rgkit/errors.hpp"

namespace rgkit {

namespace {

const std::regex kFraction(R"(^([+-]?[0-9]+)(?:/([0-9]+))?$)");
const std::regex kDecimal(R"(^([+-]?)([0-9]*)\.?([0-9]*)(?:[eE]([+-]?[0-9]+))?$)");

Rational pow10(long e) {
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(e < 0 ? -e : e));
  return e < 0 ? Rational(mpz_class(1), p) : Rational(p);
}

}  // namespace

Rational parse_rational(const std::string& text) {
  std::smatch m;
  if (std::regex_match(text, m, kFraction)) {
    mpz_class num(m[1].str());
    mpz_class den(1);
    if (m[2].matched) den = mpz_class(m[2].str());
    if (den == 0) throw InputError("zero denominator in rational '" + text + "'");
    Rational q(num, den);
    q.canonicalize();
    return q;
  }
  if (std::regex_match(text, m, kDecimal) && (m[2].length() + m[3].length()) > 0) {
    const std::string digits = m[2].str() + m[3].str();
    long exponent = -static_cast<long>(m[3].length());
    if (m[4].matched) exponent += std::stol(m[4].str());
    Rational q{mpz_class(digits)};
    q *= pow10(exponent);
    if (m[1].str() == "-") q = -q;
    q.canonicalize();
    return q;
  }
  throw InputError("malformed rational '" + text + "'");
}

std::string format_rational(const Rational& value) {
  Rational q = value;
  q.canonicalize();
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

Rational rational_gcd(const Rational& a, const Rational& b) {
  if (a == 0) return abs(b);
  if (b == 0) return abs(a);
  mpz_class num, den;
  mpz_class x = a.get_num() * b.get_den();
  mpz_class y = b.get_num() * a.get_den();
  mpz_gcd(num.get_mpz_t(), x.get_mpz_t(), y.get_mpz_t());
  den = a.get_den() * b.get_den();
  Rational r(num, den);
  r.canonicalize();
  return r;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::complex<double> Scalar::to_complex() const {
  if (is_exact()) {
    const auto& c = exact();
    return {c.re.get_d(), c.im.get_d()};
  }
  return std::get<std::complex<double>>(value_);
}

Scalar Scalar::to_mode(ScalarMode mode) const {
  if (mode == ScalarMode::Float) return Scalar(to_complex());
  if (is_exact()) return *this;
  const auto c = std::get<std::complex<double>>(value_);
  return Scalar(Rational(c.real()), Rational(c.imag()));
}

bool Scalar::is_zero() const {
  if (is_exact()) return exact().re == 0 && exact().im == 0;
  return std::get<std::complex<double>>(value_) == std::complex<double>(0.0, 0.0);
}

bool Scalar::is_real() const {
  if (is_exact()) return exact().im == 0;
  return std::get<std::complex<double>>(value_).imag() == 0.0;
}

Scalar Scalar::conj() const {
  if (is_exact()) return Scalar(exact().re, -exact().im);
  return Scalar(std::conj(std::get<std::complex<double>>(value_)));
}

Scalar Scalar::operator-() const {
  if (is_exact()) return Scalar(-exact().re, -exact().im);
  return Scalar(-std::get<std::complex<double>>(value_));
}

Scalar& Scalar::operator+=(const Scalar& o) {
  if (is_exact() && o.is_exact()) {
    auto& c = std::get<ComplexRational>(value_);
    c.re += o.exact().re;
    c.im += o.exact().im;
  } else {
    value_ = to_complex() + o.to_complex();
  }
  return *this;
}

Scalar& Scalar::operator-=(const Scalar& o) {
  if (is_exact() && o.is_exact()) {
    auto& c = std::get<ComplexRational>(value_);
    c.re -= o.exact().re;
    c.im -= o.exact().im;
  } else {
    value_ = to_complex() - o.to_complex();
  }
  return *this;
}

Scalar& Scalar::operator*=(const Scalar& o) {
  if (is_exact() && o.is_exact()) {
    const auto& a = exact();
    const auto& b = o.exact();
    if (a.im == 0 && b.im == 0) {
      Rational re = a.re * b.re;
      value_ = ComplexRational{re, 0};
    } else {
      Rational re = a.re * b.re - a.im * b.im;
      Rational im = a.re * b.im + a.im * b.re;
      value_ = ComplexRational{re, im};
    }
  } else {
    value_ = to_complex() * o.to_complex();
  }
  return *this;
}

Scalar& Scalar::operator/=(const Scalar& o) {
  if (o.is_zero()) throw MathError("division by zero scalar");
  if (is_exact() && o.is_exact()) {
    const auto& a = exact();
    const auto& b = o.exact();
    Rational den = b.re * b.re + b.im * b.im;
    Rational re = (a.re * b.re + a.im * b.im) / den;
    Rational im = (a.im * b.re - a.re * b.im) / den;
    value_ = ComplexRational{re, im};
  } else {
    value_ = to_complex() / o.to_complex();
  }
  return *this;
}

bool operator==(const Scalar& a, const Scalar& b) {
  if (a.is_exact() && b.is_exact())
    return a.exact().re == b.exact().re && a.exact().im == b.exact().im;
  return a.to_complex() == b.to_complex();
}

std::string Scalar::to_string() const {
  std::string re, im;
  bool re_zero, im_zero;
  if (is_exact()) {
    re = format_rational(exact().re);
    im = format_rational(exact().im);
    re_zero = exact().re == 0;
    im_zero = exact().im == 0;
  } else {
    const auto c = std::get<std::complex<double>>(value_);
    re = format_double(c.real());
    im = format_double(c.imag());
    re_zero = c.real() == 0.0;
    im_zero = c.imag() == 0.0;
  }
  if (im_zero) return re;
  if (re_zero) return im + "*i";
  const bool neg_im = im.front() == '-';
  return "(" + re + (neg_im ? "" : "+") + im + "*i)";
}

}  // namespace rgkit
