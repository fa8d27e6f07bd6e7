#pragma once

// Exact ring of quasi-periodic polynomials: finite sums
//
//     c * y^alpha * exp(i * lambda(k) * t),   lambda(k) = sum_j k_j * omega_j,
//
// with integer frequency vectors k over a declared basis of rational
// frequencies. Every time-dependent object of the derivation (vector fields,
// transformations, residuals) is built from these.

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rgkit/scalar.hpp"

namespace rgkit {

/// Rational frequencies omega_1..omega_d (radians per unit time), all nonzero.
class FrequencyBasis {
 public:
  FrequencyBasis() = default;
  explicit FrequencyBasis(std::vector<Rational> omega);

  std::size_t dim() const { return omega_.size(); }
  const std::vector<Rational>& values() const { return omega_; }

  /// lambda(k) = sum k_j omega_j, exact.
  Rational lambda(std::span<const int> k) const;
  double lambda_double(std::span<const int> k) const;

  /// Common generator g with every omega_j an integer multiple of g; every
  /// quasi-periodic function over this basis is 2*pi/g periodic. Absent for d = 0.
  const std::optional<Rational>& fundamental() const { return fundamental_; }
  /// 2*pi / fundamental, or 0 for d = 0.
  double period() const;

  friend bool operator==(const FrequencyBasis& a, const FrequencyBasis& b) {
    return a.omega_ == b.omega_;
  }

 private:
  std::vector<Rational> omega_;
  std::optional<Rational> fundamental_;
};

using BasisPtr = std::shared_ptr<const FrequencyBasis>;

BasisPtr make_basis(std::vector<Rational> omega);
BasisPtr empty_basis();

/// Term key: frequency vector k (length d) followed by the exponent alpha
/// (length n). Lexicographic order on this key is the canonical term order.
using TermKey = std::vector<int>;
using TermMap = std::map<TermKey, Scalar>;

class QPPoly {
 public:
  QPPoly() : QPPoly(0, empty_basis()) {}
  QPPoly(std::size_t n, BasisPtr basis);

  static QPPoly constant(std::size_t n, BasisPtr basis, const Scalar& c);
  static QPPoly variable(std::size_t n, BasisPtr basis, std::size_t j);
  static QPPoly monomial(std::size_t n, BasisPtr basis, const Scalar& c,
                         std::span<const int> alpha, std::span<const int> k);

  std::size_t n() const { return n_; }
  std::size_t d() const { return basis_->dim(); }
  const FrequencyBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  /// True when every coefficient is exact (an empty polynomial is exact).
  bool is_exact() const;
  /// Highest total degree in the state variables; -1 for zero.
  int degree() const;

  Scalar coeff(std::span<const int> alpha, std::span<const int> k) const;

  /// Accumulates c * y^alpha * e^{i lambda(k) t}; drops the key on cancellation.
  void add_term(const Scalar& c, std::span<const int> alpha, std::span<const int> k);
  void add_term(const Scalar& c, const TermKey& key);

  static std::span<const int> k_of(const TermKey& key, std::size_t d) {
    return {key.data(), d};
  }
  static std::span<const int> alpha_of(const TermKey& key, std::size_t d) {
    return {key.data() + d, key.size() - d};
  }

  QPPoly& operator+=(const QPPoly& o);
  QPPoly& operator-=(const QPPoly& o);
  QPPoly& operator*=(const Scalar& c);
  friend QPPoly operator+(QPPoly a, const QPPoly& b) { return a += b; }
  friend QPPoly operator-(QPPoly a, const QPPoly& b) { return a -= b; }
  friend QPPoly operator*(QPPoly a, const Scalar& c) { return a *= c; }
  friend QPPoly operator*(const Scalar& c, QPPoly a) { return a *= c; }
  friend QPPoly operator*(const QPPoly& a, const QPPoly& b);
  QPPoly operator-() const;

  /// Same terms, same dimension, same basis values.
  friend bool operator==(const QPPoly& a, const QPPoly& b);
  friend bool operator!=(const QPPoly& a, const QPPoly& b) { return !(a == b); }

 private:
  std::size_t n_;
  BasisPtr basis_;
  TermMap terms_;
};

/// Throws BasisMismatch unless a and b agree on n and the basis values.
void require_compatible(const QPPoly& a, const QPPoly& b);

QPPoly qp_add(const QPPoly& a, const QPPoly& b);
QPPoly qp_mul(const QPPoly& a, const QPPoly& b);
QPPoly qp_pow(const QPPoly& a, unsigned e);

/// Partial derivative in y_j (0-based).
QPPoly qp_diff_y(const QPPoly& p, std::size_t j);

/// Time derivative: each term multiplied by i*lambda(k).
QPPoly qp_diff_t(const QPPoly& p);

/// The k = 0 slice (time average). Throws ZeroFrequencyCollision when a
/// term with k != 0 has lambda(k) = 0.
QPPoly qp_average_t(const QPPoly& p);

/// Zero-mean antiderivative: each term divided by i*lambda(k). Throws
/// MeanNotZero if a k = 0 term is present, ZeroFrequencyCollision if
/// lambda(k) = 0 for some k != 0.
QPPoly qp_antiderivative_t(const QPPoly& p);

/// Polynomial composition p(t, y_1 <- s_1, ..., y_n <- s_n). The substitutes
/// may live over a different number of state variables; the result does too.
QPPoly qp_substitute(const QPPoly& p, std::span<const QPPoly> subs);

/// Pads (or renumbers) state variables: y_j maps to y_{map[j]} in a space of
/// n_new variables.
QPPoly qp_remap_vars(const QPPoly& p, std::size_t n_new, std::span<const std::size_t> map);

/// Converts every coefficient to the requested scalar mode.
QPPoly qp_to_mode(const QPPoly& p, ScalarMode mode);

/// Numeric value sum c * y^alpha * e^{i lambda(k) t} in double precision.
std::complex<double> qp_eval(const QPPoly& p, double t,
                             std::span<const std::complex<double>> y);

/// Double-precision evaluator with coefficients and frequencies converted once.
class CompiledQP {
 public:
  CompiledQP() = default;
  explicit CompiledQP(const QPPoly& p);
  std::complex<double> operator()(double t, std::span<const std::complex<double>> y) const;
  std::size_t n() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::complex<double>> coeff_;
  std::vector<double> lambda_;      // distinct frequencies
  std::vector<std::size_t> freq_;   // per term index into lambda_
  std::vector<int> alpha_;          // n_ exponents per term, flattened
  int max_degree_ = 0;
};

/// Column of n QPPoly values sharing state dimension and basis.
class QPVector {
 public:
  QPVector() = default;
  explicit QPVector(std::vector<QPPoly> comps);
  static QPVector zero(std::size_t dim, std::size_t n, BasisPtr basis);
  /// (y_1, ..., y_n)
  static QPVector identity(std::size_t n, BasisPtr basis);

  std::size_t size() const { return comps_.size(); }
  std::size_t n() const { return n_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const QPPoly& operator[](std::size_t i) const { return comps_[i]; }
  QPPoly& operator[](std::size_t i) { return comps_[i]; }
  const std::vector<QPPoly>& components() const { return comps_; }
  bool is_zero() const;

  QPVector& operator+=(const QPVector& o);
  QPVector& operator-=(const QPVector& o);
  QPVector& operator*=(const Scalar& c);
  friend QPVector operator+(QPVector a, const QPVector& b) { return a += b; }
  friend QPVector operator-(QPVector a, const QPVector& b) { return a -= b; }
  friend QPVector operator*(const Scalar& c, QPVector a) { return a *= c; }
  QPVector operator-() const;
  friend bool operator==(const QPVector& a, const QPVector& b) {
    return a.comps_ == b.comps_;
  }
  friend bool operator!=(const QPVector& a, const QPVector& b) { return !(a == b); }

 private:
  std::size_t n_ = 0;
  BasisPtr basis_ = empty_basis();
  std::vector<QPPoly> comps_;
};

/// Componentwise map helpers.
QPVector qp_average_t(const QPVector& v);
QPVector qp_antiderivative_t(const QPVector& v);
QPVector qp_diff_t(const QPVector& v);
QPVector qp_substitute(const QPVector& v, std::span<const QPPoly> subs);
QPVector qp_remap_vars(const QPVector& v, std::size_t n_new,
                       std::span<const std::size_t> map);
QPVector qp_to_mode(const QPVector& v, ScalarMode mode);

/// Directional derivative (Du) * w = sum_j (d u / d y_j) * w_j.
QPVector jacobian_apply(const QPVector& u, const QPVector& w);

/// Lie bracket [B, R] = (DB) R - (DR) B.
QPVector lie_bracket(const QPVector& b, const QPVector& r);

class CompiledQPVector {
 public:
  CompiledQPVector() = default;
  explicit CompiledQPVector(const QPVector& v);
  void eval(double t, std::span<const std::complex<double>> y,
            std::span<std::complex<double>> out) const;
  std::vector<std::complex<double>> operator()(double t,
                                               std::span<const std::complex<double>> y) const;
  std::size_t size() const { return comps_.size(); }

 private:
  std::vector<CompiledQP> comps_;
};

}  // namespace rgkit
