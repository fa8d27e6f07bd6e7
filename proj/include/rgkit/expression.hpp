#pragma once

// Scalar expressions over named real variables: rational functions plus a few
// elementary functions, with symbolic differentiation. Used for the chart and
// field definitions of critical-manifold and phase inputs.
//
// Grammar: + - * / ^, unary minus, parentheses, numbers (decimal or p/q via
// division), variables, named constants and sin cos exp log sqrt.

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rgkit {

class Expr {
 public:
  struct Node;

  Expr();  // the constant 0
  static Expr constant(double v);
  static Expr variable(std::size_t index);

  double eval(std::span<const double> vars) const;
  Expr diff(std::size_t index) const;
  bool is_constant() const;
  std::string to_string(const std::vector<std::string>& names) const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  Expr operator-() const;
  friend Expr pow(const Expr& a, const Expr& b);

  const std::shared_ptr<const Node>& node() const { return node_; }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;

  friend Expr make_function(const std::string& name, const Expr& arg);
};

/// Parses `text` with the given variable names; identifiers found in
/// `constants` are replaced by their values. Throws InputError with the
/// offending position on malformed input or unknown identifiers.
Expr parse_expr(const std::string& text, const std::vector<std::string>& variables,
                const std::map<std::string, double>& constants = {});

/// A vector of expressions with its Jacobian built once.
class ExprVector {
 public:
  ExprVector() = default;
  ExprVector(std::vector<Expr> comps, std::size_t nvars);

  std::size_t size() const { return comps_.size(); }
  std::size_t nvars() const { return nvars_; }
  const Expr& operator[](std::size_t i) const { return comps_[i]; }

  std::vector<double> eval(std::span<const double> x) const;
  /// Row-major size() x nvars() Jacobian.
  std::vector<double> jacobian(std::span<const double> x) const;

 private:
  std::vector<Expr> comps_;
  std::vector<Expr> jac_;
  std::size_t nvars_ = 0;
};

}  // namespace rgkit
