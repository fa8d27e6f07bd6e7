#include "rgkit/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include "rgkit/errors.hpp"
#include "rgkit/scalar.hpp"

namespace rgkit {

enum class Op { Const, Var, Add, Mul, Div, Neg, Pow, Sin, Cos, Exp, Log, Sqrt };

struct Expr::Node {
  Op op;
  double value = 0.0;
  std::size_t index = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr leaf(Op op, double value, std::size_t index = 0) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->value = value;
  n->index = index;
  return n;
}

NodePtr inner(Op op, NodePtr a, NodePtr b = nullptr) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

double eval_node(const Expr::Node& n, std::span<const double> x) {
  switch (n.op) {
    case Op::Const: return n.value;
    case Op::Var: return x[n.index];
    case Op::Add: return eval_node(*n.a, x) + eval_node(*n.b, x);
    case Op::Mul: return eval_node(*n.a, x) * eval_node(*n.b, x);
    case Op::Div: return eval_node(*n.a, x) / eval_node(*n.b, x);
    case Op::Neg: return -eval_node(*n.a, x);
    case Op::Pow: {
      const double base = eval_node(*n.a, x);
      if (n.b->op == Op::Const) {
        const double e = n.b->value;
        if (e == std::round(e) && std::abs(e) <= 64) {
          double r = 1.0;
          for (int i = 0; i < static_cast<int>(std::abs(e)); ++i) r *= base;
          return e < 0 ? 1.0 / r : r;
        }
      }
      return std::pow(base, eval_node(*n.b, x));
    }
    case Op::Sin: return std::sin(eval_node(*n.a, x));
    case Op::Cos: return std::cos(eval_node(*n.a, x));
    case Op::Exp: return std::exp(eval_node(*n.a, x));
    case Op::Log: return std::log(eval_node(*n.a, x));
    case Op::Sqrt: return std::sqrt(eval_node(*n.a, x));
  }
  return 0.0;
}

int precedence(Op op) {
  switch (op) {
    case Op::Add: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

std::string print(const NodePtr& n, const std::vector<std::string>& names) {
  auto wrap = [&](const NodePtr& c, int min_prec) {
    const std::string s = print(c, names);
    return precedence(c->op) < min_prec || (c->op == Op::Const && c->value < 0) ? "(" + s + ")"
                                                                                 : s;
  };
  switch (n->op) {
    case Op::Const: return format_double(n->value);
    case Op::Var: return n->index < names.size() ? names[n->index] : "x" + std::to_string(n->index + 1);
    case Op::Add:
      if (n->b->op == Op::Neg) return print(n->a, names) + " - " + wrap(n->b->a, 2);
      return print(n->a, names) + " + " + print(n->b, names);
    case Op::Mul: return wrap(n->a, 2) + "*" + wrap(n->b, 3);
    case Op::Div: return wrap(n->a, 2) + "/" + wrap(n->b, 3);
    case Op::Neg: return "-" + wrap(n->a, 3);
    case Op::Pow: return wrap(n->a, 5) + "^" + wrap(n->b, 5);
    case Op::Sin: return "sin(" + print(n->a, names) + ")";
    case Op::Cos: return "cos(" + print(n->a, names) + ")";
    case Op::Exp: return "exp(" + print(n->a, names) + ")";
    case Op::Log: return "log(" + print(n->a, names) + ")";
    case Op::Sqrt: return "sqrt(" + print(n->a, names) + ")";
  }
  return "";
}

}  // namespace

Expr::Expr() : node_(leaf(Op::Const, 0.0)) {}
Expr Expr::constant(double v) { return Expr(leaf(Op::Const, v)); }
Expr Expr::variable(std::size_t index) { return Expr(leaf(Op::Var, 0.0, index)); }

double Expr::eval(std::span<const double> vars) const { return eval_node(*node_, vars); }
bool Expr::is_constant() const { return node_->op == Op::Const; }

std::string Expr::to_string(const std::vector<std::string>& names) const {
  return print(node_, names);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node_->value + b.node_->value);
  if (is_const(a.node_, 0.0)) return b;
  if (is_const(b.node_, 0.0)) return a;
  return Expr(inner(Op::Add, a.node_, b.node_));
}

Expr Expr::operator-() const {
  if (is_constant()) return constant(-node_->value);
  if (node_->op == Op::Neg) return Expr(node_->a);
  return Expr(inner(Op::Neg, node_));
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node_->value * b.node_->value);
  if (is_const(a.node_, 0.0) || is_const(b.node_, 0.0)) return Expr::constant(0.0);
  if (is_const(a.node_, 1.0)) return b;
  if (is_const(b.node_, 1.0)) return a;
  if (is_const(a.node_, -1.0)) return -b;
  if (is_const(b.node_, -1.0)) return -a;
  return Expr(inner(Op::Mul, a.node_, b.node_));
}

Expr operator/(const Expr& a, const Expr& b) {
  if (is_const(b.node_, 0.0)) throw InputError("division by the constant 0");
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node_->value / b.node_->value);
  if (is_const(a.node_, 0.0)) return Expr::constant(0.0);
  if (is_const(b.node_, 1.0)) return a;
  return Expr(inner(Op::Div, a.node_, b.node_));
}

Expr pow(const Expr& a, const Expr& b) {
  if (is_const(b.node_, 0.0)) return Expr::constant(1.0);
  if (is_const(b.node_, 1.0)) return a;
  if (a.is_constant() && b.is_constant())
    return Expr::constant(std::pow(a.node_->value, b.node_->value));
  return Expr(inner(Op::Pow, a.node_, b.node_));
}

Expr make_function(const std::string& name, const Expr& arg) {
  static const std::map<std::string, Op> ops{
      {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}};
  const Op op = ops.at(name);
  if (arg.is_constant()) return Expr::constant(eval_node(*inner(op, arg.node_), {}));
  return Expr(inner(op, arg.node_));
}

Expr Expr::diff(std::size_t index) const {
  const Node& n = *node_;
  auto sub = [](const NodePtr& p) { return Expr(p); };
  switch (n.op) {
    case Op::Const: return constant(0.0);
    case Op::Var: return constant(n.index == index ? 1.0 : 0.0);
    case Op::Add: return sub(n.a).diff(index) + sub(n.b).diff(index);
    case Op::Neg: return -sub(n.a).diff(index);
    case Op::Mul: {
      const Expr a = sub(n.a), b = sub(n.b);
      return a.diff(index) * b + a * b.diff(index);
    }
    case Op::Div: {
      const Expr a = sub(n.a), b = sub(n.b);
      return (a.diff(index) * b - a * b.diff(index)) / (b * b);
    }
    case Op::Pow: {
      const Expr a = sub(n.a), b = sub(n.b);
      if (b.is_constant()) {
        const double e = n.b->value;
        return constant(e) * pow(a, constant(e - 1.0)) * a.diff(index);
      }
      return *this * (b.diff(index) * make_function("log", a) + b * a.diff(index) / a);
    }
    case Op::Sin: return make_function("cos", sub(n.a)) * sub(n.a).diff(index);
    case Op::Cos: return -(make_function("sin", sub(n.a)) * sub(n.a).diff(index));
    case Op::Exp: return *this * sub(n.a).diff(index);
    case Op::Log: return sub(n.a).diff(index) / sub(n.a);
    case Op::Sqrt: return sub(n.a).diff(index) / (constant(2.0) * *this);
  }
  return constant(0.0);
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& vars,
         const std::map<std::string, double>& constants)
      : s_(text), vars_(vars), constants_(constants) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("expression \"" + s_ + "\" at position " + std::to_string(pos_) + ": " + msg);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+'))
        e = e + term();
      else if (accept('-'))
        e = e - term();
      else
        return e;
    }
  }
  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*'))
        e = e * unary();
      else if (accept('/'))
        e = e / unary();
      else
        return e;
    }
  }
  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }
  Expr power() {
    Expr base = atom();
    if (accept('^')) return pow(base, unary());
    return base;
  }
  Expr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (accept('(')) {
      Expr e = expr();
      if (!accept(')')) fail("missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return Expr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      for (std::size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i] == name) return Expr::variable(i);
      if (auto it = constants_.find(name); it != constants_.end()) return Expr::constant(it->second);
      if (name == "pi") return Expr::constant(std::numbers::pi);
      if (name == "sin" || name == "cos" || name == "exp" || name == "log" || name == "sqrt") {
        if (!accept('(')) fail("expected '(' after " + name);
        Expr arg = expr();
        if (!accept(')')) fail("missing ')'");
        return make_function(name, arg);
      }
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& constants_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(const std::string& text, const std::vector<std::string>& variables,
                const std::map<std::string, double>& constants) {
  return Parser(text, variables, constants).parse();
}

ExprVector::ExprVector(std::vector<Expr> comps, std::size_t nvars)
    : comps_(std::move(comps)), nvars_(nvars) {
  for (const auto& c : comps_)
    for (std::size_t j = 0; j < nvars_; ++j) jac_.push_back(c.diff(j));
}

std::vector<double> ExprVector::eval(std::span<const double> x) const {
  std::vector<double> out;
  out.reserve(comps_.size());
  for (const auto& c : comps_) out.push_back(c.eval(x));
  return out;
}

std::vector<double> ExprVector::jacobian(std::span<const double> x) const {
  std::vector<double> out;
  out.reserve(jac_.size());
  for (const auto& c : jac_) out.push_back(c.eval(x));
  return out;
}

}  // namespace rgkit
