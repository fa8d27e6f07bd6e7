#include "rgkit/qp_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rgkit/errors.hpp"

namespace rgkit {

namespace {

bool all_zero(std::span<const int> v) {
  return std::all_of(v.begin(), v.end(), [](int x) { return x == 0; });
}

std::string format_k(std::span<const int> k) {
  std::string s = "(";
  for (std::size_t j = 0; j < k.size(); ++j) {
    if (j) s += ",";
    s += std::to_string(k[j]);
  }
  return s + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// FrequencyBasis

FrequencyBasis::FrequencyBasis(std::vector<Rational> omega) : omega_(std::move(omega)) {
  for (auto& w : omega_) {
    w.canonicalize();
    if (w == 0) throw InputError("frequency basis values must be nonzero");
  }
  if (!omega_.empty()) {
    Rational g = 0;
    for (const auto& w : omega_) g = rational_gcd(g, w);
    fundamental_ = g;
  }
}

Rational FrequencyBasis::lambda(std::span<const int> k) const {
  Rational s = 0;
  for (std::size_t j = 0; j < omega_.size(); ++j)
    if (k[j] != 0) s += omega_[j] * k[j];
  return s;
}

double FrequencyBasis::lambda_double(std::span<const int> k) const {
  return lambda(k).get_d();
}

double FrequencyBasis::period() const {
  if (!fundamental_) return 0.0;
  return 2.0 * std::numbers::pi / fundamental_->get_d();
}

BasisPtr make_basis(std::vector<Rational> omega) {
  return std::make_shared<const FrequencyBasis>(std::move(omega));
}

BasisPtr empty_basis() {
  static const BasisPtr empty = std::make_shared<const FrequencyBasis>();
  return empty;
}

// ---------------------------------------------------------------------------
// QPPoly

QPPoly::QPPoly(std::size_t n, BasisPtr basis) : n_(n), basis_(std::move(basis)) {}

QPPoly QPPoly::constant(std::size_t n, BasisPtr basis, const Scalar& c) {
  QPPoly p(n, std::move(basis));
  p.add_term(c, TermKey(p.d() + n, 0));
  return p;
}

QPPoly QPPoly::variable(std::size_t n, BasisPtr basis, std::size_t j) {
  QPPoly p(n, std::move(basis));
  TermKey key(p.d() + n, 0);
  key[p.d() + j] = 1;
  p.add_term(Scalar(1), key);
  return p;
}

QPPoly QPPoly::monomial(std::size_t n, BasisPtr basis, const Scalar& c,
                        std::span<const int> alpha, std::span<const int> k) {
  QPPoly p(n, std::move(basis));
  p.add_term(c, alpha, k);
  return p;
}

bool QPPoly::is_exact() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const auto& kv) { return kv.second.is_exact(); });
}

int QPPoly::degree() const {
  int deg = -1;
  for (const auto& [key, c] : terms_) {
    int s = 0;
    for (int a : alpha_of(key, d())) s += a;
    deg = std::max(deg, s);
  }
  return deg;
}

Scalar QPPoly::coeff(std::span<const int> alpha, std::span<const int> k) const {
  TermKey key(k.begin(), k.end());
  key.insert(key.end(), alpha.begin(), alpha.end());
  auto it = terms_.find(key);
  return it == terms_.end() ? Scalar(0) : it->second;
}

void QPPoly::add_term(const Scalar& c, std::span<const int> alpha, std::span<const int> k) {
  if (alpha.size() != n_ || k.size() != d())
    throw BasisMismatch("term shape does not match polynomial (n, d)");
  TermKey key(k.begin(), k.end());
  key.insert(key.end(), alpha.begin(), alpha.end());
  add_term(c, key);
}

void QPPoly::add_term(const Scalar& c, const TermKey& key) {
  if (c.is_zero()) return;
  auto [it, inserted] = terms_.try_emplace(key, c);
  if (!inserted) {
    it->second += c;
    if (it->second.is_zero()) terms_.erase(it);
  }
}

void require_compatible(const QPPoly& a, const QPPoly& b) {
  if (a.n() != b.n())
    throw BasisMismatch("state dimension mismatch: " + std::to_string(a.n()) + " vs " +
                        std::to_string(b.n()));
  if (a.basis_ptr() != b.basis_ptr() && !(a.basis() == b.basis()))
    throw BasisMismatch("frequency basis mismatch");
}

QPPoly& QPPoly::operator+=(const QPPoly& o) {
  require_compatible(*this, o);
  for (const auto& [key, c] : o.terms_) add_term(c, key);
  return *this;
}

QPPoly& QPPoly::operator-=(const QPPoly& o) {
  require_compatible(*this, o);
  for (const auto& [key, c] : o.terms_) add_term(-c, key);
  return *this;
}

QPPoly& QPPoly::operator*=(const Scalar& c) {
  if (c.is_zero()) {
    terms_.clear();
    return *this;
  }
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= c;
    it = it->second.is_zero() ? terms_.erase(it) : std::next(it);
  }
  return *this;
}

QPPoly QPPoly::operator-() const {
  QPPoly r = *this;
  for (auto& [key, c] : r.terms_) c = -c;
  return r;
}

QPPoly operator*(const QPPoly& a, const QPPoly& b) {
  require_compatible(a, b);
  QPPoly r(a.n_, a.basis_);
  TermKey key(a.d() + a.n_);
  for (const auto& [ka, ca] : a.terms_) {
    for (const auto& [kb, cb] : b.terms_) {
      for (std::size_t i = 0; i < key.size(); ++i) key[i] = ka[i] + kb[i];
      r.add_term(ca * cb, key);
    }
  }
  return r;
}

bool operator==(const QPPoly& a, const QPPoly& b) {
  if (a.n_ != b.n_) return false;
  if (a.basis_ != b.basis_ && !(*a.basis_ == *b.basis_)) return false;
  return a.terms_ == b.terms_;
}

// ---------------------------------------------------------------------------
// Operations

QPPoly qp_add(const QPPoly& a, const QPPoly& b) { return a + b; }
QPPoly qp_mul(const QPPoly& a, const QPPoly& b) { return a * b; }

QPPoly qp_pow(const QPPoly& a, unsigned e) {
  QPPoly r = QPPoly::constant(a.n(), a.basis_ptr(), Scalar(1));
  QPPoly base = a;
  while (e) {
    if (e & 1U) r = r * base;
    e >>= 1U;
    if (e) base = base * base;
  }
  return r;
}

QPPoly qp_diff_y(const QPPoly& p, std::size_t j) {
  QPPoly r(p.n(), p.basis_ptr());
  if (j >= p.n()) return r;
  const std::size_t slot = p.d() + j;
  for (const auto& [key, c] : p.terms()) {
    const int a = key[slot];
    if (a == 0) continue;
    TermKey nk = key;
    nk[slot] = a - 1;
    r.add_term(c * Scalar(a), nk);
  }
  return r;
}

QPPoly qp_diff_t(const QPPoly& p) {
  QPPoly r(p.n(), p.basis_ptr());
  for (const auto& [key, c] : p.terms()) {
    const Rational lam = p.basis().lambda(QPPoly::k_of(key, p.d()));
    if (c.is_exact()) {
      r.add_term(c * Scalar(Rational(0), lam), key);
    } else {
      r.add_term(c * Scalar(std::complex<double>(0.0, lam.get_d())), key);
    }
  }
  return r;
}

QPPoly qp_average_t(const QPPoly& p) {
  QPPoly r(p.n(), p.basis_ptr());
  for (const auto& [key, c] : p.terms()) {
    const auto k = QPPoly::k_of(key, p.d());
    if (all_zero(k)) {
      r.add_term(c, key);
    } else if (p.basis().lambda(k) == 0) {
      throw ZeroFrequencyCollision("frequency vector " + format_k(k) +
                                   " evaluates to zero over the declared basis");
    }
  }
  return r;
}

QPPoly qp_antiderivative_t(const QPPoly& p) {
  QPPoly r(p.n(), p.basis_ptr());
  for (const auto& [key, c] : p.terms()) {
    const auto k = QPPoly::k_of(key, p.d());
    if (all_zero(k)) throw MeanNotZero("antiderivative of a function with nonzero mean");
    const Rational lam = p.basis().lambda(k);
    if (lam == 0)
      throw ZeroFrequencyCollision("frequency vector " + format_k(k) +
                                   " evaluates to zero over the declared basis");
    if (c.is_exact()) {
      r.add_term(c / Scalar(Rational(0), lam), key);
    } else {
      r.add_term(c / Scalar(std::complex<double>(0.0, lam.get_d())), key);
    }
  }
  return r;
}

QPPoly qp_substitute(const QPPoly& p, std::span<const QPPoly> subs) {
  if (subs.size() != p.n())
    throw BasisMismatch("substitution needs exactly one substitute per variable");
  const std::size_t n_new = subs.empty() ? 0 : subs[0].n();
  for (const auto& s : subs) {
    if (s.n() != n_new) throw BasisMismatch("substitutes disagree on state dimension");
    if (!(s.basis() == p.basis())) throw BasisMismatch("substitute basis mismatch");
  }
  const std::size_t d = p.d();
  // powers[j][e] = subs[j]^e, filled lazily
  std::vector<std::vector<QPPoly>> powers(p.n());
  auto power = [&](std::size_t j, int e) -> const QPPoly& {
    auto& cache = powers[j];
    if (cache.empty()) cache.push_back(QPPoly::constant(n_new, p.basis_ptr(), Scalar(1)));
    while (static_cast<int>(cache.size()) <= e) cache.push_back(cache.back() * subs[j]);
    return cache[e];
  };

  QPPoly r(n_new, p.basis_ptr());
  std::vector<int> zero_alpha(n_new, 0);
  for (const auto& [key, c] : p.terms()) {
    QPPoly term = QPPoly::monomial(n_new, p.basis_ptr(), c, zero_alpha, QPPoly::k_of(key, d));
    for (std::size_t j = 0; j < p.n() && !term.is_zero(); ++j) {
      const int e = key[d + j];
      if (e > 0) term = term * power(j, e);
    }
    r += term;
  }
  return r;
}

QPPoly qp_remap_vars(const QPPoly& p, std::size_t n_new, std::span<const std::size_t> map) {
  if (map.size() != p.n()) throw BasisMismatch("variable map has wrong length");
  QPPoly r(n_new, p.basis_ptr());
  const std::size_t d = p.d();
  for (const auto& [key, c] : p.terms()) {
    TermKey nk(d + n_new, 0);
    std::copy(key.begin(), key.begin() + static_cast<long>(d), nk.begin());
    for (std::size_t j = 0; j < p.n(); ++j) {
      if (map[j] >= n_new) throw BasisMismatch("variable map target out of range");
      nk[d + map[j]] += key[d + j];
    }
    r.add_term(c, nk);
  }
  return r;
}

QPPoly qp_to_mode(const QPPoly& p, ScalarMode mode) {
  QPPoly r(p.n(), p.basis_ptr());
  for (const auto& [key, c] : p.terms()) r.add_term(c.to_mode(mode), key);
  return r;
}

std::complex<double> qp_eval(const QPPoly& p, double t,
                             std::span<const std::complex<double>> y) {
  return CompiledQP(p)(t, y);
}

// ---------------------------------------------------------------------------
// CompiledQP

CompiledQP::CompiledQP(const QPPoly& p) : n_(p.n()) {
  const std::size_t d = p.d();
  std::map<Rational, std::size_t> freq_index;
  for (const auto& [key, c] : p.terms()) {
    coeff_.push_back(c.to_complex());
    const Rational lam = p.basis().lambda(QPPoly::k_of(key, d));
    auto [it, inserted] = freq_index.try_emplace(lam, lambda_.size());
    if (inserted) lambda_.push_back(lam.get_d());
    freq_.push_back(it->second);
    int deg = 0;
    for (std::size_t j = 0; j < n_; ++j) {
      alpha_.push_back(key[d + j]);
      deg += key[d + j];
    }
    max_degree_ = std::max(max_degree_, deg);
  }
}

std::complex<double> CompiledQP::operator()(double t,
                                            std::span<const std::complex<double>> y) const {
  std::vector<std::complex<double>> phase(lambda_.size());
  for (std::size_t f = 0; f < lambda_.size(); ++f)
    phase[f] = lambda_[f] == 0.0 ? std::complex<double>(1.0, 0.0)
                                 : std::polar(1.0, lambda_[f] * t);
  // pw[j * (max_degree_ + 1) + e] = y_j^e
  const std::size_t stride = static_cast<std::size_t>(max_degree_) + 1;
  std::vector<std::complex<double>> pw(n_ * stride);
  for (std::size_t j = 0; j < n_; ++j) {
    pw[j * stride] = 1.0;
    for (std::size_t e = 1; e < stride; ++e) pw[j * stride + e] = pw[j * stride + e - 1] * y[j];
  }
  std::complex<double> sum = 0.0;
  for (std::size_t i = 0; i < coeff_.size(); ++i) {
    std::complex<double> term = coeff_[i] * phase[freq_[i]];
    for (std::size_t j = 0; j < n_; ++j) {
      const int a = alpha_[i * n_ + j];
      if (a) term *= pw[j * stride + static_cast<std::size_t>(a)];
    }
    sum += term;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// QPVector

QPVector::QPVector(std::vector<QPPoly> comps) : comps_(std::move(comps)) {
  if (!comps_.empty()) {
    n_ = comps_[0].n();
    basis_ = comps_[0].basis_ptr();
    for (const auto& c : comps_) require_compatible(comps_[0], c);
  }
}

QPVector QPVector::zero(std::size_t dim, std::size_t n, BasisPtr basis) {
  std::vector<QPPoly> comps(dim, QPPoly(n, basis));
  QPVector v(std::move(comps));
  v.n_ = n;
  v.basis_ = std::move(basis);
  return v;
}

QPVector QPVector::identity(std::size_t n, BasisPtr basis) {
  std::vector<QPPoly> comps;
  for (std::size_t j = 0; j < n; ++j) comps.push_back(QPPoly::variable(n, basis, j));
  QPVector v(std::move(comps));
  v.n_ = n;
  v.basis_ = std::move(basis);
  return v;
}

bool QPVector::is_zero() const {
  return std::all_of(comps_.begin(), comps_.end(), [](const QPPoly& p) { return p.is_zero(); });
}

QPVector& QPVector::operator+=(const QPVector& o) {
  if (o.size() != size()) throw BasisMismatch("vector length mismatch");
  for (std::size_t i = 0; i < size(); ++i) comps_[i] += o.comps_[i];
  return *this;
}

QPVector& QPVector::operator-=(const QPVector& o) {
  if (o.size() != size()) throw BasisMismatch("vector length mismatch");
  for (std::size_t i = 0; i < size(); ++i) comps_[i] -= o.comps_[i];
  return *this;
}

QPVector& QPVector::operator*=(const Scalar& c) {
  for (auto& p : comps_) p *= c;
  return *this;
}

QPVector QPVector::operator-() const {
  QPVector r = *this;
  for (auto& p : r.comps_) p = -p;
  return r;
}

namespace {

template <typename F>
QPVector map_components(const QPVector& v, F&& f) {
  std::vector<QPPoly> out;
  out.reserve(v.size());
  for (const auto& p : v.components()) out.push_back(f(p));
  if (out.empty()) return v;
  return QPVector(std::move(out));
}

}  // namespace

QPVector qp_average_t(const QPVector& v) {
  return map_components(v, [](const QPPoly& p) { return qp_average_t(p); });
}

QPVector qp_antiderivative_t(const QPVector& v) {
  return map_components(v, [](const QPPoly& p) { return qp_antiderivative_t(p); });
}

QPVector qp_diff_t(const QPVector& v) {
  return map_components(v, [](const QPPoly& p) { return qp_diff_t(p); });
}

QPVector qp_substitute(const QPVector& v, std::span<const QPPoly> subs) {
  return map_components(v, [&](const QPPoly& p) { return qp_substitute(p, subs); });
}

QPVector qp_remap_vars(const QPVector& v, std::size_t n_new,
                       std::span<const std::size_t> map) {
  return map_components(v, [&](const QPPoly& p) { return qp_remap_vars(p, n_new, map); });
}

QPVector qp_to_mode(const QPVector& v, ScalarMode mode) {
  return map_components(v, [&](const QPPoly& p) { return qp_to_mode(p, mode); });
}

QPVector jacobian_apply(const QPVector& u, const QPVector& w) {
  if (w.size() != u.n()) throw BasisMismatch("direction vector must have n components");
  QPVector r = QPVector::zero(u.size(), u.n(), u.basis_ptr());
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < u.n(); ++j) {
      if (w[j].is_zero()) continue;
      QPPoly du = qp_diff_y(u[i], j);
      if (!du.is_zero()) r[i] += du * w[j];
    }
  }
  return r;
}

QPVector lie_bracket(const QPVector& b, const QPVector& r) {
  return jacobian_apply(b, r) - jacobian_apply(r, b);
}

CompiledQPVector::CompiledQPVector(const QPVector& v) {
  for (const auto& p : v.components()) comps_.emplace_back(p);
}

void CompiledQPVector::eval(double t, std::span<const std::complex<double>> y,
                            std::span<std::complex<double>> out) const {
  for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = comps_[i](t, y);
}

std::vector<std::complex<double>> CompiledQPVector::operator()(
    double t, std::span<const std::complex<double>> y) const {
  std::vector<std::complex<double>> out(comps_.size());
  eval(t, y, out);
  return out;
}

}  // namespace rgkit
