#include "rgkit/rg_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rgkit/errors.hpp"

namespace rgkit {

namespace {

// Truncated power series in eps; entry r is the eps^r coefficient.
using Series = std::vector<QPPoly>;

Series mul_trunc(const Series& a, const Series& b, int L, const QPPoly& zero) {
  Series c(static_cast<std::size_t>(L) + 1, zero);
  const int na = std::min<int>(L, static_cast<int>(a.size()) - 1);
  for (int s = 0; s <= na; ++s) {
    if (a[s].is_zero()) continue;
    const int nb = std::min<int>(L - s, static_cast<int>(b.size()) - 1);
    for (int r = 0; r <= nb; ++r) {
      if (b[r].is_zero()) continue;
      c[s + r] += a[s] * b[r];
    }
  }
  return c;
}

// Entries 0..K of the eps-expansion of sum_p eps^p g_p(t, y + sum_j eps^j x_j).
std::vector<QPVector> graded_compose(const PerturbedSystem& sys,
                                     std::span<const QPVector> subs, int K) {
  const std::size_t n = sys.n;
  const std::size_t n_ext = subs.empty() ? n : subs[0].n();
  if (n_ext < n) throw BasisMismatch("substitutes live over fewer variables than y");
  for (const auto& x : subs) {
    if (x.size() != n || x.n() != n_ext)
      throw BasisMismatch("substitute dimensions disagree with the system");
    if (!(*x.basis_ptr() == *sys.basis))
      throw BasisMismatch("substitute basis differs from the system basis");
  }
  const BasisPtr& basis = sys.basis;
  const QPPoly zero(n_ext, basis);
  const int L_max = K - 1;

  std::vector<Series> shifted(n);
  for (std::size_t j = 0; j < n; ++j) {
    Series s(static_cast<std::size_t>(std::max(L_max, 0)) + 1, zero);
    s[0] = QPPoly::variable(n_ext, basis, j);
    for (int l = 1; l <= L_max && l <= static_cast<int>(subs.size()); ++l) s[l] = subs[l - 1][j];
    shifted[j] = std::move(s);
  }
  std::vector<std::vector<Series>> powers(n);
  auto power = [&](std::size_t j, int e) -> const Series& {
    auto& cache = powers[j];
    if (cache.empty()) {
      Series one(1, QPPoly::constant(n_ext, basis, Scalar(1)));
      cache.push_back(std::move(one));
    }
    while (static_cast<int>(cache.size()) <= e)
      cache.push_back(mul_trunc(cache.back(), shifted[j], L_max, zero));
    return cache[e];
  };

  std::vector<QPVector> out(static_cast<std::size_t>(K) + 1,
                            QPVector::zero(n, n_ext, basis));
  const std::size_t d = basis->dim();
  const std::vector<int> zero_alpha(n_ext, 0);
  for (const auto& [p, g] : sys.orders) {
    if (p > K) break;
    const int L = K - p;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& [key, c] : g[i].terms()) {
        Series term(1, QPPoly::monomial(n_ext, basis, c, zero_alpha, QPPoly::k_of(key, d)));
        for (std::size_t j = 0; j < n; ++j) {
          const int e = key[d + j];
          if (e > 0) term = mul_trunc(term, power(j, e), L, zero);
        }
        for (int r = 0; r < static_cast<int>(term.size()) && r <= L; ++r)
          out[p + r][i] += term[r];
      }
    }
  }
  return out;
}

bool is_time_independent(const QPVector& v) { return qp_average_t(v) == v; }

double max_abs_coeff(const QPVector& v) {
  double m = 0.0;
  for (const auto& c : v.components())
    for (const auto& [key, s] : c.terms()) m = std::max(m, std::abs(s.to_complex()));
  return m;
}

bool same_vector(const QPVector& a, const QPVector& b, ScalarMode mode) {
  if (mode == ScalarMode::Exact) return a == b;
  const double scale = std::max({1.0, max_abs_coeff(a), max_abs_coeff(b)});
  return max_abs_coeff(a - b) <= 1e-9 * scale;
}

RGResult derive(SystemPtr sys, int m, std::vector<QPVector> gauge) {
  if (!sys) throw InputError("no system given");
  if (m < 1) throw InputError("RG order must be at least 1");
  RGResult res;
  res.m = m;
  res.system = sys;
  res.gauge = std::move(gauge);
  const std::size_t n = sys->n;
  for (int i = 1; i <= m; ++i) {
    QPVector T = collect_G(*sys, res.U, i);
    QPVector secular = QPVector::zero(n, n, sys->basis);
    for (int k = 1; k < i; ++k) secular += jacobian_apply(res.U[k - 1], res.R[i - k - 1]);
    if (!res.gauged() && !qp_average_t(secular).is_zero())
      throw MathError("order " + std::to_string(i) +
                      ": secular correction has a nonzero time average");
    T -= secular;
    QPVector R = qp_average_t(T);
    QPVector u = qp_antiderivative_t(T - R);
    if (res.gauged()) u += res.gauge[i - 1];
    res.R.push_back(std::move(R));
    res.U.push_back(std::move(u));
  }
  return res;
}

}  // namespace

const QPVector* PerturbedSystem::order(int p) const {
  auto it = orders.find(p);
  return it == orders.end() ? nullptr : &it->second;
}

SystemPtr make_system(std::size_t n, BasisPtr basis, std::map<int, QPVector> orders,
                      ScalarMode mode) {
  if (!basis) basis = empty_basis();
  auto sys = std::make_shared<PerturbedSystem>();
  sys->n = n;
  sys->basis = basis;
  sys->mode = mode;
  for (auto& [p, g] : orders) {
    const std::string where = "order " + std::to_string(p);
    if (p < 1) throw InputError(where + ": orders start at 1");
    if (g.size() != n || g.n() != n)
      throw InputError(where + ": expected " + std::to_string(n) + " components over " +
                       std::to_string(n) + " variables");
    if (!(*g.basis_ptr() == *basis)) throw InputError(where + ": frequency basis mismatch");
    if (mode == ScalarMode::Exact) {
      for (const auto& c : g.components())
        if (!c.is_exact()) throw InputError(where + ": float coefficient in exact mode");
    } else {
      g = qp_to_mode(g, ScalarMode::Float);
    }
    sys->orders.emplace(p, std::move(g));
  }
  return sys;
}

QPVector collect_G(const PerturbedSystem& sys, std::span<const QPVector> subs, int K) {
  if (K < 1) throw InputError("collection order must be at least 1");
  return graded_compose(sys, subs, K)[K];
}

RGResult rg_derive(SystemPtr sys, int m) { return derive(std::move(sys), m, {}); }

std::vector<QPVector> rg_transform_symbolic(const RGResult& res) {
  std::vector<QPVector> graded;
  graded.push_back(QPVector::identity(res.system->n, res.system->basis));
  for (const auto& u : res.U) graded.push_back(u);
  return graded;
}

CompiledRG::CompiledRG(const RGResult& res) : n_(res.system->n) {
  for (const auto& R : res.R) {
    R_.emplace_back(R);
    std::vector<CompiledQPVector> cols;
    for (std::size_t j = 0; j < n_; ++j) {
      std::vector<QPPoly> dj;
      for (const auto& c : R.components()) dj.push_back(qp_diff_y(c, j));
      cols.emplace_back(QPVector(std::move(dj)));
    }
    DR_.push_back(std::move(cols));
  }
  for (const auto& u : res.U) U_.emplace_back(u);
}

std::vector<std::complex<double>> CompiledRG::field(std::span<const std::complex<double>> y,
                                                    double eps) const {
  std::vector<std::complex<double>> out(n_), tmp(n_);
  double w = 1.0;
  for (const auto& R : R_) {
    w *= eps;
    R.eval(0.0, y, tmp);
    for (std::size_t i = 0; i < n_; ++i) out[i] += w * tmp[i];
  }
  return out;
}

std::vector<std::complex<double>> CompiledRG::jacobian(
    std::span<const std::complex<double>> y, double eps) const {
  std::vector<std::complex<double>> J(n_ * n_), tmp(n_);
  double w = 1.0;
  for (const auto& cols : DR_) {
    w *= eps;
    for (std::size_t j = 0; j < n_; ++j) {
      cols[j].eval(0.0, y, tmp);
      for (std::size_t i = 0; i < n_; ++i) J[i * n_ + j] += w * tmp[i];
    }
  }
  return J;
}

std::vector<std::complex<double>> CompiledRG::transform(
    double t, std::span<const std::complex<double>> y, double eps) const {
  std::vector<std::complex<double>> out(y.begin(), y.end()), tmp(n_);
  double w = 1.0;
  for (const auto& u : U_) {
    w *= eps;
    u.eval(t, y, tmp);
    for (std::size_t i = 0; i < n_; ++i) out[i] += w * tmp[i];
  }
  return out;
}

std::vector<QPVector> conjugacy_residual(const RGResult& res, int M) {
  if (M < res.m) throw InputError("residual order must be at least the RG order");
  const PerturbedSystem& sys = *res.system;
  const std::size_t n = sys.n;
  const QPVector zero = QPVector::zero(n, n, sys.basis);
  auto u = [&](int k) -> const QPVector& { return k <= res.m ? res.U[k - 1] : zero; };

  // W_K = G_K(t, y, u_1..u_{K-1}) - d/dt u_K
  std::vector<QPVector> subs(res.U.begin(), res.U.begin() + std::min(res.m, M - 1));
  std::vector<QPVector> W = graded_compose(sys, subs, M);
  for (int K = 1; K <= M; ++K) W[K] -= qp_diff_t(u(K));

  // dy/dt = (I + J)^{-1} W with J = sum_k eps^k Du_k, expanded as a Neumann series.
  std::vector<QPVector> total = W, term = W;
  for (int iter = 1; iter <= M; ++iter) {
    std::vector<QPVector> next(M + 1, zero);
    bool any = false;
    for (int r = 1; r <= M; ++r) {
      for (int k = 1; k <= std::min(res.m, r - 1); ++k) {
        if (term[r - k].is_zero()) continue;
        next[r] -= jacobian_apply(u(k), term[r - k]);
      }
      any = any || !next[r].is_zero();
    }
    if (!any) break;
    for (int r = 1; r <= M; ++r) total[r] += next[r];
    term = std::move(next);
  }

  std::vector<QPVector> residual;
  for (int K = 1; K <= M; ++K) {
    QPVector r = total[K];
    if (K <= res.m) r -= res.R[K - 1];
    residual.push_back(std::move(r));
  }
  return residual;
}

RGResult apply_gauge(const RGResult& res, std::vector<QPVector> B) {
  const PerturbedSystem& sys = *res.system;
  const std::size_t n = sys.n;
  if (B.size() > static_cast<std::size_t>(res.m))
    throw InputError("more gauge fields than RG orders");
  while (B.size() < static_cast<std::size_t>(res.m))
    B.push_back(QPVector::zero(n, n, sys.basis));
  bool all_zero = true;
  for (std::size_t i = 0; i < B.size(); ++i) {
    if (B[i].size() != n || B[i].n() != n || !(*B[i].basis_ptr() == *sys.basis))
      throw InputError("gauge field " + std::to_string(i + 1) + " has the wrong shape");
    if (!is_time_independent(B[i]))
      throw InputError("gauge field " + std::to_string(i + 1) + " depends on t");
    if (sys.mode == ScalarMode::Float) B[i] = qp_to_mode(B[i], ScalarMode::Float);
    all_zero = all_zero && B[i].is_zero();
  }
  const RGResult base = res.gauged() ? rg_derive(res.system, res.m) : res;
  if (all_zero) return base;

  RGResult gauged = derive(res.system, res.m, std::move(B));
  if (!same_vector(gauged.R[0], base.R[0], sys.mode))
    throw MathError("gauge changed the first order RG equation");
  if (res.m >= 2 &&
      !same_vector(gauged.R[1], base.R[1] - lie_bracket(gauged.gauge[0], base.R[0]),
                   sys.mode))
    throw MathError("gauged second order term violates the commutator identity");
  return gauged;
}

std::vector<std::vector<QPVector>> regular_perturbation_coeffs(const RGResult& res, int K) {
  if (K < 1 || K > res.m) throw InputError("table order must lie in 1..m");
  const std::size_t n = res.system->n;
  const BasisPtr& basis = res.system->basis;
  std::vector<std::vector<QPVector>> p(K);
  for (int i = 1; i <= K; ++i) {
    QPVector p1 = res.R[i - 1];
    for (int k = 1; k < i; ++k) p1 += jacobian_apply(res.U[k - 1], res.R[i - k - 1]);
    p[i - 1].push_back(std::move(p1));
    for (int j = 2; j <= i; ++j) {
      QPVector s = QPVector::zero(n, n, basis);
      for (int k = j - 1; k < i; ++k) s += jacobian_apply(p[k - 1][j - 2], res.R[i - k - 1]);
      p[i - 1].push_back(Scalar(Rational(1, j)) * s);
    }
  }
  return p;
}

}  // namespace rgkit
