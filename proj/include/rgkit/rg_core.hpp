#pragma once

// Higher-order RG equations and RG transformations for
//
//     dx/dt = eps g_1(t, x) + eps^2 g_2(t, x) + ...
//
// with quasi-periodic polynomial right-hand sides. eps stays formal here; it
// only becomes a number inside the evaluators.

#include <complex>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "rgkit/qp_algebra.hpp"

namespace rgkit {

struct PerturbedSystem {
  std::size_t n = 0;
  BasisPtr basis = empty_basis();
  ScalarMode mode = ScalarMode::Exact;
  std::map<int, QPVector> orders;  // p >= 1 -> g_p

  /// g_p, or nullptr when the order is absent.
  const QPVector* order(int p) const;
  int max_order() const { return orders.empty() ? 0 : orders.rbegin()->first; }
};

using SystemPtr = std::shared_ptr<const PerturbedSystem>;

/// Validates dimensions and bases and converts every coefficient to `mode`.
/// Throws InputError on inconsistent data or float coefficients in exact mode.
SystemPtr make_system(std::size_t n, BasisPtr basis, std::map<int, QPVector> orders,
                      ScalarMode mode = ScalarMode::Exact);

struct RGResult {
  int m = 0;
  std::vector<QPVector> R;      // R_1..R_m, time independent
  std::vector<QPVector> U;      // u^(1)..u^(m)
  std::vector<QPVector> gauge;  // B_1..B_m; empty means zero integral constants
  SystemPtr system;

  bool gauged() const { return !gauge.empty(); }
};

/// Coefficient of eps^K in sum_p eps^p g_p(t, y + sum_j eps^j x_j).
///
/// `subs` holds x_1..x_{K-1} (missing entries count as zero). The substitutes
/// may live over more variables than the system; the first n of them are y.
QPVector collect_G(const PerturbedSystem& sys, std::span<const QPVector> subs, int K);

/// m-th order RG equation and transformation with zero integral constants.
RGResult rg_derive(SystemPtr sys, int m);

/// [identity, u^(1), ..., u^(m)]: the eps-graded RG transformation.
std::vector<QPVector> rg_transform_symbolic(const RGResult& res);

/// Double-precision evaluators for a derived result.
class CompiledRG {
 public:
  explicit CompiledRG(const RGResult& res);

  std::size_t n() const { return n_; }
  int order() const { return static_cast<int>(R_.size()); }

  /// sum_k eps^k R_k(y)
  std::vector<std::complex<double>> field(std::span<const std::complex<double>> y,
                                          double eps) const;
  /// Jacobian of field(y, eps), row-major n x n.
  std::vector<std::complex<double>> jacobian(std::span<const std::complex<double>> y,
                                             double eps) const;
  /// alpha_t(y) = y + sum_k eps^k u^(k)(t, y)
  std::vector<std::complex<double>> transform(double t,
                                              std::span<const std::complex<double>> y,
                                              double eps) const;

 private:
  std::size_t n_ = 0;
  std::vector<CompiledQPVector> R_;
  std::vector<CompiledQPVector> U_;
  std::vector<std::vector<CompiledQPVector>> DR_;  // DR_[k][j] = d R_{k+1} / d y_j
};

/// eps-expansion, orders 1..M, of the vector field satisfied by y when
/// x = alpha_t(y) solves the system, minus sum_k eps^k R_k. Orders 1..m vanish.
std::vector<QPVector> conjugacy_residual(const RGResult& res, int M);

/// Re-derives with u^(i) = B_i + (mean-zero part). Each B_i must be time
/// independent; a shorter list is padded with zeros. Checks R~_1 = R_1 and
/// R~_2 = R_2 - [B_1, R_1] against the zero-constant derivation.
RGResult apply_gauge(const RGResult& res, std::vector<QPVector> B);

/// table[i-1][j-1] = p^(i)_j for 1 <= j <= i <= K: the coefficient of t^j in
/// the regular perturbation term x_i = u^(i) + sum_j p^(i)_j t^j.
std::vector<std::vector<QPVector>> regular_perturbation_coeffs(const RGResult& res, int K);

}  // namespace rgkit
