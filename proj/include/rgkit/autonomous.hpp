#pragma once

// Systems dx/dt = F x + eps g(x, eps) with F = diag(i nu_1, ..., i nu_n) and
// rational nu. The substitution x = e^{Ft} X turns them into the periodic form
// handled by rg_core.

#include <optional>
#include <vector>

#include "rgkit/qp_algebra.hpp"
#include "rgkit/rg_core.hpp"

namespace rgkit {

using ScalarMatrix = std::vector<std::vector<Scalar>>;

/// Exact inverse by Gauss-Jordan elimination. Throws InputError if singular.
ScalarMatrix invert(const ScalarMatrix& C);

/// Rewrites a field over z in the coordinates X = C z: X' = C v(C^{-1} X).
QPVector linear_change(const QPVector& v, const ScalarMatrix& C);

/// Moves to the rotating frame x = e^{Ft} X. A term c y^alpha in component i
/// of g_p becomes c y^alpha e^{i (alpha.nu - nu_i) t}.
///
/// The frequency basis of the result: for d = 0, the rational gcd of the
/// nonzero nu_j; for d >= 1, the declared basis if every nu_j is an integer
/// multiple of one of its values, otherwise (d = 1 only) the gcd of omega and
/// the nu_j with existing frequency vectors rescaled. When `transform` is
/// given the result is expressed in X = C Z instead of Z.
SystemPtr autonomize(const std::vector<Rational>& nu, const PerturbedSystem& g,
                     const std::optional<ScalarMatrix>& transform = std::nullopt);

struct NormalForm {
  std::vector<Rational> nu;
  RGResult rg;
  /// Every u^(i) term obeys lambda(k) = alpha.nu - nu_j, so the change of
  /// coordinates z = e^{Ft} alpha_t(e^{-Ft} z) does not depend on t.
  bool time_independent_change = false;
};

/// dz/dt = F z + sum_k eps^k R_k(z). Requires an autonomous g (d = 0).
NormalForm normal_form(const std::vector<Rational>& nu, const PerturbedSystem& g, int m);

struct EquivarianceViolation {
  int order;
  std::size_t component;
  std::vector<int> alpha;
  Scalar coeff;
};

/// Terms of R_1..R_m that are not resonant (alpha.nu != nu_j).
std::vector<EquivarianceViolation> equivariance_check(const std::vector<Rational>& nu,
                                                      const RGResult& res);

/// dr/dt and dtheta/dt per eps order for y_1 = r e^{i theta}, y_2 = r e^{-i theta}.
/// Entry i holds the eps^{i+1} coefficient as a real polynomial in r.
struct PolarForm {
  std::vector<QPPoly> radial;
  std::vector<QPPoly> angular;
};

/// Requires n = 2, equivariance under nu = (1, -1) and the second component
/// equal to the conjugate of the first. Throws MathError otherwise.
PolarForm polar_reduce(const RGResult& res);

}  // namespace rgkit
