#pragma once

// Restricted RG reduction on critical manifolds of fixed points
//
//     x' = f(x) + eps g_1(x) + eps^2 g_2(x),   f(U(alpha)) = 0,
//
// and phase reduction onto a stable limit cycle of x' = f(x).

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgkit/expression.hpp"
#include "rgkit/numerics.hpp"

namespace rgkit {

using VecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct CriticalManifoldChart {
  std::size_t n = 0;  // ambient dimension
  std::size_t k = 0;  // chart dimension
  VecFn U;            // alpha -> R^n
  MatFn DU;           // n x k; central differences when empty
  VecFn f;
  MatFn Df;
  VecFn g1;
  MatFn Dg1;  // central differences when empty
  VecFn g2;   // zero when empty
  double gap = 1e-3;  // nonzero eigenvalues of Df must have real part < -gap
};

/// Vector field and symbolic Jacobian from expression strings over `vars`.
struct ExprField {
  VecFn value;
  MatFn jacobian;
};
ExprField expr_field(const std::vector<std::string>& comps, const std::vector<std::string>& vars,
                     const std::map<std::string, double>& params = {});

/// Textual chart definition: U over the chart variables, f, g1, g2 over the
/// state variables. An empty g2 means zero.
struct ChartExpressions {
  std::vector<std::string> state_vars, chart_vars;
  std::vector<std::string> U, f, g1, g2;
  std::map<std::string, double> params;
  double gap = 1e-3;
};
CriticalManifoldChart make_chart(const ChartExpressions& def);

/// Checks f(U) = 0 (1e-10) and the spectral gap (k eigenvalues within 1e-8
/// of 0, the rest with real part < -gap) at each sample. Throws InputError.
void validate_chart(const CriticalManifoldChart& chart,
                    const std::vector<Eigen::VectorXd>& samples);

/// Unique decomposition g = DU a + A w with w in range(A).
struct TangentStableSplit {
  Eigen::MatrixXd tangent;  // k x n: g -> a
  Eigen::MatrixXd stable;   // n x n: g -> w
};

/// Throws MathError when ker A is not spanned by DU or the split is singular.
TangentStableSplit tangent_stable_split(const Eigen::MatrixXd& A, const Eigen::MatrixXd& DU);

/// Pointwise restricted RG data on the chart, evaluated lazily in alpha.
class GspReduction {
 public:
  /// order is 1 or 2.
  GspReduction(CriticalManifoldChart chart, int order);

  int order() const { return order_; }
  const CriticalManifoldChart& chart() const { return chart_; }

  /// Chart velocity coefficient a_i(alpha) of eps^i, i = 1..order.
  Eigen::VectorXd field(const Eigen::VectorXd& alpha, int i) const;
  /// sum_i eps^i a_i(alpha).
  Eigen::VectorXd reduced(const Eigen::VectorXd& alpha, double eps) const;
  /// Graph correction h^(i)(alpha), i = 1..order.
  Eigen::VectorXd correction(const Eigen::VectorXd& alpha, int i) const;

  /// x(alpha) = U + sum_i eps^i h^(i).
  Eigen::VectorXd graph(const Eigen::VectorXd& alpha, double eps) const;
  /// |f(x) + eps g_1(x) + eps^2 g_2(x) - Dx(alpha) reduced(alpha)| at x = graph(alpha).
  double invariance_defect(const Eigen::VectorXd& alpha, double eps) const;

 private:
  struct Point {
    Eigen::VectorXd a1, h1, a2, h2;
  };
  Point first_order(const Eigen::VectorXd& alpha) const;
  Point solve(const Eigen::VectorXd& alpha) const;
  Eigen::MatrixXd chart_jacobian(const Eigen::VectorXd& alpha) const;
  Eigen::MatrixXd g1_jacobian(const Eigen::VectorXd& x) const;

  CriticalManifoldChart chart_;
  int order_;
};

/// Fixed points of the reduced chart field with stability.
FixedPointSearch stability_on_manifold(const GspReduction& red, double eps,
                                       const std::vector<Eigen::VectorXd>& seeds);

struct PhaseModel {
  double period = 0.0;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> orbit;    // U(t)
  std::vector<Eigen::VectorXd> adjoint;  // Q(t)
  double normalization_residual = 0.0;   // max |Q(t) . f(U(t)) - 1|
  double coupling = 0.0;                 // d alpha/dt = eps * coupling
};

struct PhaseOptions {
  std::optional<double> period_guess;  // estimated from section crossings when empty
  double transient = 50.0;             // settling time before the period search
  std::size_t samples = 200;
  IntegratorConfig integrator{.abs_tol = 1e-12, .rel_tol = 1e-11};
};

/// Finds the limit cycle through shooting from `seed`, the normalized
/// periodic adjoint and the averaged coupling of g_1. Throws NumericError when
/// no cycle is found and MathError when the multiplier 1 is not simple.
PhaseModel phase_reduce(const VecFn& f, const MatFn& Df, const VecFn& g1,
                        const Eigen::VectorXd& seed, const PhaseOptions& opt = {});

}  // namespace rgkit
