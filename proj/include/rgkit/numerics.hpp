#pragma once

// ODE integration and the numeric checks built on it: error-order scans of
// the RG approximation, fixed points of RG equations and radial orbits.

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "rgkit/autonomous.hpp"
#include "rgkit/rg_core.hpp"

namespace rgkit {

/// Real vector field dx/dt = f(t, x); writes into dxdt.
using RealField = std::function<void(double t, std::span<const double> x, std::span<double> dxdt)>;

struct IntegratorConfig {
  enum class Method { RK4, DOPRI5 };
  Method method = Method::DOPRI5;
  double step = 1e-2;  // RK4 step; ignored by DOPRI5
  double abs_tol = 1e-10;
  double rel_tol = 1e-9;
  std::size_t max_steps = 20'000'000;
};

/// One accepted step with its continuous extension.
class DenseStep {
 public:
  double t0() const { return t0_; }
  double t1() const { return t0_ + h_; }
  /// State at the end of the step.
  std::span<const double> state() const { return end_; }
  /// State at any t between t0 and t1.
  void eval(double t, std::span<double> out) const;

 private:
  friend class Integrator;
  double t0_ = 0.0, h_ = 0.0;
  bool hermite_ = false;
  std::vector<double> end_;
  std::vector<double> coef_;  // 5 blocks of dim values
};

/// Called after each accepted step; return false to stop early.
using StepObserver = std::function<bool(const DenseStep&)>;

/// Integrates from t0 to t1 (either direction), returning the final state.
/// Throws NumericError on step size underflow, non-finite states or when
/// max_steps is exceeded.
std::vector<double> integrate(const RealField& f, std::vector<double> x0, double t0, double t1,
                              const IntegratorConfig& cfg, const StepObserver& observer = {});

/// Stored solution queryable at any t in its span.
class Trajectory {
 public:
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  std::size_t steps() const { return steps_.size(); }
  std::vector<double> at(double t) const;

 private:
  friend Trajectory solve(const RealField&, std::vector<double>, double, double,
                          const IntegratorConfig&);
  double t_begin_ = 0.0, t_end_ = 0.0;
  std::vector<double> x0_;
  std::vector<DenseStep> steps_;
};

Trajectory solve(const RealField& f, std::vector<double> x0, double t0, double t1,
                 const IntegratorConfig& cfg = {});

/// Double-precision evaluator of sum_p eps^p g_p(t, x).
class CompiledSystem {
 public:
  explicit CompiledSystem(const PerturbedSystem& sys);
  std::size_t n() const { return n_; }
  void eval(double t, std::span<const std::complex<double>> x, double eps,
            std::span<std::complex<double>> out) const;

 private:
  std::size_t n_;
  std::vector<std::pair<int, CompiledQPVector>> orders_;
};

/// Complex n-vectors stored as 2n reals (real parts, then imaginary parts).
std::vector<double> pack(std::span<const std::complex<double>> z);
std::vector<std::complex<double>> unpack(std::span<const double> x);

struct ErrorScanOptions {
  double horizon = 5.0;  // T in the time interval [0, T / eps^power]
  int power = 1;
  std::vector<double> eps_grid{0.04, 0.02, 0.01, 0.005};
  double escape_radius = 1e3;
  IntegratorConfig integrator{};
};

struct ErrorScanReport {
  std::vector<double> eps;
  std::vector<double> sup_error;
  std::vector<bool> escaped;  // escaped points are left out of the fit
  double slope = 0.0;         // least squares slope of log error against log eps
  double horizon = 0.0;
  int power = 1;
};

/// sup over 0 <= t <= T / eps^power of |x(t) - alpha_t(y(t))| where x solves
/// the system from alpha_0(y0) and y solves the RG equation from y0.
ErrorScanReport error_scan(const RGResult& res, std::span<const std::complex<double>> y0,
                           const ErrorScanOptions& opt = {});

/// Least squares slope of log(y) against log(x) over entries with x, y > 0.
double loglog_slope(std::span<const double> x, std::span<const double> y);

enum class Stability { Stable, Unstable, Saddle, NonHyperbolic };
const char* to_string(Stability s);

/// Real parts within this distance of zero give no stability conclusion.
inline constexpr double kHyperbolicityTol = 1e-8;

/// Classifies eigenvalues by the signs of their real parts.
Stability classify(std::span<const std::complex<double>> eigenvalues);

struct FixedPoint {
  std::vector<std::complex<double>> point;
  std::vector<std::complex<double>> eigenvalues;
  Stability stability;
  double residual;
};

struct FixedPointSearch {
  std::vector<FixedPoint> points;  // distinct converged points in seed order
  std::vector<std::size_t> failed_seeds;
};

/// Damped Newton iteration on sum_k eps^k R_k(y) with the symbolic Jacobian.
FixedPointSearch find_fixed_points(const RGResult& res, double eps,
                                   const std::vector<std::vector<std::complex<double>>>& seeds);

struct RadialOrbit {
  double radius;
  Stability stability;
};

/// Positive roots of the polynomial sum_j c_j r^j, polished by Newton, with
/// stability from the sign of the derivative.
std::vector<RadialOrbit> radial_orbits(const std::vector<double>& coeffs);

/// Same for dr/dt = sum_i eps^{i+1} radial_i(r).
std::vector<RadialOrbit> radial_orbits(const PolarForm& polar, double eps);

}  // namespace rgkit
