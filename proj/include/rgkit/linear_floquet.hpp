#pragma once

// RG series for linear periodic systems
//
//     dx/dt = eps A(t, eps) x,   A = A_1(t) + eps A_2(t) + ...
//
// Everything here is matrix valued: R_i are constant matrices and u^(i) are
// periodic matrix series with zero mean.

#include <complex>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "rgkit/numerics.hpp"
#include "rgkit/qp_algebra.hpp"

namespace rgkit {

/// n x n matrix of scalar Fourier series (QPPoly over zero state variables).
using QPMatrix = std::vector<std::vector<QPPoly>>;

struct MatrixFourierSeries {
  std::size_t n = 0;
  BasisPtr basis = empty_basis();
  ScalarMode mode = ScalarMode::Exact;
  std::map<int, QPMatrix> orders;  // p >= 1 -> A_p

  double period() const { return basis->period(); }
};

/// Validates shapes (n x n, zero state variables, shared single-frequency
/// basis) and converts coefficients to `mode`.
MatrixFourierSeries make_matrix_series(std::size_t n, BasisPtr basis,
                                       std::map<int, QPMatrix> orders,
                                       ScalarMode mode = ScalarMode::Exact);

struct LinearRGResult {
  int m = 0;
  std::vector<QPMatrix> R;  // constant entries
  std::vector<QPMatrix> U;  // zero-mean periodic entries
  MatrixFourierSeries A;
};

/// Matrix recursion with zero integral constants.
LinearRGResult linear_rg(const MatrixFourierSeries& A, int m);

/// R(eps) = sum_{k <= m} eps^k R_k.
Eigen::MatrixXcd rg_matrix(const LinearRGResult& res, double eps);

/// alpha_t = id + sum_{k <= m} eps^k u^(k)_t.
Eigen::MatrixXcd rg_alpha(const LinearRGResult& res, double t, double eps);

/// Eigenvalues of R(eps).
std::vector<std::complex<double>> floquet_exponents(const LinearRGResult& res, double eps);

/// Fundamental matrix at one period started from the identity, i.e.
/// X(0)^{-1} X(T) for the numerically integrated X.
Eigen::MatrixXcd monodromy_numeric(const MatrixFourierSeries& A, double eps,
                                   const IntegratorConfig& cfg = {});

struct MonodromyCheck {
  Eigen::MatrixXcd predicted;  // e^{R(eps) T}
  Eigen::MatrixXcd measured;   // alpha_0^{-1} Phi(T) alpha_0
  double defect = 0.0;         // spectral norm of the difference
};

MonodromyCheck monodromy_check(const LinearRGResult& res, double eps,
                               const IntegratorConfig& cfg = {});

/// Multipliers closer than this are flagged as a collision.
inline constexpr double kCollisionTol = 1e-6;

struct ExponentSample {
  double eps;
  double defect;
  std::vector<std::complex<double>> exponents;
  bool collision;  // two multipliers e^{mu T} within kCollisionTol
};

/// Exponents and monodromy defect along a real eps sweep; samples run in
/// parallel.
std::vector<ExponentSample> exponent_sweep(const LinearRGResult& res,
                                           const std::vector<double>& eps_grid,
                                           const IntegratorConfig& cfg = {});

}  // namespace rgkit
