#include "rgkit/linear_floquet.hpp"

#include <future>

#include <unsupported/Eigen/MatrixFunctions>

#include "rgkit/errors.hpp"

namespace rgkit {

namespace {

QPMatrix zero_matrix(std::size_t n, const BasisPtr& basis) {
  return QPMatrix(n, std::vector<QPPoly>(n, QPPoly(0, basis)));
}

QPMatrix mul(const QPMatrix& a, const QPMatrix& b) {
  const std::size_t n = a.size();
  QPMatrix out = zero_matrix(n, a[0][0].basis_ptr());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t l = 0; l < n; ++l)
        if (!a[i][l].is_zero() && !b[l][j].is_zero()) out[i][j] += a[i][l] * b[l][j];
  return out;
}

void add_to(QPMatrix& a, const QPMatrix& b, bool subtract = false) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (subtract)
        a[i][j] -= b[i][j];
      else
        a[i][j] += b[i][j];
    }
}

template <class F>
QPMatrix map_entries(const QPMatrix& a, F f) {
  QPMatrix out = a;
  for (auto& row : out)
    for (auto& e : row) e = f(e);
  return out;
}

Eigen::MatrixXcd evaluate(const QPMatrix& a, double t) {
  const std::size_t n = a.size();
  Eigen::MatrixXcd out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = qp_eval(a[i][j], t, {});
  return out;
}

}  // namespace

MatrixFourierSeries make_matrix_series(std::size_t n, BasisPtr basis,
                                       std::map<int, QPMatrix> orders, ScalarMode mode) {
  if (n == 0) throw InputError("matrix dimension must be positive");
  if (!basis || basis->dim() != 1)
    throw InputError("a linear periodic system needs exactly one base frequency");
  MatrixFourierSeries A;
  A.n = n;
  A.basis = basis;
  A.mode = mode;
  for (auto& [p, mat] : orders) {
    if (p < 1) throw InputError("matrix orders start at 1");
    if (mat.size() != n) throw InputError("matrix A_" + std::to_string(p) + " has the wrong size");
    for (auto& row : mat) {
      if (row.size() != n)
        throw InputError("matrix A_" + std::to_string(p) + " has the wrong size");
      for (auto& e : row) {
        if (e.n() != 0) throw InputError("matrix entries must not depend on state variables");
        if (e.basis() != *basis) throw BasisMismatch("matrix entries use a different basis");
        if (mode == ScalarMode::Exact && !e.is_exact())
          throw InputError("float coefficient in an exact matrix series");
        e = qp_to_mode(e, mode);
      }
    }
    A.orders.emplace(p, std::move(mat));
  }
  return A;
}

LinearRGResult linear_rg(const MatrixFourierSeries& A, int m) {
  if (m < 1) throw InputError("order m must be at least 1");
  LinearRGResult res;
  res.m = m;
  res.A = A;
  const QPMatrix zero = zero_matrix(A.n, A.basis);
  for (int i = 1; i <= m; ++i) {
    const auto it = A.orders.find(i);
    QPMatrix T = it == A.orders.end() ? zero : it->second;
    for (int k = 1; k < i; ++k) {
      if (auto a = A.orders.find(i - k); a != A.orders.end()) add_to(T, mul(a->second, res.U[k - 1]));
      add_to(T, mul(res.U[k - 1], res.R[i - k - 1]), true);
    }
    QPMatrix R = map_entries(T, [](const QPPoly& p) { return qp_average_t(p); });
    add_to(T, R, true);
    res.U.push_back(map_entries(T, [](const QPPoly& p) { return qp_antiderivative_t(p); }));
    res.R.push_back(std::move(R));
  }
  return res;
}

Eigen::MatrixXcd rg_matrix(const LinearRGResult& res, double eps) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(res.A.n, res.A.n);
  double power = 1.0;
  for (const auto& R : res.R) {
    power *= eps;
    out += power * evaluate(R, 0.0);
  }
  return out;
}

Eigen::MatrixXcd rg_alpha(const LinearRGResult& res, double t, double eps) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(res.A.n, res.A.n);
  double power = 1.0;
  for (const auto& U : res.U) {
    power *= eps;
    out += power * evaluate(U, t);
  }
  return out;
}

std::vector<std::complex<double>> floquet_exponents(const LinearRGResult& res, double eps) {
  const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(rg_matrix(res, eps), false);
  const auto& ev = es.eigenvalues();
  std::vector<std::complex<double>> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

Eigen::MatrixXcd monodromy_numeric(const MatrixFourierSeries& A, double eps,
                                   const IntegratorConfig& cfg) {
  const std::size_t n = A.n;
  std::vector<std::pair<int, std::vector<CompiledQP>>> compiled;
  for (const auto& [p, mat] : A.orders) {
    std::vector<CompiledQP> entries;
    for (const auto& row : mat)
      for (const auto& e : row) entries.emplace_back(e);
    compiled.emplace_back(p, std::move(entries));
  }
  RealField f = [&](double t, std::span<const double> x, std::span<double> dx) {
    const auto X = unpack(x);
    Eigen::MatrixXcd At = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& [p, entries] : compiled) {
      const double w = std::pow(eps, p);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) At(i, j) += w * entries[i * n + j](t, {});
    }
    const Eigen::Map<const Eigen::MatrixXcd> Xm(X.data(), n, n);
    const Eigen::MatrixXcd D = At * Xm;
    const auto packed = pack(std::span<const std::complex<double>>(D.data(), n * n));
    std::copy(packed.begin(), packed.end(), dx.begin());
  };
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  const auto x = integrate(f, pack(std::span<const std::complex<double>>(I.data(), n * n)), 0.0,
                           A.period(), cfg);
  const auto X = unpack(x);
  return Eigen::Map<const Eigen::MatrixXcd>(X.data(), n, n);
}

MonodromyCheck monodromy_check(const LinearRGResult& res, double eps,
                               const IntegratorConfig& cfg) {
  MonodromyCheck out;
  const double T = res.A.period();
  out.predicted = (rg_matrix(res, eps) * T).exp();
  const Eigen::MatrixXcd a0 = rg_alpha(res, 0.0, eps);
  out.measured = a0.inverse() * monodromy_numeric(res.A, eps, cfg) * a0;
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(out.predicted - out.measured);
  out.defect = svd.singularValues()(0);
  return out;
}

std::vector<ExponentSample> exponent_sweep(const LinearRGResult& res,
                                           const std::vector<double>& eps_grid,
                                           const IntegratorConfig& cfg) {
  const double T = res.A.period();
  std::vector<std::future<ExponentSample>> jobs;
  for (double eps : eps_grid) {
    jobs.push_back(std::async(std::launch::async, [&res, &cfg, eps, T] {
      ExponentSample s;
      s.eps = eps;
      s.defect = monodromy_check(res, eps, cfg).defect;
      s.exponents = floquet_exponents(res, eps);
      s.collision = false;
      for (std::size_t i = 0; i < s.exponents.size(); ++i)
        for (std::size_t j = i + 1; j < s.exponents.size(); ++j)
          if (std::abs(std::exp(s.exponents[i] * T) - std::exp(s.exponents[j] * T)) < kCollisionTol)
            s.collision = true;
      return s;
    }));
  }
  std::vector<ExponentSample> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace rgkit
