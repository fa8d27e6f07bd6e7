#include "rgkit/autonomous.hpp"

#include <cmath>
#include <string>

#include "rgkit/errors.hpp"

namespace rgkit {

namespace {

bool is_integer(const Rational& q) {
  Rational c = q;
  c.canonicalize();
  return c.get_den() == 1;
}

int to_int(const Rational& q) {
  Rational c = q;
  c.canonicalize();
  if (c.get_den() != 1 || !c.get_num().fits_sint_p())
    throw MathError("frequency ratio is not a machine integer");
  return static_cast<int>(c.get_num().get_si());
}

// How the old basis and the nu_j embed into the basis of the rotating frame.
struct LatticeMap {
  BasisPtr basis;
  std::vector<std::vector<int>> old_axes;  // image of each old unit vector
  std::vector<std::vector<int>> nu;        // lattice vector of each nu_j
};

std::vector<int> scaled_unit(std::size_t dim, std::size_t l, int s) {
  std::vector<int> v(dim, 0);
  if (dim) v[l] = s;
  return v;
}

LatticeMap lattice_for(const std::vector<Rational>& nu, const FrequencyBasis& old) {
  const std::size_t d = old.dim();
  LatticeMap map;
  if (d >= 1) {
    // Keep the declared basis when every nu_j is a multiple of one of its values.
    std::vector<std::vector<int>> lat;
    bool ok = true;
    for (const auto& v : nu) {
      if (v == 0) {
        lat.emplace_back(d, 0);
        continue;
      }
      bool found = false;
      for (std::size_t l = 0; l < d && !found; ++l) {
        const Rational q = v / old.values()[l];
        if (is_integer(q)) {
          lat.push_back(scaled_unit(d, l, to_int(q)));
          found = true;
        }
      }
      ok = ok && found;
    }
    if (ok) {
      map.basis = std::make_shared<FrequencyBasis>(old);
      for (std::size_t l = 0; l < d; ++l) map.old_axes.push_back(scaled_unit(d, l, 1));
      map.nu = std::move(lat);
      return map;
    }
    if (d >= 2)
      throw InputError("nu is not on the lattice of the declared frequency basis");
  }
  Rational gen = d == 1 ? old.values()[0] : Rational(0);
  for (const auto& v : nu) gen = rational_gcd(gen, v);
  if (gen == 0) {
    map.basis = empty_basis();
    map.nu.assign(nu.size(), {});
    return map;
  }
  map.basis = make_basis({gen});
  if (d == 1) map.old_axes.push_back({to_int(old.values()[0] / gen)});
  for (const auto& v : nu) map.nu.push_back({to_int(v / gen)});
  return map;
}

Rational real_part(const Scalar& s) { return s.exact().re; }
Rational imag_part(const Scalar& s) { return s.exact().im; }

}  // namespace

ScalarMatrix invert(const ScalarMatrix& C) {
  const std::size_t n = C.size();
  ScalarMatrix a = C;
  ScalarMatrix inv(n, std::vector<Scalar>(n, Scalar(0)));
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].size() != n) throw InputError("transform matrix is not square");
    inv[i][i] = Scalar(1);
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = -1.0;
    for (std::size_t r = col; r < n; ++r) {
      const double mag = std::abs(a[r][col].to_complex());
      if (!a[r][col].is_zero() && mag > best) {
        best = mag;
        piv = r;
      }
    }
    if (best < 0.0) throw InputError("transform matrix is singular");
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const Scalar p = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= p;
      inv[col][j] /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || a[r][col].is_zero()) continue;
      const Scalar f = a[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

QPVector linear_change(const QPVector& v, const ScalarMatrix& C) {
  const std::size_t n = v.size();
  if (C.size() != n || v.n() != n) throw InputError("transform size does not match the system");
  const ScalarMatrix Ci = invert(C);
  const BasisPtr& basis = v.basis_ptr();
  std::vector<QPPoly> subs;
  for (std::size_t j = 0; j < n; ++j) {
    QPPoly s(n, basis);
    for (std::size_t l = 0; l < n; ++l)
      if (!Ci[j][l].is_zero()) s += QPPoly::variable(n, basis, l) * Ci[j][l];
    subs.push_back(std::move(s));
  }
  const QPVector pulled = qp_substitute(v, subs);
  QPVector out = QPVector::zero(n, n, basis);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!C[i][j].is_zero()) out[i] += pulled[j] * C[i][j];
  return out;
}

SystemPtr autonomize(const std::vector<Rational>& nu, const PerturbedSystem& g,
                     const std::optional<ScalarMatrix>& transform) {
  const std::size_t n = g.n;
  if (nu.size() != n)
    throw InputError("expected " + std::to_string(n) + " eigenvalue frequencies, got " +
                     std::to_string(nu.size()));
  const LatticeMap map = lattice_for(nu, *g.basis);
  const std::size_t d_old = g.basis->dim();
  const std::size_t d_new = map.basis->dim();

  std::map<int, QPVector> orders;
  for (const auto& [p, v] : g.orders) {
    QPVector out = QPVector::zero(n, n, map.basis);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& [key, c] : v[i].terms()) {
        const auto k_old = QPPoly::k_of(key, d_old);
        const auto alpha = QPPoly::alpha_of(key, d_old);
        std::vector<int> k(d_new, 0);
        for (std::size_t l = 0; l < d_old; ++l)
          for (std::size_t r = 0; r < d_new; ++r) k[r] += k_old[l] * map.old_axes[l][r];
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t r = 0; r < d_new; ++r) k[r] += alpha[j] * map.nu[j][r];
        for (std::size_t r = 0; r < d_new; ++r) k[r] -= map.nu[i][r];
        out[i].add_term(c, alpha, k);
      }
    }
    if (transform) out = linear_change(out, *transform);
    orders.emplace(p, std::move(out));
  }
  return make_system(n, map.basis, std::move(orders), g.mode);
}

NormalForm normal_form(const std::vector<Rational>& nu, const PerturbedSystem& g, int m) {
  if (g.basis->dim() != 0) throw InputError("normal form needs an autonomous perturbation");
  NormalForm nf;
  nf.nu = nu;
  nf.rg = rg_derive(autonomize(nu, g), m);
  const FrequencyBasis& basis = *nf.rg.system->basis;
  const std::size_t d = basis.dim();
  nf.time_independent_change = true;
  for (const auto& u : nf.rg.U) {
    for (std::size_t j = 0; j < u.size(); ++j) {
      for (const auto& [key, c] : u[j].terms()) {
        const auto alpha = QPPoly::alpha_of(key, d);
        Rational shift = -nu[j];
        for (std::size_t l = 0; l < alpha.size(); ++l) shift += alpha[l] * nu[l];
        if (basis.lambda(QPPoly::k_of(key, d)) != shift) nf.time_independent_change = false;
      }
    }
  }
  return nf;
}

std::vector<EquivarianceViolation> equivariance_check(const std::vector<Rational>& nu,
                                                      const RGResult& res) {
  const std::size_t n = res.system->n;
  if (nu.size() != n) throw InputError("frequency list does not match the state dimension");
  const std::size_t d = res.system->basis->dim();
  std::vector<EquivarianceViolation> bad;
  for (int i = 0; i < res.m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (const auto& [key, c] : res.R[i][j].terms()) {
        const auto alpha = QPPoly::alpha_of(key, d);
        Rational dot = 0;
        for (std::size_t l = 0; l < n; ++l) dot += alpha[l] * nu[l];
        if (dot != nu[j])
          bad.push_back({i + 1, j, std::vector<int>(alpha.begin(), alpha.end()), c});
      }
    }
  }
  return bad;
}

PolarForm polar_reduce(const RGResult& res) {
  if (res.system->n != 2) throw MathError("polar reduction needs two conjugate coordinates");
  if (!equivariance_check({Rational(1), Rational(-1)}, res).empty())
    throw MathError("RG equation is not invariant under the rotation action");
  const std::size_t d = res.system->basis->dim();
  const bool exact = res.system->mode == ScalarMode::Exact;
  const BasisPtr none = empty_basis();
  PolarForm out;
  for (int i = 0; i < res.m; ++i) {
    const QPVector& R = res.R[i];
    QPPoly conj_first(2, res.system->basis);
    for (const auto& [key, c] : R[0].terms()) {
      const auto alpha = QPPoly::alpha_of(key, d);
      const std::vector<int> swapped{alpha[1], alpha[0]};
      conj_first.add_term(c.conj(), swapped, QPPoly::k_of(key, d));
    }
    const QPPoly gap = conj_first - R[1];
    bool conjugate = gap.is_zero();
    if (!exact) {
      double scale = 1.0, err = 0.0;
      for (const auto& [key, c] : R[1].terms()) scale = std::max(scale, std::abs(c.to_complex()));
      for (const auto& [key, c] : gap.terms()) err = std::max(err, std::abs(c.to_complex()));
      conjugate = err <= 1e-9 * scale;
    }
    if (!conjugate) throw MathError("second component is not the conjugate of the first");

    QPPoly radial(1, none), angular(1, none);
    for (const auto& [key, c] : R[0].terms()) {
      const auto alpha = QPPoly::alpha_of(key, d);
      const int deg = alpha[0] + alpha[1];
      const std::vector<int> rad{deg}, ang{deg - 1};
      if (exact) {
        radial.add_term(Scalar(real_part(c)), rad, {});
        angular.add_term(Scalar(imag_part(c)), ang, {});
      } else {
        const auto z = c.to_complex();
        if (z.real() != 0.0) radial.add_term(Scalar::from_double(z.real()), rad, {});
        if (z.imag() != 0.0) angular.add_term(Scalar::from_double(z.imag()), ang, {});
      }
    }
    out.radial.push_back(std::move(radial));
    out.angular.push_back(std::move(angular));
  }
  return out;
}

}  // namespace rgkit
