#include "rgkit/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rgkit/errors.hpp"

namespace rgkit {

using cd = std::complex<double>;

// Dormand-Prince 5(4) tableau with Hairer's continuous extension.
namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void DenseStep::eval(double t, std::span<double> out) const {
  const std::size_t n = end_.size();
  const double th = h_ == 0.0 ? 1.0 : (t - t0_) / h_;
  const double th1 = 1.0 - th;
  const double* c = coef_.data();
  if (hermite_) {
    // c: y0, y1, h f0, h f1
    const double h00 = (1 + 2 * th) * th1 * th1, h10 = th * th1 * th1;
    const double h01 = th * th * (3 - 2 * th), h11 = -th * th * th1;
    for (std::size_t i = 0; i < n; ++i)
      out[i] = h00 * c[i] + h01 * c[n + i] + h10 * c[2 * n + i] + h11 * c[3 * n + i];
    return;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = c[i] + th * (c[n + i] + th1 * (c[2 * n + i] +
                                            th * (c[3 * n + i] + th1 * c[4 * n + i])));
}

class Integrator {
 public:
  Integrator(const RealField& f, const IntegratorConfig& cfg) : f_(f), cfg_(cfg) {}

  std::vector<double> run(std::vector<double> x, double t0, double t1,
                          const StepObserver& observer) {
    const std::size_t n = x.size();
    if (!all_finite(x)) throw NumericError("non-finite initial state");
    if (t1 == t0 || n == 0) return x;
    const double dir = t1 > t0 ? 1.0 : -1.0;
    if (cfg_.method == IntegratorConfig::Method::RK4) return rk4(std::move(x), t0, t1, observer);
    return dopri(std::move(x), t0, t1, dir, observer);
  }

 private:
  void call(double t, const std::vector<double>& x, std::vector<double>& dx) { f_(t, x, dx); }

  std::vector<double> rk4(std::vector<double> x, double t0, double t1,
                          const StepObserver& observer) {
    const std::size_t n = x.size();
    if (!(cfg_.step > 0.0)) throw InputError("RK4 step must be positive");
    const auto total = static_cast<std::size_t>(std::ceil(std::abs(t1 - t0) / cfg_.step - 1e-9));
    if (total > cfg_.max_steps) throw NumericError("RK4 would exceed the step limit");
    const double h = (t1 - t0) / static_cast<double>(std::max<std::size_t>(total, 1));
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), f_end(n);
    DenseStep step;
    step.hermite_ = true;
    call(t0, x, k1);
    for (std::size_t s = 0; s < std::max<std::size_t>(total, 1); ++s) {
      const double t = t0 + static_cast<double>(s) * h;
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
      call(t + 0.5 * h, tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
      call(t + 0.5 * h, tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
      call(t + h, tmp, k4);
      std::vector<double> x1(n);
      for (std::size_t i = 0; i < n; ++i)
        x1[i] = x[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      if (!all_finite(x1)) throw NumericError("non-finite state during integration");
      const double t_next = s + 1 == total ? t1 : t + h;
      call(t_next, x1, f_end);
      if (observer) {
        step.t0_ = t;
        step.h_ = t_next - t;
        step.end_ = x1;
        step.coef_.assign(4 * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          step.coef_[i] = x[i];
          step.coef_[n + i] = x1[i];
          step.coef_[2 * n + i] = step.h_ * k1[i];
          step.coef_[3 * n + i] = step.h_ * f_end[i];
        }
        if (!observer(step)) return x1;
      }
      x = std::move(x1);
      k1 = f_end;
    }
    return x;
  }

  double norm(const std::vector<double>& v, const std::vector<double>& sk) const {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] / sk[i]) * (v[i] / sk[i]);
    return std::sqrt(s / static_cast<double>(v.size()));
  }

  double initial_step(double t0, const std::vector<double>& x0, const std::vector<double>& f0,
                      double dir, double span) {
    const std::size_t n = x0.size();
    std::vector<double> sk(n), x1(n), f1(n), diff(n);
    for (std::size_t i = 0; i < n; ++i) sk[i] = cfg_.abs_tol + cfg_.rel_tol * std::abs(x0[i]);
    const double dnf = norm(f0, sk), dny = norm(x0, sk);
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h = std::min(h, span);
    for (std::size_t i = 0; i < n; ++i) x1[i] = x0[i] + dir * h * f0[i];
    call(t0 + dir * h, x1, f1);
    for (std::size_t i = 0; i < n; ++i) diff[i] = f1[i] - f0[i];
    const double der2 = norm(diff, sk) / h;
    const double der12 = std::max(std::abs(der2), dnf);
    const double h1 =
        der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 1.0 / 5.0);
    return std::min({100 * h, h1, span});
  }

  std::vector<double> dopri(std::vector<double> x, double t0, double t1, double dir,
                            const StepObserver& observer) {
    const std::size_t n = x.size();
    if (!(cfg_.abs_tol > 0.0) || !(cfg_.rel_tol > 0.0))
      throw InputError("integrator tolerances must be positive");
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y1(n), tmp(n),
        err(n), sk(n);
    call(t0, x, k1);
    const double span = std::abs(t1 - t0);
    double h = initial_step(t0, x, k1, dir, span);
    double t = t0;
    bool last_rejected = false;
    std::size_t steps = 0;
    DenseStep step;
    while (dir * (t1 - t) > 0.0) {
      if (++steps > cfg_.max_steps) throw NumericError("integrator exceeded the step limit");
      if (h < 1e-14 * std::max(1.0, std::abs(t))) throw NumericError("step size underflow");
      bool final_step = false;
      if (h >= std::abs(t1 - t)) {
        h = std::abs(t1 - t);
        final_step = true;
      }
      const double hs = dir * h;
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + hs * a21 * k1[i];
      call(t + c2 * hs, tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      call(t + c3 * hs, tmp, k3);
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = x[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      call(t + c4 * hs, tmp, k4);
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = x[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      call(t + c5 * hs, tmp, k5);
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = x[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      const double t_new = final_step ? t1 : t + hs;
      call(t_new, tmp, k6);
      for (std::size_t i = 0; i < n; ++i)
        y1[i] = x[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      call(t_new, y1, k7);
      for (std::size_t i = 0; i < n; ++i) {
        err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        sk[i] = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(x[i]), std::abs(y1[i]));
      }
      const double e = all_finite(y1) ? norm(err, sk) : std::numeric_limits<double>::infinity();
      if (!(e <= 1.0)) {
        const double shrink = std::isfinite(e) ? std::max(0.2, 0.9 * std::pow(e, -0.2)) : 0.2;
        h *= shrink;
        last_rejected = true;
        continue;
      }
      if (observer) {
        step.t0_ = t;
        step.h_ = t_new - t;
        step.end_ = y1;
        step.coef_.resize(5 * n);
        for (std::size_t i = 0; i < n; ++i) {
          const double ydiff = y1[i] - x[i];
          const double bspl = step.h_ * k1[i] - ydiff;
          step.coef_[i] = x[i];
          step.coef_[n + i] = ydiff;
          step.coef_[2 * n + i] = bspl;
          step.coef_[3 * n + i] = ydiff - step.h_ * k7[i] - bspl;
          step.coef_[4 * n + i] = step.h_ * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                             d6 * k6[i] + d7 * k7[i]);
        }
      }
      double grow = e == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(e, -0.2)));
      if (last_rejected) grow = std::min(grow, 1.0);
      last_rejected = false;
      x.swap(y1);
      k1.swap(k7);
      t = t_new;
      h *= grow;
      if (observer && !observer(step)) break;
    }
    return x;
  }

  const RealField& f_;
  IntegratorConfig cfg_;
};

std::vector<double> integrate(const RealField& f, std::vector<double> x0, double t0, double t1,
                              const IntegratorConfig& cfg, const StepObserver& observer) {
  return Integrator(f, cfg).run(std::move(x0), t0, t1, observer);
}

Trajectory solve(const RealField& f, std::vector<double> x0, double t0, double t1,
                 const IntegratorConfig& cfg) {
  Trajectory tr;
  tr.t_begin_ = t0;
  tr.t_end_ = t1;
  tr.x0_ = x0;
  integrate(f, std::move(x0), t0, t1, cfg, [&](const DenseStep& s) {
    tr.steps_.push_back(s);
    return true;
  });
  return tr;
}

std::vector<double> Trajectory::at(double t) const {
  const double lo = std::min(t_begin_, t_end_), hi = std::max(t_begin_, t_end_);
  const double tol = 1e-12 * std::max(1.0, std::abs(hi));
  if (t < lo - tol || t > hi + tol)
    throw InputError("time " + format_double(t) + " outside the solved interval");
  if (steps_.empty()) return x0_;
  const bool forward = t_end_ >= t_begin_;
  // steps are ordered along the direction of integration
  auto it = std::lower_bound(steps_.begin(), steps_.end(), t, [&](const DenseStep& s, double v) {
    return forward ? s.t1() < v : s.t1() > v;
  });
  if (it == steps_.end()) --it;
  std::vector<double> out(x0_.size());
  it->eval(t, out);
  return out;
}

CompiledSystem::CompiledSystem(const PerturbedSystem& sys) : n_(sys.n) {
  for (const auto& [p, g] : sys.orders) orders_.emplace_back(p, CompiledQPVector(g));
}

void CompiledSystem::eval(double t, std::span<const cd> x, double eps, std::span<cd> out) const {
  std::fill(out.begin(), out.end(), cd(0.0));
  std::vector<cd> tmp(n_);
  for (const auto& [p, g] : orders_) {
    g.eval(t, x, tmp);
    const double w = std::pow(eps, p);
    for (std::size_t i = 0; i < n_; ++i) out[i] += w * tmp[i];
  }
}

std::vector<double> pack(std::span<const cd> z) {
  std::vector<double> x(2 * z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    x[i] = z[i].real();
    x[z.size() + i] = z[i].imag();
  }
  return x;
}

std::vector<cd> unpack(std::span<const double> x) {
  const std::size_t n = x.size() / 2;
  std::vector<cd> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = {x[i], x[n + i]};
  return z;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = m * sxx - sx * sx;
  return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (m * sxy - sx * sy) / den;
}

ErrorScanReport error_scan(const RGResult& res, std::span<const cd> y0,
                           const ErrorScanOptions& opt) {
  const std::size_t n = res.system->n;
  if (y0.size() != n) throw InputError("initial point has the wrong dimension");
  if (opt.power < 1) throw InputError("horizon power must be at least 1");
  for (std::size_t i = 1; i < opt.eps_grid.size(); ++i)
    if (!(opt.eps_grid[i] < opt.eps_grid[i - 1]))
      throw InputError("eps grid must be strictly decreasing");
  const CompiledSystem sys(*res.system);
  const CompiledRG rg(res);

  ErrorScanReport rep;
  rep.horizon = opt.horizon;
  rep.power = opt.power;
  std::vector<double> fit_eps, fit_err;
  for (double eps : opt.eps_grid) {
    rep.eps.push_back(eps);
    if (eps == 0.0) {
      rep.sup_error.push_back(0.0);
      rep.escaped.push_back(false);
      continue;
    }
    const double t_end = opt.horizon / std::pow(eps, opt.power);
    std::vector<cd> state(2 * n);
    const auto x0 = rg.transform(0.0, y0, eps);
    std::copy(x0.begin(), x0.end(), state.begin());
    std::copy(y0.begin(), y0.end(), state.begin() + n);

    std::vector<cd> xs(n), dx(n);
    RealField f = [&](double t, std::span<const double> u, std::span<double> du) {
      const auto z = unpack(u);
      sys.eval(t, std::span<const cd>(z.data(), n), eps, dx);
      const auto dy = rg.field(std::span<const cd>(z.data() + n, n), eps);
      for (std::size_t i = 0; i < n; ++i) {
        du[i] = dx[i].real();
        du[2 * n + i] = dx[i].imag();
        du[n + i] = dy[i].real();
        du[3 * n + i] = dy[i].imag();
      }
    };
    double sup = 0.0;
    bool escaped = false;
    auto measure = [&](std::span<const double> u, double t) {
      const auto z = unpack(u);
      const auto a = rg.transform(t, std::span<const cd>(z.data() + n, n), eps);
      double e2 = 0.0, r2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        e2 += std::norm(z[i] - a[i]);
        r2 += std::norm(z[i]);
      }
      sup = std::max(sup, std::sqrt(e2));
      return std::sqrt(r2);
    };
    const auto u0 = pack(state);
    measure(u0, 0.0);
    try {
      integrate(f, u0, 0.0, t_end, opt.integrator, [&](const DenseStep& s) {
        if (measure(s.state(), s.t1()) > opt.escape_radius) {
          escaped = true;
          return false;
        }
        return true;
      });
    } catch (const NumericError&) {
      escaped = true;
    }
    rep.sup_error.push_back(sup);
    rep.escaped.push_back(escaped);
    if (!escaped) {
      fit_eps.push_back(eps);
      fit_err.push_back(sup);
    }
  }
  rep.slope = loglog_slope(fit_eps, fit_err);
  return rep;
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable:
      return "stable";
    case Stability::Unstable:
      return "unstable";
    case Stability::Saddle:
      return "saddle";
    case Stability::NonHyperbolic:
      return "non-hyperbolic";
  }
  return "?";
}

Stability classify(std::span<const cd> eigenvalues) {
  bool neg = false, pos = false;
  for (const auto& l : eigenvalues) {
    if (std::abs(l.real()) <= kHyperbolicityTol) return Stability::NonHyperbolic;
    (l.real() < 0 ? neg : pos) = true;
  }
  if (neg && pos) return Stability::Saddle;
  return pos ? Stability::Unstable : Stability::Stable;
}

FixedPointSearch find_fixed_points(const RGResult& res, double eps,
                                   const std::vector<std::vector<cd>>& seeds) {
  const CompiledRG rg(res);
  const std::size_t n = rg.n();
  using Mat = Eigen::MatrixXcd;
  using Vec = Eigen::VectorXcd;
  auto residual = [&](const std::vector<cd>& y) {
    const auto F = rg.field(y, eps);
    double s = 0.0;
    for (const auto& v : F) s += std::norm(v);
    return std::sqrt(s);
  };
  auto jac = [&](const std::vector<cd>& y) {
    const auto J = rg.jacobian(y, eps);
    Mat M(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) M(i, j) = J[i * n + j];
    return M;
  };

  FixedPointSearch out;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (seeds[s].size() != n) throw InputError("seed has the wrong dimension");
    std::vector<cd> y = seeds[s];
    double r = residual(y);
    bool converged = false;
    for (int iter = 0; iter < 200 && !converged; ++iter) {
      const auto F = rg.field(y, eps);
      Vec rhs(n);
      for (std::size_t i = 0; i < n; ++i) rhs(i) = -F[i];
      const Eigen::FullPivLU<Mat> lu(jac(y));
      if (!lu.isInvertible()) break;
      const Vec dy = lu.solve(rhs);
      double lambda = 1.0;
      std::vector<cd> trial(n);
      double r_trial = r;
      for (int back = 0; back < 30; ++back) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = y[i] + lambda * dy(i);
        r_trial = residual(trial);
        if (r_trial < r || r_trial == 0.0) break;
        lambda *= 0.5;
      }
      double step = 0.0, size = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        step += std::norm(trial[i] - y[i]);
        size += std::norm(trial[i]);
      }
      const bool progress = r_trial < r;
      if (progress || r_trial == r) {
        y = trial;
        r = r_trial;
      }
      if (r < 1e-13 || (std::sqrt(step) <= 1e-14 * std::max(1.0, std::sqrt(size)) && r < 1e-12))
        converged = true;
      else if (!progress)
        break;
    }
    if (!converged || !(r < 1e-12)) {
      out.failed_seeds.push_back(s);
      continue;
    }
    bool duplicate = false;
    for (const auto& p : out.points) {
      double d = 0.0, m = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d += std::norm(p.point[i] - y[i]);
        m += std::norm(y[i]);
      }
      if (std::sqrt(d) <= 1e-8 * std::max(1.0, std::sqrt(m))) duplicate = true;
    }
    if (duplicate) continue;
    const Eigen::ComplexEigenSolver<Mat> es(jac(y));
    FixedPoint fp;
    fp.point = y;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      fp.eigenvalues.push_back(es.eigenvalues()(i));
    fp.stability = classify(fp.eigenvalues);
    fp.residual = r;
    out.points.push_back(std::move(fp));
  }
  return out;
}

std::vector<RadialOrbit> radial_orbits(const std::vector<double>& coeffs) {
  std::vector<double> c = coeffs;
  while (!c.empty() && c.back() == 0.0) c.pop_back();
  std::size_t low = 0;
  while (low < c.size() && c[low] == 0.0) ++low;  // factors of r (the origin)
  std::vector<RadialOrbit> out;
  if (c.size() <= low + 1) return out;
  const std::size_t deg = c.size() - 1 - low;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (std::size_t i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (std::size_t i = 0; i < deg; ++i) comp(i, deg - 1) = -c[low + i] / c.back();
  const Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);

  auto p = [&](double r) {
    double v = 0.0;
    for (std::size_t j = c.size(); j-- > 0;) v = v * r + c[j];
    return v;
  };
  auto dp = [&](double r) {
    double v = 0.0;
    for (std::size_t j = c.size(); j-- > 1;) v = v * r + static_cast<double>(j) * c[j];
    return v;
  };
  double scale = 0.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const cd z = es.eigenvalues()(i);
    if (std::abs(z.imag()) > 1e-6 * std::max(1.0, std::abs(z)) || z.real() <= 0.0) continue;
    double r = z.real();
    for (int iter = 0; iter < 50; ++iter) {
      const double d = dp(r);
      if (d == 0.0) break;
      const double step = p(r) / d;
      r -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(r))) break;
    }
    if (!(r > 0.0)) continue;
    bool dup = false;
    for (const auto& o : out)
      if (std::abs(o.radius - r) <= 1e-10 * std::max(1.0, r)) dup = true;
    if (dup) continue;
    const double slope = dp(r);
    const Stability st = std::abs(slope) <= kHyperbolicityTol * std::max(1.0, scale)
                             ? Stability::NonHyperbolic
                             : (slope < 0 ? Stability::Stable : Stability::Unstable);
    out.push_back({r, st});
  }
  std::sort(out.begin(), out.end(),
            [](const RadialOrbit& a, const RadialOrbit& b) { return a.radius < b.radius; });
  return out;
}

std::vector<RadialOrbit> radial_orbits(const PolarForm& polar, double eps) {
  std::vector<double> coeffs;
  double w = 1.0;
  for (const auto& q : polar.radial) {
    w *= eps;
    for (const auto& [key, c] : q.terms()) {
      const auto deg = static_cast<std::size_t>(key[0]);
      if (coeffs.size() <= deg) coeffs.resize(deg + 1, 0.0);
      coeffs[deg] += w * c.to_complex().real();
    }
  }
  return radial_orbits(coeffs);
}

}  // namespace rgkit
