#include "rgkit/slow_manifold.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "rgkit/errors.hpp"

namespace rgkit {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kFdStep = 1e-5;

double fd_step(double v) { return kFdStep * std::max(1.0, std::abs(v)); }

// Central-difference Jacobian of F at x (F maps R^k -> R^m).
Mat fd_jacobian(const std::function<Vec(const Vec&)>& F, const Vec& x) {
  Mat J;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = fd_step(x(j));
    Vec xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Vec d = (F(xp) - F(xm)) / (2 * h);
    if (j == 0) J.resize(d.size(), x.size());
    J.col(j) = d;
  }
  return J;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec to_eigen(std::span<const double> v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ExprField expr_field(const std::vector<std::string>& comps, const std::vector<std::string>& vars,
                     const std::map<std::string, double>& params) {
  std::vector<Expr> parsed;
  for (const auto& c : comps) parsed.push_back(parse_expr(c, vars, params));
  auto ev = std::make_shared<const ExprVector>(std::move(parsed), vars.size());
  const auto rows = static_cast<Eigen::Index>(ev->size());
  const auto cols = static_cast<Eigen::Index>(vars.size());
  ExprField out;
  out.value = [ev, cols](const Vec& x) {
    if (x.size() != cols) throw InputError("expression field evaluated at the wrong dimension");
    return to_eigen(ev->eval(std::span<const double>(x.data(), x.size())));
  };
  out.jacobian = [ev, rows, cols](const Vec& x) {
    if (x.size() != cols) throw InputError("expression field evaluated at the wrong dimension");
    const auto J = ev->jacobian(std::span<const double>(x.data(), x.size()));
    return Mat(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        J.data(), rows, cols));
  };
  return out;
}

CriticalManifoldChart make_chart(const ChartExpressions& def) {
  const std::size_t n = def.state_vars.size(), k = def.chart_vars.size();
  if (def.U.size() != n || def.f.size() != n || def.g1.size() != n ||
      (!def.g2.empty() && def.g2.size() != n))
    throw InputError("chart definition: every map needs one component per state variable");
  CriticalManifoldChart chart;
  chart.n = n;
  chart.k = k;
  chart.gap = def.gap;
  const ExprField U = expr_field(def.U, def.chart_vars, def.params);
  const ExprField f = expr_field(def.f, def.state_vars, def.params);
  const ExprField g1 = expr_field(def.g1, def.state_vars, def.params);
  chart.U = U.value;
  chart.DU = U.jacobian;
  chart.f = f.value;
  chart.Df = f.jacobian;
  chart.g1 = g1.value;
  chart.Dg1 = g1.jacobian;
  if (!def.g2.empty()) chart.g2 = expr_field(def.g2, def.state_vars, def.params).value;
  return chart;
}

void validate_chart(const CriticalManifoldChart& chart, const std::vector<Vec>& samples) {
  if (chart.k == 0 || chart.k >= chart.n) throw InputError("chart dimension must be in 1..n-1");
  if (!chart.U || !chart.f || !chart.Df || !chart.g1)
    throw InputError("chart needs U, f, Df and g1");
  for (const auto& alpha : samples) {
    if (static_cast<std::size_t>(alpha.size()) != chart.k)
      throw InputError("chart sample has the wrong dimension");
    const Vec x = chart.U(alpha);
    if (static_cast<std::size_t>(x.size()) != chart.n)
      throw InputError("chart map returns the wrong dimension");
    if (chart.f(x).norm() > 1e-10)
      throw InputError("f does not vanish on the chart at alpha = " + format_double(alpha(0)));
    const Eigen::EigenSolver<Mat> es(chart.Df(x), false);
    std::size_t zero = 0;
    for (const auto& ev : es.eigenvalues()) {
      if (std::abs(ev) <= 1e-8)
        ++zero;
      else if (!(ev.real() < -chart.gap))
        throw InputError("critical manifold is not attracting at alpha = " +
                         format_double(alpha(0)));
    }
    if (zero != chart.k)
      throw InputError("Df has " + std::to_string(zero) + " zero eigenvalues, expected " +
                       std::to_string(chart.k));
  }
}

TangentStableSplit tangent_stable_split(const Mat& A, const Mat& DU) {
  const auto n = A.rows();
  const auto k = DU.cols();
  if (A.cols() != n || DU.rows() != n || k >= n) throw InputError("split: inconsistent sizes");
  if ((A * DU).norm() > 1e-8 * std::max(1.0, A.norm() * DU.norm()))
    throw MathError("tangent vectors are not in the kernel of Df");
  // Orthonormal basis S of range(A) from the leading left singular vectors.
  const Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  if (sv(n - k - 1) <= 1e-10 * std::max(1.0, sv(0)))
    throw MathError("Df has rank below n - k: spectral gap violated");
  const Mat S = svd.matrixU().leftCols(n - k);
  Mat M(n, n);
  M << DU, A * S;
  const Eigen::FullPivLU<Mat> lu(M);
  if (lu.rank() < n) throw MathError("tangent and stable directions are not complementary");
  const Mat Minv = lu.inverse();
  return {Minv.topRows(k), S * Minv.bottomRows(n - k)};
}

GspReduction::GspReduction(CriticalManifoldChart chart, int order)
    : chart_(std::move(chart)), order_(order) {
  if (order_ != 1 && order_ != 2) throw InputError("gsp order must be 1 or 2");
  if (chart_.k == 0 || chart_.k >= chart_.n) throw InputError("chart dimension must be in 1..n-1");
  if (!chart_.U || !chart_.f || !chart_.Df || !chart_.g1)
    throw InputError("chart needs U, f, Df and g1");
}

Mat GspReduction::chart_jacobian(const Vec& alpha) const {
  if (chart_.DU) return chart_.DU(alpha);
  return fd_jacobian(chart_.U, alpha);
}

Mat GspReduction::g1_jacobian(const Vec& x) const {
  if (chart_.Dg1) return chart_.Dg1(x);
  return fd_jacobian(chart_.g1, x);
}

GspReduction::Point GspReduction::first_order(const Vec& alpha) const {
  const Vec x = chart_.U(alpha);
  const auto split = tangent_stable_split(chart_.Df(x), chart_jacobian(alpha));
  const Vec g = chart_.g1(x);
  return {split.tangent * g, -(split.stable * g), {}, {}};
}

GspReduction::Point GspReduction::solve(const Vec& alpha) const {
  Point p = first_order(alpha);
  if (order_ < 2) return p;
  const Vec x = chart_.U(alpha);
  const Mat Dh1 = fd_jacobian([&](const Vec& a) { return first_order(a).h1; }, alpha);
  // second derivative of f along h1 from differences of Df
  const double s = 1e-4 / std::max(1.0, p.h1.norm());
  const Vec d2f =
      (chart_.Df(x + s * p.h1) - chart_.Df(x - s * p.h1)) * p.h1 / (2 * s);
  Vec r = 0.5 * d2f + g1_jacobian(x) * p.h1 - Dh1 * p.a1;
  if (chart_.g2) r += chart_.g2(x);
  const auto split = tangent_stable_split(chart_.Df(x), chart_jacobian(alpha));
  p.a2 = split.tangent * r;
  p.h2 = -(split.stable * r);
  return p;
}

Vec GspReduction::field(const Vec& alpha, int i) const {
  if (i < 1 || i > order_) throw InputError("field order out of range");
  const Point p = solve(alpha);
  return i == 1 ? p.a1 : p.a2;
}

Vec GspReduction::correction(const Vec& alpha, int i) const {
  if (i < 1 || i > order_) throw InputError("correction order out of range");
  const Point p = solve(alpha);
  return i == 1 ? p.h1 : p.h2;
}

Vec GspReduction::reduced(const Vec& alpha, double eps) const {
  const Point p = solve(alpha);
  Vec v = eps * p.a1;
  if (order_ == 2) v += eps * eps * p.a2;
  return v;
}

Vec GspReduction::graph(const Vec& alpha, double eps) const {
  const Point p = solve(alpha);
  Vec x = chart_.U(alpha) + eps * p.h1;
  if (order_ == 2) x += eps * eps * p.h2;
  return x;
}

double GspReduction::invariance_defect(const Vec& alpha, double eps) const {
  const Vec x = graph(alpha, eps);
  const Mat Dx = fd_jacobian([&](const Vec& a) { return graph(a, eps); }, alpha);
  Vec rhs = chart_.f(x) + eps * chart_.g1(x);
  if (chart_.g2) rhs += eps * eps * chart_.g2(x);
  return (rhs - Dx * reduced(alpha, eps)).norm();
}

FixedPointSearch stability_on_manifold(const GspReduction& red, double eps,
                                       const std::vector<Vec>& seeds) {
  const std::size_t k = red.chart().k;
  auto F = [&](const Vec& a) { return red.reduced(a, eps); };
  FixedPointSearch out;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (static_cast<std::size_t>(seeds[s].size()) != k)
      throw InputError("seed has the wrong dimension");
    Vec a = seeds[s];
    Vec r = F(a);
    bool converged = r.norm() < 1e-14;
    for (int iter = 0; iter < 100 && !converged; ++iter) {
      const Eigen::FullPivLU<Mat> lu(fd_jacobian(F, a));
      if (!lu.isInvertible()) break;
      const Vec da = lu.solve(-r);
      double lambda = 1.0;
      Vec trial = a + da, r_trial = F(trial);
      for (int back = 0; back < 30 && r_trial.norm() >= r.norm(); ++back) {
        lambda *= 0.5;
        trial = a + lambda * da;
        r_trial = F(trial);
      }
      if (!(r_trial.norm() < r.norm()) && r_trial.norm() != 0.0) break;
      const double step = (trial - a).norm();
      a = trial;
      r = r_trial;
      converged = r.norm() < 1e-14 || step <= 1e-13 * std::max(1.0, a.norm());
    }
    if (!converged || !(r.norm() < 1e-10 * std::max(eps, 1e-300) + 1e-14)) {
      out.failed_seeds.push_back(s);
      continue;
    }
    bool duplicate = false;
    for (const auto& p : out.points) {
      double d = 0.0;
      for (std::size_t i = 0; i < k; ++i) d += std::norm(p.point[i] - a(i));
      if (std::sqrt(d) < 1e-8) duplicate = true;
    }
    if (duplicate) continue;
    const Eigen::EigenSolver<Mat> es(fd_jacobian(F, a), false);
    FixedPoint fp;
    for (std::size_t i = 0; i < k; ++i) fp.point.emplace_back(a(i), 0.0);
    for (const auto& ev : es.eigenvalues()) fp.eigenvalues.push_back(ev);
    fp.stability = classify(fp.eigenvalues);
    fp.residual = r.norm();
    out.points.push_back(std::move(fp));
  }
  return out;
}

namespace {

// x and the variational matrix M (column major) packed in one state.
RealField variational(const VecFn& f, const MatFn& Df, std::size_t n) {
  return [&f, &Df, n](double, std::span<const double> s, std::span<double> ds) {
    const Vec x = to_eigen(s.first(n));
    const Vec fx = f(x);
    std::copy(fx.data(), fx.data() + n, ds.begin());
    const Eigen::Map<const Mat> M(s.data() + n, n, n);
    const Mat DM = Df(x) * M;
    std::copy(DM.data(), DM.data() + n * n, ds.begin() + n);
  };
}

struct Shot {
  Vec end;
  Mat monodromy;
};

Shot shoot(const VecFn& f, const MatFn& Df, const Vec& x, double T, const IntegratorConfig& cfg) {
  const std::size_t n = x.size();
  std::vector<double> s(n + n * n, 0.0);
  std::copy(x.data(), x.data() + n, s.begin());
  for (std::size_t i = 0; i < n; ++i) s[n + i * n + i] = 1.0;
  const auto out = integrate(variational(f, Df, n), s, 0.0, T, cfg);
  return {to_eigen(std::span(out).first(n)),
          Eigen::Map<const Mat>(out.data() + n, n, n)};
}

double estimate_period(const RealField& F, const Vec& p, const Vec& fp, const IntegratorConfig& cfg,
                       double window) {
  const std::size_t n = p.size();
  auto section = [&](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (x[i] - p(i)) * fp(i);
    return s;
  };
  double found = -1.0;
  bool left = false;
  std::vector<double> buf(n);
  integrate(F, to_std(p), 0.0, window, cfg, [&](const DenseStep& st) {
    const double s1 = section(st.state());
    st.eval(st.t0(), buf);
    const double s0 = section(buf);
    if (s1 < 0.0) left = true;
    if (left && s0 < 0.0 && s1 >= 0.0) {
      double lo = st.t0(), hi = st.t1();
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        st.eval(mid, buf);
        (section(buf) < 0.0 ? lo : hi) = mid;
      }
      found = 0.5 * (lo + hi);
      return false;
    }
    return true;
  });
  if (found <= 0.0) throw NumericError("no return to the section: no limit cycle found");
  return found;
}

}  // namespace

PhaseModel phase_reduce(const VecFn& f, const MatFn& Df, const VecFn& g1, const Vec& seed,
                        const PhaseOptions& opt) {
  const std::size_t n = seed.size();
  if (n < 2) throw InputError("phase reduction needs at least two dimensions");
  if (opt.samples < 8) throw InputError("phase reduction needs at least 8 samples");
  RealField F = [&f, n](double, std::span<const double> x, std::span<double> dx) {
    const Vec v = f(to_eigen(x.first(n)));
    std::copy(v.data(), v.data() + n, dx.begin());
  };
  const IntegratorConfig& cfg = opt.integrator;

  Vec p = to_eigen(integrate(F, to_std(seed), 0.0, opt.transient, cfg));
  Vec fp = f(p);
  if (fp.norm() < 1e-10) throw NumericError("the seed settles on an equilibrium, not a cycle");
  double T = opt.period_guess ? *opt.period_guess
                              : estimate_period(F, p, fp, cfg, std::max(20.0 * opt.transient, 1e3));

  // Newton on (x, T): phi_T(x) = x with the phase fixed on the section through p.
  Vec x = p;
  Shot shot;
  bool converged = false;
  for (int iter = 0; iter < 40; ++iter) {
    shot = shoot(f, Df, x, T, cfg);
    const Vec r = shot.end - x;
    if (r.norm() < 1e-10 * std::max(1.0, x.norm())) {
      converged = true;
      break;
    }
    Mat J = Mat::Zero(n + 1, n + 1);
    J.topLeftCorner(n, n) = shot.monodromy - Mat::Identity(n, n);
    J.topRightCorner(n, 1) = f(shot.end);
    J.bottomLeftCorner(1, n) = fp.transpose();
    Vec rhs(n + 1);
    rhs << -r, -fp.dot(x - p);
    const Vec d = J.fullPivLu().solve(rhs);
    x += d.head(n);
    T += d(n);
    if (!(T > 0.0) || !x.allFinite()) throw NumericError("shooting diverged: no limit cycle found");
  }
  if (!converged) throw NumericError("shooting did not converge: no limit cycle found");

  // Periodic adjoint start: left eigenvector of the monodromy for multiplier 1.
  const Eigen::EigenSolver<Mat> es(shot.monodromy.transpose());
  Eigen::Index unit = 0;
  for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(unit) - 1.0)) unit = i;
  if (std::abs(es.eigenvalues()(unit) - 1.0) > 1e-6)
    throw NumericError("monodromy has no multiplier 1: the cycle was not resolved");
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (i != unit && std::abs(es.eigenvalues()(i) - 1.0) < 1e-6)
      throw MathError("multiplier 1 is not simple: the periodic adjoint is not unique");
  Vec q = es.eigenvectors().col(unit).real();
  const Vec fx = f(x);
  q /= q.dot(fx);

  const Trajectory orbit = solve(F, to_std(x), 0.0, T, cfg);
  auto U = [&](double t) {
    t = std::fmod(t, T);
    if (t < 0.0) t += T;
    return to_eigen(orbit.at(t));
  };
  // One extra period backwards damps anything off the periodic solution.
  RealField adjoint = [&](double t, std::span<const double> y, std::span<double> dy) {
    const Vec v = -(Df(U(t)).transpose() * to_eigen(y));
    std::copy(v.data(), v.data() + n, dy.begin());
  };
  const Trajectory Q = solve(adjoint, to_std(q), 2 * T, 0.0, cfg);

  PhaseModel model;
  model.period = T;
  double sum = 0.0;
  for (std::size_t j = 0; j < opt.samples; ++j) {
    const double t = T * static_cast<double>(j) / static_cast<double>(opt.samples);
    const Vec u = U(t), qt = to_eigen(Q.at(t));
    model.t.push_back(t);
    model.orbit.push_back(u);
    model.adjoint.push_back(qt);
    model.normalization_residual =
        std::max(model.normalization_residual, std::abs(qt.dot(f(u)) - 1.0));
    sum += qt.dot(g1(u));
  }
  // trapezoid rule on a periodic integrand
  model.coupling = sum / static_cast<double>(opt.samples);
  return model;
}

}  // namespace rgkit
