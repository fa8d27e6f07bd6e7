// Acceptance run: one PASS/FAIL line per criterion with its runtime. Exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rgkit/errors.hpp"
#include "rgkit/system_file.hpp"
#include "test_support.hpp"

using namespace rgkit;
using namespace rgkit::testing;
using C = std::complex<double>;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double budget_s;  // 0 means no runtime bound
  std::function<Outcome()> run;
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

SystemFile shipped(const std::string& name) {
  return parse_system_file(std::string(RGKIT_DATA_DIR) + "/" + name);
}

RGResult derive_file(const std::string& name, int order) {
  return *derive(shipped(name), order).rg;
}

QPPoly poly(std::size_t n, const BasisPtr& basis,
            std::initializer_list<std::pair<Scalar, std::vector<int>>> terms) {
  QPPoly p(n, basis);
  const std::vector<int> k0(basis->dim(), 0);
  for (const auto& [c, alpha] : terms) p.add_term(c, alpha, k0);
  return p;
}

// Accumulates named boolean checks into an outcome.
class Tally {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Outcome done() const {
    Outcome o;
    o.pass = failures_.empty();
    std::string d;
    for (const auto& f : failures_) d += (d.empty() ? "failed: " : "; ") + f;
    for (const auto& n : notes_) d += (d.empty() ? "" : "; ") + n;
    o.detail = d;
    return o;
  }

 private:
  std::vector<std::string> failures_, notes_;
};

const std::vector<std::complex<double>> kBenchY0{C(1.0), C(0.4)};

std::vector<std::vector<C>> seed_grid() {
  std::vector<std::vector<C>> seeds;
  for (int a = -6; a <= 6; a += 2)
    for (int b = -6; b <= 6; b += 2) seeds.push_back({C(a), C(b)});
  return seeds;
}

Outcome golden_omega3() {
  Tally t;
  const RGResult res = derive_file("forced_oscillator_omega3.json", 2);
  const BasisPtr& b = res.system->basis;
  const Scalar half(Rational(1, 2));
  t.check(res.R[0].is_zero(), "R_1 = 0");
  t.check(res.R[1][0] == poly(2, b, {{half, {1, 0}}, {Scalar(Rational(-3, 2), Rational(-8, 3)), {2, 1}}}),
          "R_2 component 1");
  t.check(res.R[1][1] == poly(2, b, {{half, {0, 1}}, {Scalar(Rational(-3, 2), Rational(8, 3)), {1, 2}}}),
          "R_2 component 2");
  const PolarForm pf = polar_reduce(res);
  QPPoly radial(1, empty_basis()), angular(1, empty_basis());
  radial.add_term(half, std::vector<int>{1}, {});
  radial.add_term(Scalar(Rational(-3, 2)), std::vector<int>{3}, {});
  angular.add_term(Scalar(Rational(-8, 3)), std::vector<int>{2}, {});
  t.check(pf.radial[0].is_zero() && pf.angular[0].is_zero(), "polar first order vanishes");
  t.check(pf.radial[1] == radial, "dr/dt = eps^2 (r/2 - 3r^3/2)");
  t.check(pf.angular[1] == angular, "dtheta/dt = -eps^2 8r^2/3");
  const std::string text = render_text(derive(shipped("forced_oscillator_omega3.json"), 2));
  t.check(text.find("dy1/dt = eps^2*(1/2*y1 - (3/2 + 8/3*i)*y1^2*y2)") != std::string::npos,
          "rendered R_2");
  t.note("exact rational comparison of R_1, R_2 and the polar form");
  return t.done();
}

Outcome golden_omega2_omega1() {
  Tally t;
  auto q = [](int num) { return Scalar(Rational(num, 24)); };
  {
    const RGResult res = derive_file("forced_oscillator_omega2_symbolic_k.json", 2);
    const BasisPtr& b = res.system->basis;
    t.check(res.R[0].is_zero(), "omega = 2: R_1 = 0");
    t.check(res.R[1][0] == poly(3, b, {{q(12), {1, 0, 0}}, {q(-9), {3, 0, 0}}, {q(-16), {2, 1, 0}},
                                       {q(-9), {1, 2, 0}}, {q(-16), {0, 3, 0}}, {q(-6), {1, 0, 1}},
                                       {q(-4), {0, 1, 1}}}),
            "omega = 2: R_2 x1");
    t.check(res.R[1][1] == poly(3, b, {{q(12), {0, 1, 0}}, {q(-9), {0, 3, 0}}, {q(16), {1, 2, 0}},
                                       {q(-9), {2, 1, 0}}, {q(16), {3, 0, 0}}, {q(-4), {1, 0, 1}},
                                       {q(6), {0, 1, 1}}}),
            "omega = 2: R_2 x2");
    t.check(res.R[1][2].is_zero(), "omega = 2: k has no dynamics");
  }
  {
    const RGResult res = derive_file("forced_oscillator_omega1_symbolic_k.json", 2);
    const BasisPtr& b = res.system->basis;
    t.check(res.R[0][0].is_zero(), "omega = 1: R_1 x1 = 0");
    t.check(res.R[0][1] == poly(3, b, {{Scalar(Rational(1, 2)), {0, 0, 1}}}),
            "omega = 1: first-order eps k/2 term");
    t.check(res.R[1][0] == poly(3, b, {{q(12), {1, 0, 0}}, {q(-9), {3, 0, 0}}, {q(-16), {2, 1, 0}},
                                       {q(-9), {1, 2, 0}}, {q(-16), {0, 3, 0}}}),
            "omega = 1: R_2 x1");
    t.check(res.R[1][1] == poly(3, b, {{q(12), {0, 1, 0}}, {q(-9), {0, 3, 0}}, {q(16), {1, 2, 0}},
                                       {q(-9), {2, 1, 0}}, {q(16), {3, 0, 0}}}),
            "omega = 1: R_2 x2");
  }
  t.note("k carried as a third variable with zero dynamics, real coordinates");
  return t.done();
}

Outcome invariant_sets() {
  Tally t;
  const PolarForm pf = polar_reduce(derive_file("forced_oscillator_omega3.json", 2));
  const auto orbits = radial_orbits(pf, 0.01);
  const double target = std::sqrt(1.0 / 3.0);
  bool found = false;
  for (const auto& o : orbits)
    if (std::abs(o.radius - target) < 1e-12 && o.stability == Stability::Stable) found = true;
  t.check(found, "stable r* = sqrt(1/3) to 1e-12");

  const FixedPointSearch fps =
      find_fixed_points(derive_file("forced_oscillator_omega1_real.json", 2), 0.01, seed_grid());
  double best = 1e300;
  for (const auto& p : fps.points) {
    if (p.stability != Stability::Stable) continue;
    best = std::min(best, std::hypot(p.point[0].real() + 4.35, p.point[1].real() - 2.31));
  }
  t.check(best < 0.02, "stable point within 0.02 of (-4.35, 2.31)");
  t.note("distance to (-4.35, 2.31) = " + num(best, 3));
  return t.done();
}

Outcome error_order() {
  Tally t;
  ErrorScanOptions opt;
  opt.eps_grid = {0.04, 0.02, 0.01, 0.005};
  opt.horizon = 5.0;
  const auto rep1 = error_scan(derive_file("forced_oscillator_omega3_real.json", 1), kBenchY0, opt);
  const auto rep2 = error_scan(derive_file("forced_oscillator_omega3_real.json", 2), kBenchY0, opt);
  t.check(rep1.slope >= 0.7, "m = 1 slope >= 0.7");
  t.check(rep2.slope >= 1.7, "m = 2 slope >= 1.7");
  t.note("slopes " + num(rep1.slope) + " (m = 1), " + num(rep2.slope) + " (m = 2)");
  return t.done();
}

Outcome conjugacy() {
  Tally t;
  const auto r = conjugacy_residual(derive_file("forced_oscillator_omega3.json", 2), 2);
  t.check(r[0].is_zero() && r[1].is_zero(), "omega = 3 residual orders 1, 2");
  std::mt19937 rng(505);
  const std::vector<BasisPtr> bases{empty_basis(), make_basis({Rational(1)}),
                                    make_basis({Rational(1), Rational(7, 5)})};
  int clean = 0;
  for (int trial = 0; trial < 20; ++trial) {
    PolyShape shape;
    shape.max_terms = 3;
    shape.max_k = 1;
    const auto sys = std::make_shared<PerturbedSystem>(
        random_system(rng, 2, bases[trial % bases.size()], 2, shape));
    const auto res = conjugacy_residual(rg_derive(sys, 2), 2);
    if (res[0].is_zero() && res[1].is_zero()) ++clean;
  }
  t.check(clean == 20, "random systems");
  t.note(std::to_string(clean) + "/20 random systems with vanishing residual");
  return t.done();
}

Outcome hand_formula() {
  Tally t;
  std::mt19937 rng(606);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const BasisPtr basis = trial % 2 ? make_basis({Rational(1), Rational(7, 5)})
                                     : make_basis({Rational(2)});
    PolyShape shape;
    shape.max_terms = 3;
    shape.max_k = 1;
    const PerturbedSystem sys = random_system(rng, 2, basis, 4, shape);
    PolyShape sub = shape;
    sub.max_degree = 2;
    std::vector<QPVector> x;
    for (int j = 0; j < 3; ++j) x.push_back(random_vector(rng, 2, basis, sub));
    for (int K = 1; K <= 4; ++K, ++total) agree += collect_G(sys, x, K) == G_by_hand(sys, x, K);
  }
  t.check(agree == total, "collect_G equals the Taylor formulas");
  t.note(std::to_string(agree) + "/" + std::to_string(total) + " (system, K) pairs exact");
  return t.done();
}

Outcome equivariance() {
  Tally t;
  std::mt19937 rng(707);
  const std::vector<std::vector<Rational>> nus{{Rational(1), Rational(-1)},
                                               {Rational(1), Rational(2)},
                                               {Rational(1, 2), Rational(-3, 2)},
                                               {Rational(1), Rational(-1), Rational(2)}};
  std::size_t violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto& nu = nus[trial % nus.size()];
    PolyShape shape;
    shape.allow_time_dependence = false;
    const auto g = random_system(rng, nu.size(), empty_basis(), 2, shape);
    const NormalForm nf = normal_form(nu, g, 2);
    violations += equivariance_check(nu, nf.rg).size();
  }
  t.check(violations == 0, "random normal forms");
  t.check(equivariance_check({Rational(1), Rational(-1)},
                             derive_file("forced_oscillator_omega3.json", 2))
              .empty(),
          "omega = 3 RG equation with nu = (1, -1)");
  t.note(std::to_string(violations) + " violations over 20 random inputs");
  return t.done();
}

Outcome gauge() {
  Tally t;
  std::mt19937 rng(808);
  PolyShape shape;
  shape.max_terms = 3;
  shape.max_k = 1;
  PolyShape gauge_shape;
  gauge_shape.max_degree = 2;
  gauge_shape.allow_time_dependence = false;
  int ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const BasisPtr basis = make_basis({Rational(1 + trial % 3)});
    const auto sys = std::make_shared<PerturbedSystem>(random_system(rng, 2, basis, 2, shape));
    const RGResult res = rg_derive(sys, 2);
    const QPVector B1 = random_vector(rng, 2, basis, gauge_shape);
    const RGResult g = apply_gauge(res, {B1});
    ok += g.R[0] == res.R[0] && g.R[1] == res.R[1] - lie_bracket(B1, res.R[0]);
  }
  t.check(ok == 20, "R~_2 = R_2 - [B_1, R_1]");
  t.note(std::to_string(ok) + "/20 exact");
  return t.done();
}

Outcome regular_perturbation() {
  Tally t;
  std::mt19937 rng(909);
  PolyShape shape;
  shape.max_terms = 3;
  shape.max_k = 1;
  int ok = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto sys = std::make_shared<PerturbedSystem>(
        random_system(rng, 2, make_basis({Rational(1)}), 3, shape));
    const RGResult res = rg_derive(sys, 3);
    const auto p = regular_perturbation_coeffs(res, 3);
    ok += p[0][0] == res.R[0] && p[1][0] == res.R[1] + jacobian_apply(res.U[0], res.R[0]) &&
          p[2][0] == res.R[2] + jacobian_apply(res.U[0], res.R[1]) +
                         jacobian_apply(res.U[1], res.R[0]);
  }
  t.check(ok == 5, "table identities");
  const RGResult bench = derive_file("forced_oscillator_omega3_real.json", 3);
  const double err = chain_oracle_error(bench, 3, {C(0.7), C(-0.3)}, 10.0);
  t.check(err < 1e-6, "chain integration within 1e-6");
  t.note("identities exact on " + std::to_string(ok) + "/5 systems; chain oracle error " +
         num(err, 3));
  return t.done();
}

Outcome linear_floquet_criterion() {
  Tally t;
  std::mt19937 rng(1010);
  const BasisPtr unit = make_basis({Rational(1)});
  PolyShape shape;
  shape.max_terms = 3;
  int ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::map<int, QPMatrix> orders;
    for (int p = 1; p <= 2; ++p) {
      QPMatrix M(2, std::vector<QPPoly>(2, QPPoly(0, unit)));
      for (auto& row : M)
        for (auto& e : row) e = random_poly(rng, 0, unit, shape);
      orders.emplace(p, M);
    }
    const auto lin = linear_rg(make_matrix_series(2, unit, orders), 3);
    std::map<int, QPVector> fields;
    for (const auto& [p, M] : orders) fields.emplace(p, lift(M, unit));
    const auto rg = rg_derive(make_system(2, unit, fields), 3);
    bool same = true;
    for (int i = 0; i < 3; ++i)
      same = same && lift(lin.R[i], unit) == rg.R[i] && lift(lin.U[i], unit) == rg.U[i];
    ok += same;
  }
  t.check(ok == 20, "bilinear-embedding oracle");
  IntegratorConfig tight;
  tight.abs_tol = 1e-13;
  tight.rel_tol = 1e-12;
  const std::vector<double> grid{0.1, 0.05, 0.025, 0.0125};
  std::string slopes;
  for (int m : {1, 2}) {
    const auto res = linear_rg(mathieu(), m);
    std::vector<double> defects;
    for (double e : grid) defects.push_back(monodromy_check(res, e, tight).defect);
    const double s = loglog_slope(grid, defects);
    t.check(s >= m + 0.7, "monodromy defect slope, m = " + std::to_string(m));
    slopes += (slopes.empty() ? "" : ", ") + num(s) + " (m = " + std::to_string(m) + ")";
  }
  t.note(std::to_string(ok) + "/20 exact; defect slopes " + slopes);
  return t.done();
}

Outcome gsp() {
  Tally t;
  std::mt19937 rng(1111);
  std::uniform_real_distribution<double> uc(0.05, 0.95), uy(0.0, 3.0);
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    const double c = uc(rng), y = uy(rng);
    const GspReduction red(make_chart(enzyme_kinetics(c)), 1);
    Eigen::VectorXd a(1);
    a << y;
    const Eigen::VectorXd h = red.correction(a, 1);
    worst = std::max({worst, std::abs(red.field(a, 1)(0) - (c - 1) * y / (1 + y)),
                      std::abs(h(0)), std::abs(h(1) + (c - 1) * y / std::pow(1 + y, 4))});
  }
  t.check(worst < 1e-10, "closed forms to 1e-10");

  const GspReduction red(make_chart(enzyme_kinetics(0.5)), 1);
  const std::vector<double> grid{0.04, 0.02, 0.01, 0.005};
  std::vector<double> defects;
  Eigen::VectorXd a(1);
  a << 0.8;
  for (double e : grid) defects.push_back(red.invariance_defect(a, e));
  const double slope = loglog_slope(grid, defects);
  t.check(slope >= 1.7, "graph residual slope >= 1.7");

  bool stable = true;
  for (double c : {0.1, 0.5, 0.9}) {
    Eigen::VectorXd seed(1);
    seed << 0.4;
    const auto fp = stability_on_manifold(GspReduction(make_chart(enzyme_kinetics(c)), 1), 0.01, {seed});
    stable = stable && fp.points.size() == 1 && std::abs(fp.points[0].point[0]) < 1e-10 &&
             fp.points[0].stability == Stability::Stable;
  }
  t.check(stable, "y1 = 0 stable for c < 1");
  t.note("closed-form error " + num(worst, 3) + "; residual slope " + num(slope));
  return t.done();
}

Outcome phase() {
  Tally t;
  const ExprField f = phase_oscillator(0.0);
  Eigen::VectorXd seed(2);
  seed << 0.3, 0.1;
  const auto self = phase_reduce(f.value, f.jacobian, f.value, seed);
  t.check(std::abs(self.coupling - 1.0) < 1e-6, "g1 = f gives 1");
  const ExprField tangential = expr_field({"-y", "x"}, {"x", "y"});
  const ExprField radial = expr_field({"x", "y"}, {"x", "y"});
  const double ct = phase_reduce(f.value, f.jacobian, tangential.value, seed).coupling;
  const double cr = phase_reduce(f.value, f.jacobian, radial.value, seed).coupling;
  const double st = simulated_drift(0.0, tangential.value, 1e-3, 2000.0);
  const double sr = simulated_drift(0.0, radial.value, 1e-3, 2000.0);
  t.check(std::abs(ct - st) < 1e-4, "tangential forcing vs simulation");
  t.check(std::abs(cr - sr) < 1e-4, "radial forcing vs simulation");
  t.note("couplings " + num(self.coupling, 10) + ", " + num(ct, 6) + " (sim " + num(st, 6) +
         "), " + num(cr, 3) + " (sim " + num(sr, 3) + ")");
  return t.done();
}

// C and T are fixed before looking at the data: C = 10, T = 1.
Outcome long_interval() {
  Tally t;
  const double Cbound = 10.0;
  ErrorScanOptions opt;
  opt.eps_grid = {0.04, 0.02, 0.01};
  opt.horizon = 1.0;
  opt.power = 2;
  const auto rep1 = error_scan(derive_file("forced_oscillator_omega3_real.json", 1), kBenchY0, opt);
  const auto rep2 = error_scan(derive_file("forced_oscillator_omega3_real.json", 2), kBenchY0, opt);
  std::string m1, m2;
  for (std::size_t i = 0; i < rep1.eps.size(); ++i) {
    t.check(!rep1.escaped[i] && rep1.sup_error[i] <= Cbound * rep1.eps[i],
            "m = 1 error <= 10 eps at eps = " + num(rep1.eps[i]));
    m1 += (m1.empty() ? "" : ", ") + num(rep1.sup_error[i], 3);
    m2 += (m2.empty() ? "" : ", ") + num(rep2.sup_error[i], 3);
  }
  t.note("m = 1 sup errors " + m1 + "; m = 2 on the same interval " + m2);
  return t.done();
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "golden coefficients, omega = 3, and polar form", 5, golden_omega3},
      {2, "golden coefficients, omega = 2 and omega = 1", 10, golden_omega2_omega1},
      {3, "invariant sets: circular orbit and forced fixed point", 5, invariant_sets},
      {4, "error order over 0 <= t <= 5/eps", 120, error_order},
      {5, "conjugacy residual vanishes through order m", 0, conjugacy},
      {6, "collect_G against the Taylor formulas", 0, hand_formula},
      {7, "normal forms are equivariant", 0, equivariance},
      {8, "gauge commutator identity", 0, gauge},
      {9, "regular perturbation table and chain oracle", 0, regular_perturbation},
      {10, "linear Floquet recursion and monodromy defect", 60, linear_floquet_criterion},
      {11, "critical manifold reduction of the enzyme model", 0, gsp},
      {12, "phase reduction", 0, phase},
      {13, "long interval t <= T/eps^2 with R_1 = 0, m = 1", 0, long_interval},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + num(c.budget_s) + " s budget";
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s [%.2f s]: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.title,
                secs, o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
