#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rgkit/errors.hpp"
#include "rgkit/system_file.hpp"
#include "test_support.hpp"

using namespace rgkit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path data_file(const std::string& name) { return fs::path(RGKIT_DATA_DIR) / name; }

// One-term periodic system with a replaceable term body.
std::string periodic_with(const std::string& term, const std::string& extra = "") {
  return R"({"mode": "periodic", "n": 2, "base_frequencies": ["1"], )" + extra +
         R"("orders": {"1": [)" + term + "]}}";
}

const std::string kGoodTerm =
    R"({"component": 0, "coeff_re": "1/2", "coeff_im": "0", "alpha": [1, 0], "k": [1]})";

std::string error_of(const std::string& text) {
  try {
    parse_system_json(text);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("shipped system files round-trip byte for byte") {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(RGKIT_DATA_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const std::string text = slurp(entry.path());
    CHECK(serialize_system(parse_system_json(text)) == text);
    ++count;
  }
  CHECK(count >= 8);
}

TEST_CASE("malformed inputs name the offending field") {
  CHECK(error_of(periodic_with(kGoodTerm)).empty());

  SUBCASE("zero denominator") {
    const auto msg = error_of(periodic_with(
        R"({"component": 0, "coeff_re": "1/0", "coeff_im": "0", "alpha": [1, 0], "k": [1]})"));
    CHECK(msg.find("orders.1[0].coeff_re") != std::string::npos);
  }
  SUBCASE("decimal in exact mode") {
    const auto msg = error_of(periodic_with(
        R"({"component": 0, "coeff_re": "0.5", "coeff_im": "0", "alpha": [1, 0], "k": [1]})"));
    CHECK(msg.find("orders.1[0].coeff_re") != std::string::npos);
  }
  SUBCASE("alpha length differs from n") {
    const auto msg = error_of(periodic_with(
        R"({"component": 0, "coeff_re": "1", "coeff_im": "0", "alpha": [1, 0, 2], "k": [1]})"));
    CHECK(msg.find("orders.1[0].alpha") != std::string::npos);
  }
  SUBCASE("frequency vector off the lattice") {
    const auto msg = error_of(periodic_with(
        R"({"component": 0, "coeff_re": "1", "coeff_im": "0", "alpha": [1, 0], "k": [1, 1]})"));
    CHECK(msg.find("orders.1[0].k") != std::string::npos);
  }
  SUBCASE("component out of range") {
    const auto msg = error_of(periodic_with(
        R"({"component": 2, "coeff_re": "1", "coeff_im": "0", "alpha": [1, 0], "k": [1]})"));
    CHECK(msg.find("orders.1[0].component") != std::string::npos);
  }
  SUBCASE("unknown keys") {
    CHECK(error_of(periodic_with(kGoodTerm, R"("colour": "red", )")).find("colour: unknown key") !=
          std::string::npos);
    CHECK(error_of(periodic_with(kGoodTerm, R"("F": ["1", "-1"], )")).find("F: unknown key") !=
          std::string::npos);
    CHECK(error_of(periodic_with(
                       R"({"component": 0, "coeff_re": "1", "coeff_im": "0", "alpha": [1, 0], "k": [1], "x": 1})"))
              .find("orders.1[0].x") != std::string::npos);
  }
  SUBCASE("missing fields and bad shapes") {
    CHECK(error_of(R"({"mode": "periodic", "n": 2})").find("orders: missing") != std::string::npos);
    CHECK(error_of(R"({"mode": "spiral", "n": 2})").find("mode") != std::string::npos);
    CHECK(error_of(periodic_with(kGoodTerm, R"("scalar_mode": "fuzzy", )")).find("scalar_mode") !=
          std::string::npos);
    CHECK(error_of(R"({"mode": "periodic", "n": 2, "orders": {"0": []}})").find("orders.0") !=
          std::string::npos);
    CHECK(error_of(R"({"mode": "autonomous", "n": 2, "F": ["1"], "orders": {}})").find("F") !=
          std::string::npos);
    CHECK(error_of("{\"mode\": ").find("malformed JSON") != std::string::npos);
    CHECK(error_of(R"({"mode": "periodic", "n": 2, "base_frequencies": ["0"], "orders": {}})")
              .find("base_frequencies[0]") != std::string::npos);
  }
  SUBCASE("chart expressions are checked at load time") {
    const auto msg = error_of(
        R"({"mode": "critical_manifold", "n": 2, "chart": {"state_vars": ["x1", "x2"], "chart_vars": ["y"],
            "U": ["y", "y"], "f": ["0", "x1 - x2"], "g1": ["z", "0"]}})");
    CHECK(msg.find("chart") != std::string::npos);
    CHECK(msg.find("'z'") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_system_file("/nonexistent/system.json"), InputError);
}

TEST_CASE("float mode keeps 17 significant digits through a round trip") {
  const std::string text = R"({"mode": "periodic", "n": 1, "scalar_mode": "float",
    "base_frequencies": ["1"], "orders": {"1": [
      {"component": 0, "coeff_re": "0.1", "coeff_im": "-2.5e-3", "alpha": [1], "k": [1]},
      {"component": 0, "coeff_re": "1/3", "coeff_im": "0", "alpha": [0], "k": [0]}]}})";
  const std::string once = serialize_system(parse_system_json(text));
  CHECK(once.find("\"0.10000000000000001\"") != std::string::npos);
  CHECK(once.find("\"0.33333333333333331\"") != std::string::npos);
  CHECK(serialize_system(parse_system_json(once)) == once);
}

TEST_CASE("file systems match the in-code oscillator") {
  using rgkit::testing::forced_oscillator;
  struct Case {
    const char* file;
    Rational omega;
    bool symbolic;
    bool real;
  };
  for (const Case& c : {Case{"forced_oscillator_omega3.json", 3, false, false},
                        Case{"forced_oscillator_omega3_real.json", 3, false, true},
                        Case{"forced_oscillator_omega2_symbolic_k.json", 2, true, true},
                        Case{"forced_oscillator_omega1_symbolic_k.json", 1, true, true},
                        Case{"forced_oscillator_omega1_real.json", 1, false, true}}) {
    CAPTURE(c.file);
    const DerivedResult res = derive(parse_system_file(data_file(c.file)), 2);
    const auto ex = forced_oscillator(c.omega, c.symbolic, Rational(9, 5));
    const RGResult ref = rg_derive(
        c.real ? autonomize(ex.nu, ex.diagonal, ex.to_real) : autonomize(ex.nu, ex.diagonal), 2);
    REQUIRE(res.rg);
    CHECK(res.rg->R == ref.R);
    CHECK(res.rg->U == ref.U);
  }
}

TEST_CASE("rendered equations") {
  SUBCASE("omega = 3 with its polar form") {
    const auto text =
        render_text(derive(parse_system_file(data_file("forced_oscillator_omega3.json")), 2));
    CHECK(text.find("dy1/dt = eps^2*(1/2*y1 - (3/2 + 8/3*i)*y1^2*y2)") != std::string::npos);
    CHECK(text.find("dy2/dt = eps^2*(1/2*y2 + (-3/2 + 8/3*i)*y1*y2^2)") != std::string::npos);
    CHECK(text.find("dr/dt = eps^2*(1/2*r - 3/2*r^3)") != std::string::npos);
    CHECK(text.find("dtheta/dt = eps^2*(-8/3*r^2)") != std::string::npos);
  }
  SUBCASE("omega = 1 shows the first-order forcing term") {
    const auto text = render_text(
        derive(parse_system_file(data_file("forced_oscillator_omega1_symbolic_k.json")), 1));
    CHECK(text.find("dy1/dt = 0") != std::string::npos);
    CHECK(text.find("dy2/dt = eps*(1/2*y3)") != std::string::npos);
  }
  SUBCASE("time dependent transformation terms") {
    QPPoly p(1, make_basis({Rational(3)}));
    p.add_term(Scalar(Rational(0), Rational(-1, 4)), std::vector<int>{2}, std::vector<int>{-1});
    p.add_term(Scalar(1), std::vector<int>{0}, std::vector<int>{0});
    const RGResult res = rg_derive(make_system(1, p.basis_ptr(), {{1, QPVector({p})}}), 1);
    const auto text = render_rg_equation(res);
    CHECK(text == "dy1/dt = eps*(1)\n");
    // mean-zero part ends up in u^(1)
    CHECK(res.U[0][0].size() == 1);
  }
}

TEST_CASE("linear constant input echoes R_1") {
  const std::string text = R"({"mode": "linear", "n": 2, "base_frequencies": ["1"], "orders": {"1": [
      {"row": 0, "col": 0, "coeff_re": "1/2", "coeff_im": "0", "k": [0]},
      {"row": 0, "col": 1, "coeff_re": "2", "coeff_im": "0", "k": [0]},
      {"row": 1, "col": 1, "coeff_re": "-3", "coeff_im": "1", "k": [0]}]}})";
  const SystemFile sys = parse_system_json(text);
  const DerivedResult res = derive(sys, 2);
  REQUIRE(res.linear);
  CHECK(res.linear->R[0] == sys.matrix_orders.at(1));
  const auto rendered = render_text(res);
  CHECK(rendered.find("R_1 =\n  [1/2, 2]\n  [0, (-3 + 1*i)]") != std::string::npos);
  CHECK(serialize_system(sys) == serialize_system(parse_system_json(serialize_system(sys))));
}

TEST_CASE("result documents are deterministic") {
  for (const char* f : {"forced_oscillator_omega2_symbolic_k.json", "mathieu_linear.json",
                        "enzyme_kinetics.json"}) {
    const SystemFile sys = parse_system_file(data_file(f));
    CHECK(result_json(derive(sys, 2)) == result_json(derive(sys, 2)));
  }
}

TEST_CASE("mode pipelines") {
  SUBCASE("critical manifold") {
    const SystemFile sys = parse_system_file(data_file("enzyme_kinetics.json"));
    const auto csv = gsp_csv(sys, 1, {{1.0}});
    CHECK(csv == "alpha_1,R1_1,h1_1,h1_2\n1,-0.25,0,0.03125\n");
    CHECK_THROWS_AS(derive(sys, 3), InputError);
    const auto fp = gsp_fixed_points_csv(sys, 1, 0.01, {{0.3}});
    CHECK(fp.find(",stable,") != std::string::npos);
  }
  SUBCASE("phase") {
    const SystemFile sys = parse_system_file(data_file("radial_oscillator_phase.json"));
    const DerivedResult res = derive(sys, 1);
    REQUIRE(res.phase);
    CHECK(res.phase->coupling == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(derive(sys, 2), InputError);
  }
  SUBCASE("commands reject the wrong mode") {
    const SystemFile lin = parse_system_file(data_file("mathieu_linear.json"));
    CHECK_THROWS_AS(verify_csv(lin, 1, {}), InputError);
    CHECK_THROWS_AS(gsp_csv(lin, 1, {}), InputError);
    const SystemFile osc = parse_system_file(data_file("forced_oscillator_omega3.json"));
    CHECK_THROWS_AS(floquet_csv(osc, 1, {0.1}), InputError);
    CHECK_THROWS_AS(phase_csv(osc), InputError);
    CHECK_THROWS_AS(derive(osc, 0), InputError);
  }
  SUBCASE("floquet columns") {
    const SystemFile lin = parse_system_file(data_file("mathieu_linear.json"));
    const auto csv = floquet_csv(lin, 2, {0.05});
    CHECK(csv.rfind("eps,defect_norm,exponent_re_1,exponent_im_1,exponent_re_2,exponent_im_2,collision\n", 0) == 0);
  }
}
