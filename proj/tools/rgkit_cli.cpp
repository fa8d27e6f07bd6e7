// Command-line front end over the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rgkit/rgkit.h"

namespace {

struct SystemDeleter {
  void operator()(rgkit_system* s) const { rgkit_system_free(s); }
};
struct ResultDeleter {
  void operator()(rgkit_result* r) const { rgkit_result_free(r); }
};
using SystemHandle = std::unique_ptr<rgkit_system, SystemDeleter>;
using ResultHandle = std::unique_ptr<rgkit_result, ResultDeleter>;

// Internal failures exit with 1; the rest pass the status through.
int exit_code(rgkit_status s) { return s == RGKIT_ERR_INTERNAL ? 1 : static_cast<int>(s); }

int report(rgkit_status s) {
  std::cerr << "rgkit: " << rgkit_last_error() << "\n";
  return exit_code(s);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  rgkit_string_free(s);
  return out;
}

// Writes to `path`, or stdout when empty. Returns false on I/O failure.
bool emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return static_cast<bool>(std::cout.flush());
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) std::cerr << "rgkit: cannot write '" << path << "'\n";
  return static_cast<bool>(out);
}

struct Common {
  std::string in, out;
  int order = 1;
};

void add_in_out(CLI::App* cmd, Common& c) {
  cmd->add_option("--in", c.in, "system file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output file (default: stdout)");
}

void add_order(CLI::App* cmd, Common& c) {
  cmd->add_option("--order", c.order, "RG order m >= 1")->required()->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Renormalization-group reductions of perturbed ODE systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rgkit_version());

  Common c;
  std::string render;
  std::vector<double> eps_grid, y0_re, y0_im, seeds, seeds_im, alphas;
  double horizon = 5.0, eps = 0.0;
  int power = 1;
  std::string samples_path;

  auto* format = app.add_subcommand("format", "rewrite a system file in canonical form");
  add_in_out(format, c);

  auto* derive = app.add_subcommand("derive", "derive the RG equation for any mode");
  add_in_out(derive, c);
  add_order(derive, c);
  derive->add_option("--render", render, "also print the equations as text")
      ->check(CLI::IsMember({"txt"}));

  auto* verify = app.add_subcommand("verify", "error-order scan of the RG approximation");
  add_in_out(verify, c);
  add_order(verify, c);
  verify->add_option("--eps-grid", eps_grid, "decreasing eps values")->expected(1, -1);
  verify->add_option("--horizon", horizon, "T in 0 <= t <= T/eps^power")
      ->check(CLI::PositiveNumber);
  verify->add_option("--power", power, "time scale exponent")->check(CLI::Range(1, 4));
  verify->add_option("--y0", y0_re, "initial RG state, real parts")->expected(1, -1);
  verify->add_option("--y0-im", y0_im, "initial RG state, imaginary parts")->expected(1, -1);

  auto* fixed = app.add_subcommand("fixed-points", "fixed points of the RG equation");
  add_in_out(fixed, c);
  add_order(fixed, c);
  fixed->add_option("--eps", eps, "perturbation size")->required();
  fixed->add_option("--seed", seeds, "Newton seeds, flattened real parts")->expected(1, -1);
  fixed->add_option("--seed-im", seeds_im, "Newton seeds, flattened imaginary parts")
      ->expected(1, -1);

  auto* orbits = app.add_subcommand("orbits", "circular orbits of the polar RG equation");
  add_in_out(orbits, c);
  add_order(orbits, c);
  orbits->add_option("--eps", eps, "perturbation size")->required();

  auto* floquet = app.add_subcommand("floquet", "Floquet exponents and monodromy defects");
  add_in_out(floquet, c);
  add_order(floquet, c);
  floquet->add_option("--eps-grid", eps_grid, "eps values")->required()->expected(1, -1);

  auto* gsp = app.add_subcommand("gsp", "restricted RG data on a critical manifold");
  add_in_out(gsp, c);
  add_order(gsp, c);
  gsp->add_option("--alpha", alphas, "chart points, flattened (default: file samples)")
      ->expected(1, -1);
  auto* gsp_eps = gsp->add_option("--eps", eps, "report fixed points of the reduced field");
  gsp->add_option("--seed", seeds, "fixed-point seeds, flattened (default: file samples)")
      ->expected(1, -1)
      ->needs(gsp_eps);

  auto* phase = app.add_subcommand("phase", "phase reduction onto a limit cycle");
  add_in_out(phase, c);
  phase->add_option("--samples", samples_path, "write the (t, U, Q) table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  rgkit_system* raw = nullptr;
  if (rgkit_status s = rgkit_system_load(c.in.c_str(), &raw); s != RGKIT_OK) return report(s);
  SystemHandle sys(raw);

  char* text = nullptr;
  rgkit_status s = RGKIT_OK;

  if (*format) {
    s = rgkit_system_serialize(sys.get(), &text);
    if (s != RGKIT_OK) return report(s);
    return emit(c.out, take(text)) ? 0 : 2;
  }

  if (*derive) {
    rgkit_result* rraw = nullptr;
    if (s = rgkit_derive(sys.get(), c.order, &rraw); s != RGKIT_OK) return report(s);
    ResultHandle res(rraw);
    if (s = rgkit_result_json(res.get(), &text); s != RGKIT_OK) return report(s);
    const std::string json = take(text);
    if (render.empty()) return emit(c.out, json) ? 0 : 2;
    if (s = rgkit_result_render(res.get(), &text); s != RGKIT_OK) return report(s);
    if (!c.out.empty() && !emit(c.out, json)) return 2;
    return emit("", take(text)) ? 0 : 2;
  }

  if (*verify) {
    if (!y0_im.empty() && y0_im.size() != y0_re.size()) {
      std::cerr << "rgkit: --y0-im needs as many values as --y0\n";
      return 2;
    }
    s = rgkit_verify_csv(sys.get(), c.order, eps_grid.data(), eps_grid.size(), horizon, power,
                         y0_re.data(), y0_im.empty() ? nullptr : y0_im.data(), y0_re.size(),
                         &text);
  } else if (*fixed) {
    if (!seeds_im.empty() && seeds_im.size() != seeds.size()) {
      std::cerr << "rgkit: --seed-im needs as many values as --seed\n";
      return 2;
    }
    s = rgkit_fixed_points_csv(sys.get(), c.order, eps, seeds.data(),
                               seeds_im.empty() ? nullptr : seeds_im.data(), seeds.size(), &text);
  } else if (*orbits) {
    s = rgkit_orbits_csv(sys.get(), c.order, eps, &text);
  } else if (*floquet) {
    s = rgkit_floquet_csv(sys.get(), c.order, eps_grid.data(), eps_grid.size(), &text);
  } else if (*gsp) {
    if (*gsp_eps)
      s = rgkit_gsp_fixed_points_csv(sys.get(), c.order, eps, seeds.data(), seeds.size(), &text);
    else
      s = rgkit_gsp_csv(sys.get(), c.order, alphas.data(), alphas.size(), &text);
  } else if (*phase) {
    char* table = nullptr;
    s = rgkit_phase_csv(sys.get(), &text, &table);
    if (s != RGKIT_OK) return report(s);
    const std::string rows = take(table);
    if (!samples_path.empty() && !emit(samples_path, rows)) return 2;
    return emit(c.out, take(text)) ? 0 : 2;
  }
  if (s != RGKIT_OK) return report(s);
  return emit(c.out, take(text)) ? 0 : 2;
}
