#pragma once

// JSON system definitions, result documents, text rendering and the command
// pipelines behind the CLI.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rgkit/autonomous.hpp"
#include "rgkit/linear_floquet.hpp"
#include "rgkit/rg_core.hpp"
#include "rgkit/slow_manifold.hpp"

namespace rgkit {

enum class SystemMode { Periodic, Autonomous, Linear, CriticalManifold, Phase };
const char* to_string(SystemMode m);

struct ChartBlock {
  std::vector<std::string> state_vars, chart_vars;
  std::vector<std::string> U, f, g1, g2;
  std::map<std::string, std::string> params;  // name -> number string
  std::string gap = "1/1000";
  std::vector<std::vector<std::string>> samples;  // chart points
};

struct PhaseBlock {
  std::vector<std::string> state_vars;
  std::vector<std::string> f, g1;
  std::map<std::string, std::string> params;
  std::vector<std::string> seed;
  std::optional<std::string> period_guess;
};

struct SystemFile {
  SystemMode mode = SystemMode::Periodic;
  std::size_t n = 0;
  ScalarMode scalar_mode = ScalarMode::Exact;
  std::vector<Rational> base_frequencies;
  std::vector<Rational> F;                 // autonomous: nu
  std::optional<ScalarMatrix> transform;   // autonomous: result in X = C Z
  std::map<int, QPVector> orders;          // periodic, autonomous
  std::map<int, QPMatrix> matrix_orders;   // linear
  std::optional<ChartBlock> chart;         // critical_manifold
  std::optional<PhaseBlock> phase;         // phase
};

/// Strict parse: unknown keys, malformed numbers and inconsistent shapes
/// throw InputError naming the field path.
SystemFile parse_system_json(const std::string& text);
SystemFile parse_system_file(const std::string& path);

/// Canonical JSON (sorted keys, two-space indent, trailing newline).
std::string serialize_system(const SystemFile& sys);

/// Rational strings are "p" or "p/q" with q > 0; number strings also accept
/// decimal literals. Both throw InputError mentioning `field`.
Rational parse_rational_string(const std::string& s, const std::string& field);
double parse_number_string(const std::string& s, const std::string& field);

/// Periodic-form system: the file's orders, or for autonomous mode the
/// rotating-frame field from autonomize.
SystemPtr build_periodic_system(const SystemFile& sys);
MatrixFourierSeries build_matrix_series(const SystemFile& sys);
CriticalManifoldChart build_chart(const SystemFile& sys);

/// A derivation in whichever form the mode calls for.
struct DerivedResult {
  SystemMode mode;
  int order = 0;
  std::optional<RGResult> rg;
  std::optional<LinearRGResult> linear;
  std::optional<GspReduction> gsp;
  std::vector<Eigen::VectorXd> gsp_samples;
  std::optional<PhaseModel> phase;
};

DerivedResult derive(const SystemFile& sys, int order);
std::string result_json(const DerivedResult& res);
std::string render_text(const DerivedResult& res);

/// y' = eps R_1 + ... as text with reduced rationals and collected i terms.
std::string render_rg_equation(const RGResult& res);

// Command pipelines; each returns CSV with a header row.

struct VerifyOptions {
  std::vector<double> eps_grid{0.04, 0.02, 0.01, 0.005};
  double horizon = 5.0;
  int power = 1;
  std::vector<std::complex<double>> y0;
};
std::string verify_csv(const SystemFile& sys, int order, const VerifyOptions& opt);

std::string fixed_points_csv(const SystemFile& sys, int order, double eps,
                             const std::vector<std::vector<std::complex<double>>>& seeds);
std::string orbits_csv(const SystemFile& sys, int order, double eps);
std::string floquet_csv(const SystemFile& sys, int order, const std::vector<double>& eps_grid);
/// Samples default to the file's chart samples when `samples` is empty.
std::string gsp_csv(const SystemFile& sys, int order,
                    const std::vector<std::vector<double>>& samples);
std::string gsp_fixed_points_csv(const SystemFile& sys, int order, double eps,
                                 const std::vector<std::vector<double>>& seeds);

struct PhaseOutput {
  std::string summary;  // period, coupling, normalization residual
  std::string samples;  // t, U..., Q...
};
PhaseOutput phase_csv(const SystemFile& sys);

}  // namespace rgkit
