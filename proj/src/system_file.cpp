#include "rgkit/system_file.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rgkit/errors.hpp"

namespace rgkit {

using json = nlohmann::json;

const char* to_string(SystemMode m) {
  switch (m) {
    case SystemMode::Periodic: return "periodic";
    case SystemMode::Autonomous: return "autonomous";
    case SystemMode::Linear: return "linear";
    case SystemMode::CriticalManifold: return "critical_manifold";
    case SystemMode::Phase: return "phase";
  }
  return "?";
}

namespace {

const std::regex kStrictRational(R"(^-?[0-9]+(/[0-9]+)?$)");

// 17 significant digits; negative zero prints as 0.
std::string fmt(double v) { return format_double(v == 0.0 ? 0.0 : v); }

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw InputError(path + ": " + msg);
}

SystemMode parse_mode(const std::string& s, const std::string& path) {
  for (auto m : {SystemMode::Periodic, SystemMode::Autonomous, SystemMode::Linear,
                 SystemMode::CriticalManifold, SystemMode::Phase})
    if (s == to_string(m)) return m;
  fail(path, "unknown mode '" + s + "'");
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed,
                const std::set<std::string>& required) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
  for (const auto& key : required)
    if (!j.contains(key)) fail(path.empty() ? key : path + "." + key, "missing");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}
std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const std::string& get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get_ref<const std::string&>();
}

long long get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

std::vector<std::string> get_strings(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], index(path, i)));
  return out;
}

std::vector<int> get_ints(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<int> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const long long v = get_int(j[i], index(path, i));
    if (v < INT32_MIN || v > INT32_MAX) fail(index(path, i), "out of range");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::map<std::string, std::string> get_params(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  std::map<std::string, std::string> out;
  for (const auto& [key, v] : j.items()) {
    const std::string& s = get_string(v, join(path, key));
    parse_number_string(s, join(path, key));
    out[key] = s;
  }
  return out;
}

std::map<std::string, double> param_values(const std::map<std::string, std::string>& p,
                                           const std::string& path) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : p) out[k] = parse_number_string(v, join(path, k));
  return out;
}

double parse_decimal(const std::string& s, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(field, "malformed number '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) fail(field, "malformed number '" + s + "'");
  return v;
}

Scalar parse_coeff(const json& term, const std::string& path, ScalarMode mode) {
  const std::string& re = get_string(term.at("coeff_re"), join(path, "coeff_re"));
  const std::string& im = get_string(term.at("coeff_im"), join(path, "coeff_im"));
  if (mode == ScalarMode::Exact)
    return Scalar(parse_rational_string(re, join(path, "coeff_re")),
                  parse_rational_string(im, join(path, "coeff_im")));
  return Scalar::from_double(parse_number_string(re, join(path, "coeff_re")),
                             parse_number_string(im, join(path, "coeff_im")));
}

std::pair<std::string, std::string> coeff_strings(const Scalar& c) {
  if (c.is_exact()) return {format_rational(c.exact().re), format_rational(c.exact().im)};
  const auto z = c.to_complex();
  return {fmt(z.real()), fmt(z.imag())};
}

int parse_order_key(const std::string& key, const std::string& path) {
  if (!std::regex_match(key, std::regex("^[1-9][0-9]{0,3}$")))
    fail(join(path, key), "order keys are positive integers");
  return std::stoi(key);
}

// Terms {component, coeff_re, coeff_im, alpha, k} for n components over n variables.
QPVector parse_vector_terms(const json& arr, const std::string& path, std::size_t n,
                            const BasisPtr& basis, ScalarMode mode) {
  if (!arr.is_array()) fail(path, "expected an array of terms");
  QPVector v = QPVector::zero(n, n, basis);
  for (std::size_t t = 0; t < arr.size(); ++t) {
    const std::string tp = index(path, t);
    check_keys(arr[t], tp, {"component", "coeff_re", "coeff_im", "alpha", "k"},
               {"component", "coeff_re", "coeff_im", "alpha", "k"});
    const long long comp = get_int(arr[t]["component"], join(tp, "component"));
    if (comp < 0 || static_cast<std::size_t>(comp) >= n)
      fail(join(tp, "component"), "must lie in 0.." + std::to_string(n) + "-1");
    const auto alpha = get_ints(arr[t]["alpha"], join(tp, "alpha"));
    if (alpha.size() != n)
      fail(join(tp, "alpha"), "length " + std::to_string(alpha.size()) + ", expected n = " +
                                  std::to_string(n));
    for (int a : alpha)
      if (a < 0) fail(join(tp, "alpha"), "exponents must be nonnegative");
    const auto k = get_ints(arr[t]["k"], join(tp, "k"));
    if (k.size() != basis->dim())
      fail(join(tp, "k"), "frequency vector of length " + std::to_string(k.size()) +
                              " does not match the basis dimension " +
                              std::to_string(basis->dim()));
    v[comp].add_term(parse_coeff(arr[t], tp, mode), alpha, k);
  }
  return v;
}

json vector_terms(const QPVector& v) {
  json arr = json::array();
  const std::size_t d = v.basis_ptr()->dim();
  for (std::size_t c = 0; c < v.size(); ++c)
    for (const auto& [key, coeff] : v[c].terms()) {
      const auto k = QPPoly::k_of(key, d);
      const auto alpha = QPPoly::alpha_of(key, d);
      const auto [re, im] = coeff_strings(coeff);
      arr.push_back({{"component", c},
                     {"coeff_re", re},
                     {"coeff_im", im},
                     {"alpha", std::vector<int>(alpha.begin(), alpha.end())},
                     {"k", std::vector<int>(k.begin(), k.end())}});
    }
  return arr;
}

QPMatrix parse_matrix_terms(const json& arr, const std::string& path, std::size_t n,
                            const BasisPtr& basis, ScalarMode mode) {
  if (!arr.is_array()) fail(path, "expected an array of terms");
  QPMatrix m(n, std::vector<QPPoly>(n, QPPoly(0, basis)));
  for (std::size_t t = 0; t < arr.size(); ++t) {
    const std::string tp = index(path, t);
    check_keys(arr[t], tp, {"row", "col", "coeff_re", "coeff_im", "k"},
               {"row", "col", "coeff_re", "coeff_im", "k"});
    const long long row = get_int(arr[t]["row"], join(tp, "row"));
    const long long col = get_int(arr[t]["col"], join(tp, "col"));
    if (row < 0 || static_cast<std::size_t>(row) >= n) fail(join(tp, "row"), "out of range");
    if (col < 0 || static_cast<std::size_t>(col) >= n) fail(join(tp, "col"), "out of range");
    const auto k = get_ints(arr[t]["k"], join(tp, "k"));
    if (k.size() != basis->dim())
      fail(join(tp, "k"), "frequency vector of length " + std::to_string(k.size()) +
                              " does not match the basis dimension " +
                              std::to_string(basis->dim()));
    m[row][col].add_term(parse_coeff(arr[t], tp, mode), std::vector<int>{}, k);
  }
  return m;
}

json matrix_terms(const QPMatrix& m, std::size_t d) {
  json arr = json::array();
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c)
      for (const auto& [key, coeff] : m[r][c].terms()) {
        const auto k = QPPoly::k_of(key, d);
        const auto [re, im] = coeff_strings(coeff);
        arr.push_back({{"row", r},
                       {"col", c},
                       {"coeff_re", re},
                       {"coeff_im", im},
                       {"k", std::vector<int>(k.begin(), k.end())}});
      }
  return arr;
}

json rational_list(const std::vector<Rational>& v) {
  json arr = json::array();
  for (const auto& q : v) arr.push_back(format_rational(q));
  return arr;
}

ChartBlock parse_chart(const json& j, const std::string& path) {
  check_keys(j, path, {"state_vars", "chart_vars", "U", "f", "g1", "g2", "params", "gap", "samples"},
             {"state_vars", "chart_vars", "U", "f", "g1"});
  ChartBlock c;
  c.state_vars = get_strings(j["state_vars"], join(path, "state_vars"));
  c.chart_vars = get_strings(j["chart_vars"], join(path, "chart_vars"));
  c.U = get_strings(j["U"], join(path, "U"));
  c.f = get_strings(j["f"], join(path, "f"));
  c.g1 = get_strings(j["g1"], join(path, "g1"));
  if (j.contains("g2")) c.g2 = get_strings(j["g2"], join(path, "g2"));
  if (j.contains("params")) c.params = get_params(j["params"], join(path, "params"));
  if (j.contains("gap")) {
    c.gap = get_string(j["gap"], join(path, "gap"));
    if (parse_number_string(c.gap, join(path, "gap")) <= 0.0) fail(join(path, "gap"), "must be positive");
  }
  if (j.contains("samples")) {
    const json& s = j["samples"];
    if (!s.is_array()) fail(join(path, "samples"), "expected an array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string sp = index(join(path, "samples"), i);
      auto row = get_strings(s[i], sp);
      if (row.size() != c.chart_vars.size())
        fail(sp, "expected " + std::to_string(c.chart_vars.size()) + " chart coordinates");
      for (std::size_t q = 0; q < row.size(); ++q) parse_number_string(row[q], index(sp, q));
      c.samples.push_back(std::move(row));
    }
  }
  return c;
}

json chart_json(const ChartBlock& c) {
  json j = {{"state_vars", c.state_vars}, {"chart_vars", c.chart_vars}, {"U", c.U},
            {"f", c.f},                   {"g1", c.g1},                 {"gap", c.gap},
            {"params", c.params},         {"samples", c.samples}};
  if (!c.g2.empty()) j["g2"] = c.g2;
  return j;
}

PhaseBlock parse_phase(const json& j, const std::string& path) {
  check_keys(j, path, {"state_vars", "f", "g1", "params", "seed", "period_guess"},
             {"state_vars", "f", "g1", "seed"});
  PhaseBlock p;
  p.state_vars = get_strings(j["state_vars"], join(path, "state_vars"));
  p.f = get_strings(j["f"], join(path, "f"));
  p.g1 = get_strings(j["g1"], join(path, "g1"));
  if (j.contains("params")) p.params = get_params(j["params"], join(path, "params"));
  p.seed = get_strings(j["seed"], join(path, "seed"));
  for (std::size_t i = 0; i < p.seed.size(); ++i)
    parse_number_string(p.seed[i], index(join(path, "seed"), i));
  if (p.seed.size() != p.state_vars.size()) fail(join(path, "seed"), "length must equal n");
  if (j.contains("period_guess")) {
    p.period_guess = get_string(j["period_guess"], join(path, "period_guess"));
    if (parse_number_string(*p.period_guess, join(path, "period_guess")) <= 0.0)
      fail(join(path, "period_guess"), "must be positive");
  }
  return p;
}

json phase_json(const PhaseBlock& p) {
  json j = {{"state_vars", p.state_vars}, {"f", p.f},       {"g1", p.g1},
            {"params", p.params},         {"seed", p.seed}};
  if (p.period_guess) j["period_guess"] = *p.period_guess;
  return j;
}

ChartExpressions chart_expressions(const ChartBlock& c) {
  ChartExpressions def;
  def.state_vars = c.state_vars;
  def.chart_vars = c.chart_vars;
  def.U = c.U;
  def.f = c.f;
  def.g1 = c.g1;
  def.g2 = c.g2;
  def.params = param_values(c.params, "chart.params");
  def.gap = parse_number_string(c.gap, "chart.gap");
  return def;
}

std::vector<Eigen::VectorXd> chart_samples(const ChartBlock& c) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    Eigen::VectorXd a(c.samples[i].size());
    for (std::size_t q = 0; q < c.samples[i].size(); ++q)
      a[q] = parse_number_string(c.samples[i][q], "chart.samples");
    out.push_back(a);
  }
  return out;
}

}  // namespace

Rational parse_rational_string(const std::string& s, const std::string& field) {
  if (!std::regex_match(s, kStrictRational))
    fail(field, "malformed rational '" + s + "' (expected p or p/q)");
  try {
    return parse_rational(s);
  } catch (const InputError&) {
    fail(field, "malformed rational '" + s + "' (denominator must be positive)");
  }
}

double parse_number_string(const std::string& s, const std::string& field) {
  if (std::regex_match(s, kStrictRational)) return parse_rational_string(s, field).get_d();
  return parse_decimal(s, field);
}

SystemFile parse_system_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) fail("(root)", "expected an object");
  if (!j.contains("mode")) fail("mode", "missing");
  SystemFile sys;
  sys.mode = parse_mode(get_string(j["mode"], "mode"), "mode");

  std::set<std::string> allowed{"mode", "n", "scalar_mode"};
  std::set<std::string> required{"mode", "n"};
  switch (sys.mode) {
    case SystemMode::Periodic:
    case SystemMode::Linear:
      allowed.insert({"base_frequencies", "orders"});
      required.insert("orders");
      break;
    case SystemMode::Autonomous:
      allowed.insert({"base_frequencies", "orders", "F", "transform"});
      required.insert({"orders", "F"});
      break;
    case SystemMode::CriticalManifold:
      allowed.insert("chart");
      required.insert("chart");
      break;
    case SystemMode::Phase:
      allowed.insert("phase");
      required.insert("phase");
      break;
  }
  check_keys(j, "", allowed, required);

  const long long n = get_int(j["n"], "n");
  if (n < 0) fail("n", "must be nonnegative");
  sys.n = static_cast<std::size_t>(n);
  if (j.contains("scalar_mode")) {
    const std::string& sm = get_string(j["scalar_mode"], "scalar_mode");
    if (sm == "exact") sys.scalar_mode = ScalarMode::Exact;
    else if (sm == "float") sys.scalar_mode = ScalarMode::Float;
    else fail("scalar_mode", "expected 'exact' or 'float'");
  }

  BasisPtr basis = empty_basis();
  if (j.contains("base_frequencies")) {
    const auto strs = get_strings(j["base_frequencies"], "base_frequencies");
    for (std::size_t i = 0; i < strs.size(); ++i) {
      sys.base_frequencies.push_back(parse_rational_string(strs[i], index("base_frequencies", i)));
      if (sys.base_frequencies.back() == 0) fail(index("base_frequencies", i), "must be nonzero");
    }
    if (!strs.empty()) basis = make_basis(sys.base_frequencies);
  }

  if (j.contains("F")) {
    const auto strs = get_strings(j["F"], "F");
    if (strs.size() != sys.n) fail("F", "length must equal n");
    for (std::size_t i = 0; i < strs.size(); ++i)
      sys.F.push_back(parse_rational_string(strs[i], index("F", i)));
  }

  if (j.contains("transform")) {
    const json& t = j["transform"];
    if (!t.is_array() || t.size() != sys.n) fail("transform", "expected n rows");
    ScalarMatrix C;
    for (std::size_t r = 0; r < sys.n; ++r) {
      const std::string rp = index("transform", r);
      if (!t[r].is_array() || t[r].size() != sys.n) fail(rp, "expected n entries");
      std::vector<Scalar> row;
      for (std::size_t c = 0; c < sys.n; ++c) {
        const auto pair = get_strings(t[r][c], index(rp, c));
        if (pair.size() != 2) fail(index(rp, c), "expected [re, im]");
        row.emplace_back(parse_rational_string(pair[0], index(rp, c)),
                         parse_rational_string(pair[1], index(rp, c)));
      }
      C.push_back(std::move(row));
    }
    sys.transform = std::move(C);
  }

  if (j.contains("orders")) {
    const json& o = j["orders"];
    if (!o.is_object()) fail("orders", "expected an object");
    for (const auto& [key, terms] : o.items()) {
      const int p = parse_order_key(key, "orders");
      const std::string path = join("orders", key);
      if (sys.mode == SystemMode::Linear)
        sys.matrix_orders[p] = parse_matrix_terms(terms, path, sys.n, basis, sys.scalar_mode);
      else
        sys.orders[p] = parse_vector_terms(terms, path, sys.n, basis, sys.scalar_mode);
    }
  }

  if (j.contains("chart")) {
    sys.chart = parse_chart(j["chart"], "chart");
    if (sys.chart->state_vars.size() != sys.n) fail("chart.state_vars", "length must equal n");
    try {
      make_chart(chart_expressions(*sys.chart));
    } catch (const InputError& e) {
      fail("chart", e.what());
    }
  }
  if (j.contains("phase")) {
    sys.phase = parse_phase(j["phase"], "phase");
    if (sys.phase->state_vars.size() != sys.n) fail("phase.state_vars", "length must equal n");
    try {
      const auto params = param_values(sys.phase->params, "phase.params");
      expr_field(sys.phase->f, sys.phase->state_vars, params);
      expr_field(sys.phase->g1, sys.phase->state_vars, params);
    } catch (const InputError& e) {
      fail("phase", e.what());
    }
  }

  // Shape checks that need the lower layers.
  try {
    if (sys.mode == SystemMode::Periodic || sys.mode == SystemMode::Autonomous)
      build_periodic_system(sys);
    if (sys.mode == SystemMode::Linear) build_matrix_series(sys);
  } catch (const InputError& e) {
    fail("orders", e.what());
  }
  return sys;
}

SystemFile parse_system_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_system_json(ss.str());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string serialize_system(const SystemFile& sys) {
  json j;
  j["mode"] = to_string(sys.mode);
  j["n"] = sys.n;
  j["scalar_mode"] = sys.scalar_mode == ScalarMode::Exact ? "exact" : "float";
  const std::size_t d = sys.base_frequencies.size();
  switch (sys.mode) {
    case SystemMode::Autonomous:
      j["F"] = rational_list(sys.F);
      if (sys.transform) {
        json t = json::array();
        for (const auto& row : *sys.transform) {
          json r = json::array();
          for (const auto& c : row) {
            const auto [re, im] = coeff_strings(c);
            r.push_back({re, im});
          }
          t.push_back(r);
        }
        j["transform"] = t;
      }
      [[fallthrough]];
    case SystemMode::Periodic: {
      j["base_frequencies"] = rational_list(sys.base_frequencies);
      json o = json::object();
      for (const auto& [p, v] : sys.orders) o[std::to_string(p)] = vector_terms(v);
      j["orders"] = o;
      break;
    }
    case SystemMode::Linear: {
      j["base_frequencies"] = rational_list(sys.base_frequencies);
      json o = json::object();
      for (const auto& [p, m] : sys.matrix_orders) o[std::to_string(p)] = matrix_terms(m, d);
      j["orders"] = o;
      break;
    }
    case SystemMode::CriticalManifold:
      if (sys.chart) j["chart"] = chart_json(*sys.chart);
      break;
    case SystemMode::Phase:
      if (sys.phase) j["phase"] = phase_json(*sys.phase);
      break;
  }
  return j.dump(2) + "\n";
}

SystemPtr build_periodic_system(const SystemFile& sys) {
  if (sys.mode != SystemMode::Periodic && sys.mode != SystemMode::Autonomous)
    throw InputError(std::string("mode '") + to_string(sys.mode) + "' has no polynomial system");
  const BasisPtr basis = sys.base_frequencies.empty() ? empty_basis() : make_basis(sys.base_frequencies);
  auto base = make_system(sys.n, basis, sys.orders, sys.scalar_mode);
  if (sys.mode == SystemMode::Periodic) return base;
  return autonomize(sys.F, *base, sys.transform);
}

MatrixFourierSeries build_matrix_series(const SystemFile& sys) {
  if (sys.mode != SystemMode::Linear) throw InputError("not a linear system file");
  const BasisPtr basis = sys.base_frequencies.empty() ? empty_basis() : make_basis(sys.base_frequencies);
  return make_matrix_series(sys.n, basis, sys.matrix_orders, sys.scalar_mode);
}

CriticalManifoldChart build_chart(const SystemFile& sys) {
  if (sys.mode != SystemMode::CriticalManifold || !sys.chart)
    throw InputError("not a critical_manifold system file");
  return make_chart(chart_expressions(*sys.chart));
}

// ---------------------------------------------------------------------------
// Derivation

namespace {

RGResult derive_rg(const SystemFile& sys, int order) {
  return rg_derive(build_periodic_system(sys), order);
}

GspReduction make_gsp(const SystemFile& sys, int order, const std::vector<Eigen::VectorXd>& samples) {
  if (order < 1 || order > 2) throw InputError("critical_manifold derivations support order 1 or 2");
  auto chart = build_chart(sys);
  if (!samples.empty()) validate_chart(chart, samples);
  return GspReduction(std::move(chart), order);
}

std::optional<PolarForm> try_polar(const RGResult& res) {
  if (res.system->n != 2) return std::nullopt;
  try {
    return polar_reduce(res);
  } catch (const MathError&) {
    return std::nullopt;
  }
}

PhaseModel run_phase(const SystemFile& sys) {
  if (!sys.phase) throw InputError("not a phase system file");
  const PhaseBlock& p = *sys.phase;
  const auto params = param_values(p.params, "phase.params");
  const ExprField f = expr_field(p.f, p.state_vars, params);
  const ExprField g1 = expr_field(p.g1, p.state_vars, params);
  Eigen::VectorXd seed(p.seed.size());
  for (std::size_t i = 0; i < p.seed.size(); ++i) seed[i] = parse_number_string(p.seed[i], "phase.seed");
  PhaseOptions opt;
  if (p.period_guess) opt.period_guess = parse_number_string(*p.period_guess, "phase.period_guess");
  return phase_reduce(f.value, f.jacobian, g1.value, seed, opt);
}

json doubles(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json order_map(const std::vector<QPVector>& vs) {
  json o = json::object();
  for (std::size_t i = 0; i < vs.size(); ++i) o[std::to_string(i + 1)] = vector_terms(vs[i]);
  return o;
}

// Exact value of a scalar Fourier series at t = 0.
Scalar at_zero(const QPPoly& p) {
  Scalar s = p.is_exact() ? Scalar(0) : Scalar::from_double(0.0, 0.0);
  for (const auto& [_, c] : p.terms()) s += c;
  return s;
}

}  // namespace

DerivedResult derive(const SystemFile& sys, int order) {
  if (order < 1) throw InputError("order must be at least 1");
  DerivedResult out;
  out.mode = sys.mode;
  out.order = order;
  switch (sys.mode) {
    case SystemMode::Periodic:
    case SystemMode::Autonomous:
      out.rg = derive_rg(sys, order);
      break;
    case SystemMode::Linear:
      out.linear = linear_rg(build_matrix_series(sys), order);
      break;
    case SystemMode::CriticalManifold:
      out.gsp_samples = chart_samples(*sys.chart);
      out.gsp.emplace(make_gsp(sys, order, out.gsp_samples));
      break;
    case SystemMode::Phase:
      if (order != 1) throw InputError("phase reduction is first order");
      out.phase = run_phase(sys);
      break;
  }
  return out;
}

std::string result_json(const DerivedResult& res) {
  json j;
  j["mode"] = to_string(res.mode);
  j["order"] = res.order;
  if (res.rg) {
    const auto& sys = *res.rg->system;
    j["n"] = sys.n;
    j["scalar_mode"] = sys.mode == ScalarMode::Exact ? "exact" : "float";
    j["base_frequencies"] = rational_list(sys.basis->values());
    j["R"] = order_map(res.rg->R);
    j["U"] = order_map(res.rg->U);
    if (auto polar = try_polar(*res.rg)) {
      json radial = json::object(), angular = json::object();
      for (std::size_t i = 0; i < polar->radial.size(); ++i) {
        radial[std::to_string(i + 1)] = vector_terms(QPVector({polar->radial[i]}));
        angular[std::to_string(i + 1)] = vector_terms(QPVector({polar->angular[i]}));
      }
      j["polar"] = {{"radial", radial}, {"angular", angular}};
    }
  }
  if (res.linear) {
    const auto& lin = *res.linear;
    const std::size_t d = lin.A.basis->dim();
    j["n"] = lin.A.n;
    j["scalar_mode"] = lin.A.mode == ScalarMode::Exact ? "exact" : "float";
    j["base_frequencies"] = rational_list(lin.A.basis->values());
    json R = json::object(), U = json::object(), U0 = json::object();
    for (std::size_t i = 0; i < lin.R.size(); ++i) {
      const std::string key = std::to_string(i + 1);
      R[key] = matrix_terms(lin.R[i], d);
      U[key] = matrix_terms(lin.U[i], d);
      QPMatrix z(lin.A.n, std::vector<QPPoly>(lin.A.n, QPPoly(0, empty_basis())));
      for (std::size_t r = 0; r < lin.A.n; ++r)
        for (std::size_t c = 0; c < lin.A.n; ++c)
          z[r][c].add_term(at_zero(lin.U[i][r][c]), std::vector<int>{}, std::vector<int>{});
      U0[key] = matrix_terms(z, 0);
    }
    j["R"] = R;
    j["U"] = U;
    j["U_at_0"] = U0;
  }
  if (res.gsp) {
    json samples = json::array();
    for (const auto& a : res.gsp_samples) {
      json s = {{"alpha", doubles(a)}};
      for (int i = 1; i <= res.gsp->order(); ++i) {
        s["R" + std::to_string(i)] = doubles(res.gsp->field(a, i));
        s["h" + std::to_string(i)] = doubles(res.gsp->correction(a, i));
      }
      samples.push_back(s);
    }
    j["n"] = res.gsp->chart().n;
    j["k"] = res.gsp->chart().k;
    j["samples"] = samples;
  }
  if (res.phase) {
    j["period"] = res.phase->period;
    j["coupling"] = res.phase->coupling;
    j["normalization_residual"] = res.phase->normalization_residual;
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Text rendering

namespace {

struct Signed {
  bool negative;
  std::string body;  // magnitude text; empty means the unit coefficient
};

std::string fmt_real(const Scalar& c, bool imag_part, bool& negative) {
  if (c.is_exact()) {
    Rational q = imag_part ? c.exact().im : c.exact().re;
    negative = q < 0;
    return format_rational(abs(q));
  }
  const double v = imag_part ? c.to_complex().imag() : c.to_complex().real();
  negative = v < 0;
  return fmt(std::abs(v));
}

Signed coefficient_text(const Scalar& c) {
  bool re_neg = false, im_neg = false;
  const std::string re = fmt_real(c, false, re_neg);
  const std::string im = fmt_real(c, true, im_neg);
  const auto z = c.to_complex();
  const bool has_re = c.is_exact() ? c.exact().re != 0 : z.real() != 0.0;
  const bool has_im = c.is_exact() ? c.exact().im != 0 : z.imag() != 0.0;
  if (has_re && !has_im) return {re_neg, re == "1" ? "" : re};
  if (!has_re && has_im) return {im_neg, (im == "1" ? "" : im + "*") + "i"};
  if (re_neg && im_neg) return {true, "(" + re + " + " + im + "*i)"};
  return {false, "(" + std::string(re_neg ? "-" : "") + re + (im_neg ? " - " : " + ") + im + "*i)"};
}

std::string monomial_text(std::span<const int> alpha, const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (alpha[j] == 0) continue;
    if (!s.empty()) s += "*";
    s += names[j];
    if (alpha[j] > 1) s += "^" + std::to_string(alpha[j]);
  }
  return s;
}

std::string frequency_text(const FrequencyBasis& basis, std::span<const int> k) {
  if (std::all_of(k.begin(), k.end(), [](int v) { return v == 0; })) return "";
  const Rational lambda = basis.lambda(k);
  std::string f;
  if (lambda == -1) f = "-";
  else if (lambda != 1) f = format_rational(lambda) + "*";
  return "exp(" + f + "i*t)";
}

std::string poly_text(const QPPoly& p, const std::vector<std::string>& names) {
  struct Entry {
    int degree;
    std::vector<int> alpha;
    std::vector<int> k;
    Scalar c;
  };
  const std::size_t d = p.d();
  std::vector<Entry> entries;
  for (const auto& [key, c] : p.terms()) {
    const auto a = QPPoly::alpha_of(key, d);
    const auto k = QPPoly::k_of(key, d);
    int deg = 0;
    for (int v : a) deg += v;
    entries.push_back({deg, {a.begin(), a.end()}, {k.begin(), k.end()}, c});
  }
  // low degree first, then y1-heavy monomials, then frequency
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    if (x.degree != y.degree) return x.degree < y.degree;
    if (x.alpha != y.alpha) return x.alpha > y.alpha;
    return x.k < y.k;
  });
  if (entries.empty()) return "0";
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const Signed coef = coefficient_text(e.c);
    std::vector<std::string> factors;
    const std::string mono = monomial_text(e.alpha, names);
    const std::string freq = frequency_text(p.basis(), e.k);
    if (!coef.body.empty()) factors.push_back(coef.body);
    if (!mono.empty()) factors.push_back(mono);
    if (!freq.empty()) factors.push_back(freq);
    std::string term;
    for (const auto& f : factors) term += (term.empty() ? "" : "*") + f;
    if (term.empty()) term = "1";
    if (i == 0) out += (coef.negative ? "-" : "") + term;
    else out += (coef.negative ? " - " : " + ") + term;
  }
  return out;
}

std::string eps_power(std::size_t k) {
  return k == 1 ? "eps" : "eps^" + std::to_string(k);
}

std::string graded_text(const std::vector<const QPPoly*>& orders,
                        const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i]->is_zero()) continue;
    if (!out.empty()) out += " + ";
    out += eps_power(i + 1) + "*(" + poly_text(*orders[i], names) + ")";
  }
  return out.empty() ? "0" : out;
}

std::vector<std::string> var_names(const std::string& stem, std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t j = 0; j < n; ++j) v.push_back(stem + std::to_string(j + 1));
  return v;
}

std::string vec_text(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

std::string matrix_text(const QPMatrix& m, std::size_t indent) {
  std::string s;
  const std::vector<std::string> none;
  for (const auto& row : m) {
    s += std::string(indent, ' ') + "[";
    for (std::size_t c = 0; c < row.size(); ++c) s += (c ? ", " : "") + poly_text(row[c], none);
    s += "]\n";
  }
  return s;
}

}  // namespace

std::string render_rg_equation(const RGResult& res) {
  const std::size_t n = res.system->n;
  const auto names = var_names("y", n);
  std::string out;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<const QPPoly*> orders;
    for (const auto& R : res.R) orders.push_back(&R[c]);
    out += "d" + names[c] + "/dt = " + graded_text(orders, names) + "\n";
  }
  return out;
}

std::string render_text(const DerivedResult& res) {
  std::string out;
  if (res.rg) {
    out += "RG equation, order " + std::to_string(res.order) + ":\n";
    out += render_rg_equation(*res.rg);
    if (auto polar = try_polar(*res.rg)) {
      const std::vector<std::string> r{"r"};
      std::vector<const QPPoly*> rad, ang;
      for (const auto& p : polar->radial) rad.push_back(&p);
      for (const auto& p : polar->angular) ang.push_back(&p);
      out += "Polar form (y1 = r*exp(i*theta), y2 = conj(y1)):\n";
      out += "dr/dt = " + graded_text(rad, r) + "\n";
      out += "dtheta/dt = " + graded_text(ang, r) + "\n";
    }
  }
  if (res.linear) {
    const auto& lin = *res.linear;
    out += "Linear RG, order " + std::to_string(res.order) + ", R(eps) = sum_k eps^k R_k\n";
    for (std::size_t i = 0; i < lin.R.size(); ++i)
      out += "R_" + std::to_string(i + 1) + " =\n" + matrix_text(lin.R[i], 2);
    out += "alpha_0 = I + sum_k eps^k u_k(0)\n";
    for (std::size_t i = 0; i < lin.U.size(); ++i) {
      QPMatrix z(lin.A.n, std::vector<QPPoly>(lin.A.n, QPPoly(0, empty_basis())));
      for (std::size_t r = 0; r < lin.A.n; ++r)
        for (std::size_t c = 0; c < lin.A.n; ++c)
          z[r][c].add_term(at_zero(lin.U[i][r][c]), std::vector<int>{}, std::vector<int>{});
      out += "u_" + std::to_string(i + 1) + "(0) =\n" + matrix_text(z, 2);
    }
  }
  if (res.gsp) {
    out += "Restricted RG on the critical manifold, order " + std::to_string(res.order) + "\n";
    for (const auto& a : res.gsp_samples) {
      out += "alpha = " + vec_text(a) + ":";
      for (int i = 1; i <= res.gsp->order(); ++i)
        out += " R" + std::to_string(i) + " = " + vec_text(res.gsp->field(a, i)) + ", h" +
               std::to_string(i) + " = " + vec_text(res.gsp->correction(a, i)) + ";";
      out.back() = '\n';
    }
  }
  if (res.phase) {
    out += "period = " + fmt(res.phase->period) + "\n";
    out += "dalpha/dt = eps*(" + fmt(res.phase->coupling) + ")\n";
    out += "normalization residual = " + fmt(res.phase->normalization_residual) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV pipelines

namespace {

std::string csv_row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

void require_rg_mode(const SystemFile& sys) {
  if (sys.mode != SystemMode::Periodic && sys.mode != SystemMode::Autonomous)
    throw InputError(std::string("command needs a periodic or autonomous system, got '") +
                     to_string(sys.mode) + "'");
}

std::vector<std::string> fixed_point_header(const std::string& stem, std::size_t n, bool complex) {
  std::vector<std::string> h;
  for (std::size_t i = 1; i <= n; ++i) {
    if (complex) {
      h.push_back(stem + std::to_string(i) + "_re");
      h.push_back(stem + std::to_string(i) + "_im");
    } else {
      h.push_back(stem + std::to_string(i));
    }
  }
  for (std::size_t i = 1; i <= n; ++i) {
    h.push_back("lambda" + std::to_string(i) + "_re");
    h.push_back("lambda" + std::to_string(i) + "_im");
  }
  h.push_back("stability");
  h.push_back("residual");
  return h;
}

std::string fixed_point_rows(const FixedPointSearch& s, bool complex) {
  std::string out;
  for (const auto& fp : s.points) {
    std::vector<std::string> row;
    for (const auto& z : fp.point) {
      row.push_back(fmt(z.real()));
      if (complex) row.push_back(fmt(z.imag()));
    }
    for (const auto& l : fp.eigenvalues) {
      row.push_back(fmt(l.real()));
      row.push_back(fmt(l.imag()));
    }
    row.push_back(to_string(fp.stability));
    row.push_back(fmt(fp.residual));
    out += csv_row(row);
  }
  return out;
}

}  // namespace

std::string verify_csv(const SystemFile& sys, int order, const VerifyOptions& opt) {
  require_rg_mode(sys);
  const RGResult res = derive_rg(sys, order);
  std::vector<std::complex<double>> y0 = opt.y0;
  if (y0.empty()) y0.assign(sys.n, {0.5, 0.0});
  if (y0.size() != sys.n) throw InputError("y0 must have n = " + std::to_string(sys.n) + " entries");
  ErrorScanOptions so;
  so.eps_grid = opt.eps_grid;
  so.horizon = opt.horizon;
  so.power = opt.power;
  const ErrorScanReport rep = error_scan(res, y0, so);
  std::string out = csv_row({"eps", "sup_error", "escaped", "slope"});
  for (std::size_t i = 0; i < rep.eps.size(); ++i)
    out += csv_row({fmt(rep.eps[i]), fmt(rep.sup_error[i]),
                    rep.escaped[i] ? "1" : "0", fmt(rep.slope)});
  return out;
}

std::string fixed_points_csv(const SystemFile& sys, int order, double eps,
                             const std::vector<std::vector<std::complex<double>>>& seeds) {
  require_rg_mode(sys);
  const RGResult res = derive_rg(sys, order);
  std::vector<std::vector<std::complex<double>>> grid = seeds;
  if (grid.empty()) {
    // real lattice -6..6 in steps of 2
    if (sys.n > 3) throw InputError("seeds are required for n > 3");
    std::vector<std::complex<double>> p(sys.n);
    std::function<void(std::size_t)> fill = [&](std::size_t j) {
      if (j == sys.n) {
        grid.push_back(p);
        return;
      }
      for (int v = -6; v <= 6; v += 2) {
        p[j] = {static_cast<double>(v), 0.0};
        fill(j + 1);
      }
    };
    fill(0);
  }
  for (const auto& s : grid)
    if (s.size() != sys.n) throw InputError("each seed needs n = " + std::to_string(sys.n) + " entries");
  const FixedPointSearch found = find_fixed_points(res, eps, grid);
  return csv_row(fixed_point_header("y", sys.n, true)) + fixed_point_rows(found, true);
}

std::string orbits_csv(const SystemFile& sys, int order, double eps) {
  require_rg_mode(sys);
  const RGResult res = derive_rg(sys, order);
  if (sys.n != 2) throw InputError("orbits need a conjugate pair system with n = 2");
  const PolarForm polar = polar_reduce(res);
  std::string out = csv_row({"radius", "stability"});
  for (const auto& o : radial_orbits(polar, eps))
    out += csv_row({fmt(o.radius), to_string(o.stability)});
  return out;
}

std::string floquet_csv(const SystemFile& sys, int order, const std::vector<double>& eps_grid) {
  const LinearRGResult res = linear_rg(build_matrix_series(sys), order);
  std::vector<std::string> header{"eps", "defect_norm"};
  for (std::size_t i = 1; i <= sys.n; ++i) {
    header.push_back("exponent_re_" + std::to_string(i));
    header.push_back("exponent_im_" + std::to_string(i));
  }
  header.push_back("collision");
  std::string out = csv_row(header);
  for (const auto& s : exponent_sweep(res, eps_grid)) {
    std::vector<std::string> row{fmt(s.eps), fmt(s.defect)};
    for (const auto& mu : s.exponents) {
      row.push_back(fmt(mu.real()));
      row.push_back(fmt(mu.imag()));
    }
    row.push_back(s.collision ? "1" : "0");
    out += csv_row(row);
  }
  return out;
}

std::string gsp_csv(const SystemFile& sys, int order,
                    const std::vector<std::vector<double>>& samples) {
  if (sys.mode != SystemMode::CriticalManifold || !sys.chart)
    throw InputError("gsp needs a critical_manifold system file");
  std::vector<Eigen::VectorXd> pts;
  if (samples.empty()) {
    pts = chart_samples(*sys.chart);
  } else {
    for (const auto& s : samples) pts.push_back(Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()));
  }
  const std::size_t k = sys.chart->chart_vars.size(), n = sys.n;
  for (const auto& p : pts)
    if (static_cast<std::size_t>(p.size()) != k)
      throw InputError("each sample needs k = " + std::to_string(k) + " chart coordinates");
  const GspReduction red = make_gsp(sys, order, pts);
  std::vector<std::string> header;
  for (std::size_t i = 1; i <= k; ++i) header.push_back("alpha_" + std::to_string(i));
  for (int o = 1; o <= order; ++o)
    for (std::size_t i = 1; i <= k; ++i) header.push_back("R" + std::to_string(o) + "_" + std::to_string(i));
  for (int o = 1; o <= order; ++o)
    for (std::size_t i = 1; i <= n; ++i) header.push_back("h" + std::to_string(o) + "_" + std::to_string(i));
  std::string out = csv_row(header);
  for (const auto& a : pts) {
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < a.size(); ++i) row.push_back(fmt(a[i]));
    for (int o = 1; o <= order; ++o) {
      const auto r = red.field(a, o);
      for (Eigen::Index i = 0; i < r.size(); ++i) row.push_back(fmt(r[i]));
    }
    for (int o = 1; o <= order; ++o) {
      const auto h = red.correction(a, o);
      for (Eigen::Index i = 0; i < h.size(); ++i) row.push_back(fmt(h[i]));
    }
    out += csv_row(row);
  }
  return out;
}

std::string gsp_fixed_points_csv(const SystemFile& sys, int order, double eps,
                                 const std::vector<std::vector<double>>& seeds) {
  if (sys.mode != SystemMode::CriticalManifold || !sys.chart)
    throw InputError("gsp needs a critical_manifold system file");
  std::vector<Eigen::VectorXd> pts;
  if (seeds.empty()) {
    pts = chart_samples(*sys.chart);
  } else {
    for (const auto& s : seeds) pts.push_back(Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()));
  }
  const std::size_t k = sys.chart->chart_vars.size();
  for (const auto& p : pts)
    if (static_cast<std::size_t>(p.size()) != k)
      throw InputError("each seed needs k = " + std::to_string(k) + " chart coordinates");
  const GspReduction red = make_gsp(sys, order, {});
  const FixedPointSearch found = stability_on_manifold(red, eps, pts);
  return csv_row(fixed_point_header("alpha_", k, false)) + fixed_point_rows(found, false);
}

PhaseOutput phase_csv(const SystemFile& sys) {
  const PhaseModel m = run_phase(sys);
  PhaseOutput out;
  out.summary = csv_row({"period", "coupling", "normalization_residual"}) +
                csv_row({fmt(m.period), fmt(m.coupling),
                         fmt(m.normalization_residual)});
  std::vector<std::string> header{"t"};
  const std::size_t n = sys.n;
  for (std::size_t i = 1; i <= n; ++i) header.push_back("U_" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) header.push_back("Q_" + std::to_string(i));
  out.samples = csv_row(header);
  for (std::size_t s = 0; s < m.t.size(); ++s) {
    std::vector<std::string> row{fmt(m.t[s])};
    for (std::size_t i = 0; i < n; ++i) row.push_back(fmt(m.orbit[s][i]));
    for (std::size_t i = 0; i < n; ++i) row.push_back(fmt(m.adjoint[s][i]));
    out.samples += csv_row(row);
  }
  return out;
}

}  // namespace rgkit
