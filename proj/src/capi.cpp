#include "rgkit/rgkit.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "rgkit/errors.hpp"
#include "rgkit/system_file.hpp"

struct rgkit_system {
  rgkit::SystemFile file;
};

struct rgkit_result {
  rgkit::DerivedResult derived;
};

namespace {

thread_local std::string last_error;

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

template <class F>
rgkit_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return RGKIT_OK;
  } catch (const rgkit::Error& e) {
    last_error = e.what();
    return static_cast<rgkit_status>(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return RGKIT_ERR_INTERNAL;
}

rgkit_status null_arg(const char* name) {
  last_error = std::string("null argument: ") + name;
  return RGKIT_ERR_INPUT;
}

std::vector<double> span_of(const double* p, std::size_t n) {
  return p ? std::vector<double>(p, p + n) : std::vector<double>{};
}

template <class T>
std::vector<std::vector<T>> chunk(const std::vector<T>& flat, std::size_t dim, const char* what) {
  std::vector<std::vector<T>> out;
  if (flat.empty()) return out;
  if (dim == 0 || flat.size() % dim != 0)
    throw rgkit::InputError(std::string(what) + ": length must be a multiple of " +
                            std::to_string(dim));
  for (std::size_t i = 0; i < flat.size(); i += dim)
    out.emplace_back(flat.begin() + i, flat.begin() + i + dim);
  return out;
}

std::size_t chart_dim(const rgkit::SystemFile& f) {
  return f.chart ? f.chart->chart_vars.size() : 0;
}

}  // namespace

extern "C" {

const char* rgkit_version(void) { return "0.1.0"; }

const char* rgkit_last_error(void) { return last_error.c_str(); }

void rgkit_string_free(char* s) { std::free(s); }

rgkit_status rgkit_system_load(const char* path, rgkit_system** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new rgkit_system{rgkit::parse_system_file(path)}; });
}

rgkit_status rgkit_system_parse(const char* json, rgkit_system** out) {
  if (!json) return null_arg("json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new rgkit_system{rgkit::parse_system_json(json)}; });
}

rgkit_status rgkit_system_serialize(const rgkit_system* sys, char** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup(rgkit::serialize_system(sys->file)); });
}

const char* rgkit_system_mode(const rgkit_system* sys) {
  return sys ? rgkit::to_string(sys->file.mode) : "";
}

size_t rgkit_system_dim(const rgkit_system* sys) { return sys ? sys->file.n : 0; }

void rgkit_system_free(rgkit_system* sys) { delete sys; }

rgkit_status rgkit_derive(const rgkit_system* sys, int order, rgkit_result** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new rgkit_result{rgkit::derive(sys->file, order)}; });
}

rgkit_status rgkit_result_json(const rgkit_result* res, char** out) {
  if (!res) return null_arg("res");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup(rgkit::result_json(res->derived)); });
}

rgkit_status rgkit_result_render(const rgkit_result* res, char** out) {
  if (!res) return null_arg("res");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup(rgkit::render_text(res->derived)); });
}

void rgkit_result_free(rgkit_result* res) { delete res; }

rgkit_status rgkit_verify_csv(const rgkit_system* sys, int order, const double* eps_grid,
                              size_t n_eps, double horizon, int power, const double* y0_re,
                              const double* y0_im, size_t n_y0, char** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  return guarded([&] {
    rgkit::VerifyOptions opt;
    if (n_eps) opt.eps_grid = span_of(eps_grid, n_eps);
    opt.horizon = horizon;
    opt.power = power;
    for (size_t i = 0; i < n_y0; ++i)
      opt.y0.emplace_back(y0_re ? y0_re[i] : 0.0, y0_im ? y0_im[i] : 0.0);
    *out = dup(rgkit::verify_csv(sys->file, order, opt));
  });
}

rgkit_status rgkit_fixed_points_csv(const rgkit_system* sys, int order, double eps,
                                    const double* seeds_re, const double* seeds_im,
                                    size_t n_values, char** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  return guarded([&] {
    std::vector<std::complex<double>> flat;
    for (size_t i = 0; i < n_values; ++i)
      flat.emplace_back(seeds_re ? seeds_re[i] : 0.0, seeds_im ? seeds_im[i] : 0.0);
    *out = dup(rgkit::fixed_points_csv(sys->file, order, eps, chunk(flat, sys->file.n, "seeds")));
  });
}

rgkit_status rgkit_orbits_csv(const rgkit_system* sys, int order, double eps, char** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup(rgkit::orbits_csv(sys->file, order, eps)); });
}

rgkit_status rgkit_floquet_csv(const rgkit_system* sys, int order, const double* eps_grid,
                               size_t n_eps, char** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = dup(rgkit::floquet_csv(sys->file, order, span_of(eps_grid, n_eps)));
  });
}

rgkit_status rgkit_gsp_csv(const rgkit_system* sys, int order, const double* samples,
                           size_t n_values, char** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto pts = chunk(span_of(samples, n_values), chart_dim(sys->file), "samples");
    *out = dup(rgkit::gsp_csv(sys->file, order, pts));
  });
}

rgkit_status rgkit_gsp_fixed_points_csv(const rgkit_system* sys, int order, double eps,
                                        const double* seeds, size_t n_values, char** out) {
  if (!sys) return null_arg("sys");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto pts = chunk(span_of(seeds, n_values), chart_dim(sys->file), "seeds");
    *out = dup(rgkit::gsp_fixed_points_csv(sys->file, order, eps, pts));
  });
}

rgkit_status rgkit_phase_csv(const rgkit_system* sys, char** summary, char** samples) {
  if (!sys) return null_arg("sys");
  if (!summary) return null_arg("summary");
  return guarded([&] {
    const auto out = rgkit::phase_csv(sys->file);
    *summary = dup(out.summary);
    if (samples) *samples = dup(out.samples);
  });
}

}  // extern "C"
