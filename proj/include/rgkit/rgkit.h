#ifndef RGKIT_H
#define RGKIT_H

/* C interface to the rgkit library: system files, derivations and the
 * numeric command pipelines. Handles are opaque; every call returns a status
 * and the message of the last failure on the calling thread is available
 * from rgkit_last_error(). Strings returned through char** are owned by the
 * caller and released with rgkit_string_free(). */

#include <stddef.h>

#if defined(_WIN32)
#define RGKIT_API __declspec(dllexport)
#else
#define RGKIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rgkit_status {
  RGKIT_OK = 0,
  RGKIT_ERR_INPUT = 2,    /* malformed or inconsistent input */
  RGKIT_ERR_MATH = 3,     /* the derivation cannot proceed */
  RGKIT_ERR_NUMERIC = 4,  /* an iterative procedure did not converge */
  RGKIT_ERR_INTERNAL = 5
} rgkit_status;

typedef struct rgkit_system rgkit_system;
typedef struct rgkit_result rgkit_result;

RGKIT_API const char* rgkit_version(void);
RGKIT_API const char* rgkit_last_error(void);
RGKIT_API void rgkit_string_free(char* s);

/* System files */
RGKIT_API rgkit_status rgkit_system_load(const char* path, rgkit_system** out);
RGKIT_API rgkit_status rgkit_system_parse(const char* json, rgkit_system** out);
RGKIT_API rgkit_status rgkit_system_serialize(const rgkit_system* sys, char** out);
/* "periodic", "autonomous", "linear", "critical_manifold" or "phase" */
RGKIT_API const char* rgkit_system_mode(const rgkit_system* sys);
RGKIT_API size_t rgkit_system_dim(const rgkit_system* sys);
RGKIT_API void rgkit_system_free(rgkit_system* sys);

/* Derivations */
RGKIT_API rgkit_status rgkit_derive(const rgkit_system* sys, int order, rgkit_result** out);
RGKIT_API rgkit_status rgkit_result_json(const rgkit_result* res, char** out);
RGKIT_API rgkit_status rgkit_result_render(const rgkit_result* res, char** out);
RGKIT_API void rgkit_result_free(rgkit_result* res);

/* Numeric pipelines, each producing CSV with a header row. Point lists are
 * flattened row-major; their length must be a multiple of the point
 * dimension. Empty lists select the defaults. */
RGKIT_API rgkit_status rgkit_verify_csv(const rgkit_system* sys, int order, const double* eps_grid,
                                        size_t n_eps, double horizon, int power,
                                        const double* y0_re, const double* y0_im, size_t n_y0,
                                        char** out);
RGKIT_API rgkit_status rgkit_fixed_points_csv(const rgkit_system* sys, int order, double eps,
                                              const double* seeds_re, const double* seeds_im,
                                              size_t n_values, char** out);
RGKIT_API rgkit_status rgkit_orbits_csv(const rgkit_system* sys, int order, double eps,
                                        char** out);
RGKIT_API rgkit_status rgkit_floquet_csv(const rgkit_system* sys, int order,
                                         const double* eps_grid, size_t n_eps, char** out);
RGKIT_API rgkit_status rgkit_gsp_csv(const rgkit_system* sys, int order, const double* samples,
                                     size_t n_values, char** out);
RGKIT_API rgkit_status rgkit_gsp_fixed_points_csv(const rgkit_system* sys, int order, double eps,
                                                  const double* seeds, size_t n_values,
                                                  char** out);
RGKIT_API rgkit_status rgkit_phase_csv(const rgkit_system* sys, char** summary, char** samples);

#ifdef __cplusplus
}
#endif

#endif /* RGKIT_H */
