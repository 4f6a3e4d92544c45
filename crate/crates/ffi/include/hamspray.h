/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HAMSPRAY_H
#define HAMSPRAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define HS_SUITE_JACOBI 0

#define HS_SUITE_SEMISPRAY 1

#define HS_SUITE_SPRAY 2

#define HS_SUITE_HOMOTOPY 3

#define HS_SUITE_PROLONGATION 4

#define HS_METHOD_RK4 0

#define HS_METHOD_RK45 1

// Result code of every call.
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  // The call ran, and the returned report records a failed check.
  HS_STATUS_CHECK_FAILED = 1,
  HS_STATUS_INVALID_INPUT = 2,
  HS_STATUS_NULL_POINTER = 3,
  HS_STATUS_INTERNAL = 4,
} HsStatus;

// Opaque model handle.
typedef struct HsModel HsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if it succeeded.
// The pointer stays valid until the next call on the same thread.
const char *hs_last_error_message(void);

// Parses a JSON model document into a new handle stored in `*out`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum HsStatus hs_model_from_json(const char *json, struct HsModel **out);

// Loads a built-in example model by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a writable pointer.
enum HsStatus hs_model_from_catalog(const char *name, struct HsModel **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void hs_model_free(struct HsModel *model);

// Base dimension and fiber rank of the model.
//
// # Safety
// `model` must be a live handle; `n` and `r` writable pointers.
enum HsStatus hs_model_dims(const struct HsModel *model, size_t *n, size_t *r);

// Overrides the sampling setup used by zero tests. `trials == 0` or a
// non-positive `tol` keeps the current value.
//
// # Safety
// `model` must be a live handle not in use by another thread.
enum HsStatus hs_model_set_sampling(struct HsModel *model,
                                    size_t trials,
                                    double tol,
                                    uint64_t seed);

// Structure equations, Hessian regularity and closedness, as a JSON report.
//
// # Safety
// `model` must be a live handle and `out` a writable pointer.
enum HsStatus hs_validate(const struct HsModel *model, char **out);

// Runs one verification suite (`HS_SUITE_*`) and returns its JSON report.
//
// # Safety
// `model` must be a live handle and `out` a writable pointer.
enum HsStatus hs_check(const struct HsModel *model, uint32_t suite, char **out);

// Bracket coefficients on coordinate functions as JSON.
//
// # Safety
// `model` must be a live handle and `out` a writable pointer.
enum HsStatus hs_bracket_json(const struct HsModel *model, char **out);

// Hamiltonian field of `g` as JSON. `g` may be null (meaning `energy+f`),
// `energy`, `energy+f`, or an expression in the model's variables.
//
// # Safety
// `model` must be a live handle, `g` null or NUL-terminated, `out` writable.
enum HsStatus hs_hamiltonian_json(const struct HsModel *model, const char *g, char **out);

// Integrates the field of `energy+f` from `(x0, y0)` up to `t_end` and
// returns the trajectory as JSON. `x0` holds `n` values and `y0` holds `r`.
// A blow-up yields `HS_STATUS_CHECK_FAILED` with an error document.
//
// # Safety
// `x0`/`y0` must point to `n`/`r` doubles; `out` must be writable.
enum HsStatus hs_integrate(const struct HsModel *model,
                           const double *x0,
                           const double *y0,
                           double t_end,
                           double h,
                           uint32_t method,
                           char **out);

// Evaluates the field of `energy+f` at `point = (x, y)` into `values`.
// Both arrays have length `n + r`. The field is built on first use and
// cached in the handle.
//
// # Safety
// `point` must hold `len` doubles and `values` room for `len` doubles.
enum HsStatus hs_eval_field(const struct HsModel *model,
                            const double *point,
                            double *values,
                            size_t len);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void hs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAMSPRAY_H */
