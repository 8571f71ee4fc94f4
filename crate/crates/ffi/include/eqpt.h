#ifndef EQPT_H
#define EQPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by fallible calls.
typedef enum {
  EQPT_STATUS_OK = 0,
  EQPT_STATUS_NULL_POINTER = 1,
  EQPT_STATUS_DIMENSION = 2,
  EQPT_STATUS_ARGUMENT = 3,
  EQPT_STATUS_NUMERICAL = 4,
  EQPT_STATUS_PARSE = 5,
  EQPT_STATUS_IO = 6,
  EQPT_STATUS_PANIC = 7,
} EqptStatus;

// Estimation methods.
typedef enum {
  EQPT_METHOD_EQPT1 = 0,
  EQPT_METHOD_EQPT2 = 1,
  EQPT_METHOD_EQPT3 = 2,
  EQPT_METHOD_EQPT4 = 3,
  EQPT_METHOD_EQPT5 = 4,
  EQPT_METHOD_VARIANT_G = 5,
  EQPT_METHOD_VARIANT_H = 6,
} EqptMethod;

// Opaque result of one simulated estimation.
typedef struct EqptEstimate EqptEstimate;

// Opaque complex square matrix.
typedef struct EqptMatrix EqptMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *eqpt_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *eqpt_version(void);

// Parses a method name such as `"eqpt3"` or `"variant-g"`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
EqptStatus eqpt_method_from_name(const char *name, EqptMethod *out);

// Builds a `dim x dim` matrix from `2 * dim * dim` doubles holding
// interleaved real and imaginary parts in row-major order.
//
// # Safety
// `values` must point to `2 * dim * dim` readable doubles and `out` must be
// a valid pointer.
EqptStatus eqpt_matrix_new(size_t dim, const double *values, EqptMatrix **out);

// Haar-random `dim x dim` unitary drawn from `seed`.
//
// # Safety
// `out` must be a valid pointer.
EqptStatus eqpt_matrix_random_unitary(size_t dim, uint64_t seed, EqptMatrix **out);

// Dimension of a matrix, or 0 for null.
//
// # Safety
// `m` must be null or a live handle.
size_t eqpt_matrix_dim(const EqptMatrix *m);

// Reads entry `(row, col)`.
//
// # Safety
// `m` must be a live handle; `re` and `im` valid pointers.
EqptStatus eqpt_matrix_get(const EqptMatrix *m, size_t row, size_t col, double *re, double *im);

// Releases a matrix. Null is ignored.
//
// # Safety
// `m` must be null or a handle not yet freed.
void eqpt_matrix_free(EqptMatrix *m);

// Phase-blind normalized RMSE between two matrices of equal shape.
//
// # Safety
// `a` and `b` must be live handles and `out` a valid pointer.
EqptStatus eqpt_nrmse(const EqptMatrix *a, const EqptMatrix *b, double *out);

// Simulates one estimation of a random `2^qubits` process.
//
// # Safety
// `out` must be a valid pointer.
EqptStatus eqpt_run_trial(EqptMethod method,
                          uint32_t qubits,
                          double width,
                          uint64_t seed,
                          EqptEstimate **out);

// Simulates one estimation of a given process; `seed` drives the noise.
//
// # Safety
// `unitary` must be a live handle and `out` a valid pointer.
EqptStatus eqpt_simulate(EqptMethod method,
                         const EqptMatrix *unitary,
                         double width,
                         uint64_t seed,
                         EqptEstimate **out);

// NRMSE of an estimate against its true process, or NaN for null.
//
// # Safety
// `e` must be null or a live handle.
double eqpt_estimate_nrmse(const EqptEstimate *e);

// `||Û^H Û - I||_F` of an estimate, or NaN for null.
//
// # Safety
// `e` must be null or a live handle.
double eqpt_estimate_unitarity_defect(const EqptEstimate *e);

// Estimator wall time in seconds, or NaN for null.
//
// # Safety
// `e` must be null or a live handle.
double eqpt_estimate_wall_time(const EqptEstimate *e);

// Copies the estimated matrix into a new handle.
//
// # Safety
// `e` must be a live handle and `out` a valid pointer.
EqptStatus eqpt_estimate_matrix(const EqptEstimate *e, EqptMatrix **out);

// Copies the true process into a new handle.
//
// # Safety
// `e` must be a live handle and `out` a valid pointer.
EqptStatus eqpt_estimate_unitary(const EqptEstimate *e, EqptMatrix **out);

// Releases an estimate. Null is ignored.
//
// # Safety
// `e` must be null or a handle not yet freed.
void eqpt_estimate_free(EqptEstimate *e);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQPT_H */
