#ifndef NODALFRAC_H
#define NODALFRAC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes of the C API.
typedef enum NfStatus {
  // Success.
  NF_STATUS_OK = 0,
  // A required pointer argument was `NULL`.
  NF_STATUS_NULL_POINTER = 1,
  // An argument violated a precondition.
  NF_STATUS_INVALID_INPUT = 2,
  // A numerical failure (degeneracy, loss of definiteness, …).
  NF_STATUS_NUMERICAL = 3,
  // A caller-provided buffer is too small.
  NF_STATUS_BUFFER_TOO_SMALL = 4,
  // An internal panic was caught.
  NF_STATUS_PANIC = 5,
} NfStatus;

// Opaque handle to a validated 3×3 reduced matrix.
typedef struct NfReducedMatrix NfReducedMatrix;

// Opaque handle to a well problem (geometry, values, order, resolution).
typedef struct NfWellProblem NfWellProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the message length including the NUL, or 0
// when there is no error. `buf` may be `NULL` to query the length.
//
// # Safety
//
// `buf` must be `NULL` or valid for `len` bytes of writes.
size_t nf_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *nf_version(void);

// Creates the reduced matrix `[[u, c, b], [c, v, a], [b, a, w]]`
// (`a`: wells 2–3, `b`: wells 1–3, `c`: wells 1–2).
//
// # Safety
//
// `out` must be valid for one pointer write.
enum NfStatus nf_reduced_new(double u,
                             double v,
                             double w,
                             double a,
                             double b,
                             double c,
                             struct NfReducedMatrix **out);

// Releases a reduced matrix.
//
// # Safety
//
// `m` must be `NULL` or a handle from [`nf_reduced_new`] not yet freed.
void nf_reduced_free(struct NfReducedMatrix *m);

// Ascending eigenvalues (`values[3]`) and unit eigenvectors (`vectors[9]`,
// eigenvector `j` at `vectors[3j..3j+3]`).
//
// # Safety
//
// `m` must be a live handle; `values` valid for 3 writes, `vectors` for 9.
enum NfStatus nf_reduced_eigen(const struct NfReducedMatrix *m, double *values, double *vectors);

// Ground state: simple minimum eigenvalue with a strictly positive unit
// eigenvector, and the gap to the next eigenvalue.
//
// # Safety
//
// `m` must be a live handle; `lambda` and `gap` valid for one write,
// `vector` for 3.
enum NfStatus nf_reduced_ground_state(const struct NfReducedMatrix *m,
                                      double *lambda,
                                      double *vector,
                                      double *gap);

// Sign changes of `values[0..len]`; entries below `tau_rel · max|values|`
// count as zero.
//
// # Safety
//
// `values` must be valid for `len` reads; `changes` for one write.
enum NfStatus nf_count_sign_changes(const double *values,
                                    size_t len,
                                    double tau_rel,
                                    size_t *changes);

// Creates a problem with `k` wells `(centers[i] − eps, centers[i] + eps)`,
// well values `values[i]`, order `s` and `n_per_unit` cells per unit length.
//
// # Safety
//
// `centers` and `values` must be valid for `k` reads; `out` for one write.
enum NfStatus nf_well_problem_new(const double *centers,
                                  const double *values,
                                  size_t k,
                                  double eps,
                                  double s,
                                  size_t n_per_unit,
                                  struct NfWellProblem **out);

// Releases a well problem.
//
// # Safety
//
// `p` must be `NULL` or a handle from [`nf_well_problem_new`] not yet freed.
void nf_well_problem_free(struct NfWellProblem *p);

// Number of grid nodes: on `I` for the finite well (`infinite == 0`), on
// the wells otherwise.
//
// # Safety
//
// `p` must be a live handle; `len` valid for one write.
enum NfStatus nf_well_grid_len(const struct NfWellProblem *p, int32_t infinite, size_t *len);

// Lowest `m` eigenpairs of the finite well with barrier `1/delta`.
//
// Writes `m` eigenvalues; when `eigenfunctions` is non-NULL also writes the
// eigenfunctions (grid on `I`, see [`nf_well_grid_len`]) row after row,
// requiring `capacity ≥ m · len`.
//
// # Safety
//
// `p` must be a live handle; `eigenvalues` valid for `m` writes;
// `eigenfunctions` `NULL` or valid for `capacity` writes.
enum NfStatus nf_well_solve_finite(const struct NfWellProblem *p,
                                   double delta,
                                   size_t m,
                                   double *eigenvalues,
                                   double *eigenfunctions,
                                   size_t capacity);

// Lowest `m` eigenpairs of the infinite well (grid on the wells); output
// layout as in [`nf_well_solve_finite`].
//
// # Safety
//
// As for [`nf_well_solve_finite`].
enum NfStatus nf_well_solve_infinite(const struct NfWellProblem *p,
                                     size_t m,
                                     double *eigenvalues,
                                     double *eigenfunctions,
                                     size_t capacity);

// Runs the counterexample for an experiment config given as JSON (`NULL`
// for the defaults) and returns the verdict as a JSON string, to be freed
// with [`nf_string_free`].
//
// # Safety
//
// `config_json` must be `NULL` or a NUL-terminated string; `out_json` valid
// for one pointer write.
enum NfStatus nf_counterexample_run_json(const char *config_json, char **out_json);

// Releases a string returned by this library.
//
// # Safety
//
// `s` must be `NULL` or a string returned by this library, not yet freed.
void nf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NODALFRAC_H */
