#ifndef FRACDIFF_H
#define FRACDIFF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call. Values 2 to 4 follow the exit codes of the command
// line tool.
typedef enum FdStatus {
  FD_STATUS_OK = 0,
  // A required pointer argument was null.
  FD_STATUS_NULL_POINTER = 1,
  // Invalid parameters or input data.
  FD_STATUS_INVALID_INPUT = 2,
  // A numerical method failed.
  FD_STATUS_NUMERICAL = 3,
  // The data violate a hypothesis of the problem.
  FD_STATUS_HYPOTHESIS = 4,
  // The caller's buffer is too short; the required length was reported.
  FD_STATUS_BUFFER_TOO_SMALL = 5,
  // Internal panic caught at the boundary.
  FD_STATUS_PANIC = 6,
} FdStatus;

// Output of an identification run.
typedef struct FdIdentification FdIdentification;

// Multi-term fractional model bound to an operator.
typedef struct FdModel FdModel;

// Elliptic operator with its retained eigenpairs.
typedef struct FdOperator FdOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null if the last call
// succeeded. The string stays valid until the next call on this thread.
const char *fd_last_error_message(void);

// Machine-readable code of the last failure (`"rank_condition"`, ...), or
// null. Same lifetime as [`fd_last_error_message`].
const char *fd_last_error_code(void);

// Dirichlet Laplacian `-d²/dx²` on `(0, length)` with `n_modes` modes.
//
// # Safety
// `out` must be valid for a write of one pointer.
enum FdStatus fd_operator_dirichlet(double length, size_t n_modes, struct FdOperator **out);

// # Safety
// `op` must be null or a handle from [`fd_operator_dirichlet`] not yet freed.
void fd_operator_free(struct FdOperator *op);

// Number of retained modes, 0 for a null handle.
//
// # Safety
// `op` must be null or a live operator handle.
size_t fd_operator_mode_count(const struct FdOperator *op);

// Copies the eigenvalues into `out[0..cap]`; `len_out` receives the count.
//
// # Safety
// `op` must be a live operator handle, `out` valid for `cap` writes and
// `len_out` null or valid for one write.
enum FdStatus fd_operator_eigenvalues(const struct FdOperator *op,
                                      double *out,
                                      size_t cap,
                                      size_t *len_out);

// Model `Σ q_j ∂_t^{α_j} u + L u` with `m` terms; orders strictly
// decreasing in (0, 1), coefficients positive. The model keeps its own
// reference to the operator.
//
// # Safety
// `op` must be a live operator handle, `orders` and `coeffs` valid for `m`
// reads and `out` valid for one write.
enum FdStatus fd_model_new(const struct FdOperator *op,
                           const double *orders,
                           const double *coeffs,
                           size_t m,
                           struct FdModel **out);

// # Safety
// `model` must be null or a handle from [`fd_model_new`] not yet freed.
void fd_model_free(struct FdModel *model);

// `u(x0, t_k)` for initial coefficients `a` and the source
// `scale · t^mu · f(x)`, both given in the orthonormal eigenbasis
// (`sqrt(2/length) sin(n π x / length)` for the Dirichlet Laplacian). Coefficient arrays shorter than the mode count
// are padded with zeros; pass `f_len = 0` for no source.
//
// # Safety
// `model` must be a live model handle; `a`, `f` and `times` valid for
// `a_len`, `f_len` and `n_times` reads; `values` valid for `n_times` writes.
enum FdStatus fd_solve_trace(const struct FdModel *model,
                             const double *a,
                             size_t a_len,
                             const double *f,
                             size_t f_len,
                             double mu,
                             double scale,
                             double x0,
                             const double *times,
                             size_t n_times,
                             double *values);

// Mittag-Leffler function `E_{alpha,beta}(z)` for real `z`.
//
// # Safety
// `out` must be valid for one write.
enum FdStatus fd_mittag_leffler(double alpha, double beta, double z, double *out);

// Mode pairs `(n, θ(n))` with `λ_n = kappa λ_θ(n)`, 1-based and
// interleaved in `pairs[0..2*count]`. `count_out` receives the number of
// pairs; `BufferTooSmall` is returned when `cap` (in pairs) is short.
//
// # Safety
// `op` must be a live operator handle, `pairs` valid for `2*cap` writes
// and `count_out` valid for one write.
enum FdStatus fd_kappa_match(const struct FdOperator *op,
                             double kappa,
                             double tol,
                             size_t *pairs,
                             size_t cap,
                             size_t *count_out);

// Identifies orders and coefficient ratios from a trace with the staged
// time-domain fit and default settings. A NaN `mu` selects the
// homogeneous problem, otherwise a source `~ t^mu` with zero initial
// value. The baseline `u(x0, 0)` is estimated from the data.
//
// # Safety
// `times` and `values` must be valid for `n` reads and `out` for one write.
enum FdStatus fd_identify(const double *times,
                          const double *values,
                          size_t n,
                          double x0,
                          double mu,
                          struct FdIdentification **out);

// # Safety
// `id` must be null or a handle from [`fd_identify`] not yet freed.
void fd_identification_free(struct FdIdentification *id);

// Identified number of terms, 0 for a null handle.
//
// # Safety
// `id` must be null or a live identification handle.
size_t fd_identification_term_count(const struct FdIdentification *id);

// Identified orders, decreasing.
//
// # Safety
// `id` must be a live handle, `out` valid for `cap` writes and `len_out`
// null or valid for one write.
enum FdStatus fd_identification_orders(const struct FdIdentification *id,
                                       double *out,
                                       size_t cap,
                                       size_t *len_out);

// Coefficient ratios `q_j / q_1`, first entry 1.
//
// # Safety
// As for [`fd_identification_orders`].
enum FdStatus fd_identification_ratios(const struct FdIdentification *id,
                                       double *out,
                                       size_t cap,
                                       size_t *len_out);

// Full result with diagnostics as a JSON string, released with
// [`fd_string_free`].
//
// # Safety
// `id` must be a live handle and `out` valid for one write.
enum FdStatus fd_identification_json(const struct FdIdentification *id, char **out);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void fd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACDIFF_H */
