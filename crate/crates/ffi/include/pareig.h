#ifndef PAREIG_H
#define PAREIG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Mode family selector for `pareig_problem_new_1d`.
typedef enum PareigModeFamily {
  PAREIG_MODE_FAMILY_BUMP = 0,
  PAREIG_MODE_FAMILY_SINE = 1,
} PareigModeFamily;

// Status codes returned by every fallible function.
typedef enum PareigStatus {
  PAREIG_STATUS_OK = 0,
  PAREIG_STATUS_NULL_POINTER = 1,
  PAREIG_STATUS_INVALID_ARGUMENT = 2,
  PAREIG_STATUS_SOLVE_FAILED = 3,
  PAREIG_STATUS_BUFFER_TOO_SMALL = 4,
  PAREIG_STATUS_INTERNAL = 5,
} PareigStatus;

// Opaque converged ground state.
typedef struct PareigGroundState PareigGroundState;

// Opaque problem handle: grid, potential, nonlinearity, solver options.
typedef struct PareigProblem PareigProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the most recent error on this thread into `buf`
// (NUL-terminated, truncated to `len`); returns the full message length.
//
// # Safety
// `buf` must point to `len` writable bytes, or be null (query mode).
size_t pareig_last_error_message(char *buf, size_t len);

// Static version string, NUL-terminated.
const char *pareig_version(void);

// Creates a 1D problem on the unit interval with `cells` mesh cells, the
// algebraic potential family `(c, theta_dec, b0_margin, s_max)`, and
// nonlinearity `eta u^p`. The handle must be freed with
// `pareig_problem_free`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum PareigStatus pareig_problem_new_1d(size_t cells,
                                        double eta,
                                        uint32_t p,
                                        double c,
                                        double theta_dec,
                                        double b0_margin,
                                        size_t s_max,
                                        enum PareigModeFamily family,
                                        struct PareigProblem **out);

// Frees a problem handle; null is ignored.
//
// # Safety
// `problem` must have come from `pareig_problem_new_1d` and not been freed.
void pareig_problem_free(struct PareigProblem *problem);

// Overrides the solver tolerance (relative nonlinear residual).
//
// # Safety
// `problem` must be a live handle.
enum PareigStatus pareig_problem_set_tolerance(struct PareigProblem *problem, double tol);

// Number of interior grid nodes (the length of eigenfunction buffers).
//
// # Safety
// `problem` must be a live handle.
size_t pareig_problem_len(const struct PareigProblem *problem);

// Solves the ground state at the parameter point `y[0..y_len]` (each
// coordinate in [-1/2, 1/2]; `y` may be null when `y_len` is zero). On
// success `*out` owns a state handle.
//
// # Safety
// `y` must point to `y_len` doubles (or be null with `y_len == 0`); `out`
// must be a valid slot.
enum PareigStatus pareig_solve_ground(const struct PareigProblem *problem,
                                      const double *y,
                                      size_t y_len,
                                      struct PareigGroundState **out);

// Frees a ground-state handle; null is ignored.
//
// # Safety
// `state` must have come from `pareig_solve_ground` and not been freed.
void pareig_ground_state_free(struct PareigGroundState *state);

// Ground eigenvalue; NaN on a null handle.
//
// # Safety
// `state` must be a live handle.
double pareig_ground_state_lambda(const struct PareigGroundState *state);

// Ground energy; NaN on a null handle.
//
// # Safety
// `state` must be a live handle.
double pareig_ground_state_energy(const struct PareigGroundState *state);

// Final nonlinear residual norm; NaN on a null handle.
//
// # Safety
// `state` must be a live handle.
double pareig_ground_state_residual(const struct PareigGroundState *state);

// Number of eigenfunction samples held by the state.
//
// # Safety
// `state` must be a live handle.
size_t pareig_ground_state_len(const struct PareigGroundState *state);

// Copies the eigenfunction samples (interior nodes, lexicographic order)
// into `buf`.
//
// # Safety
// `buf` must point to at least `len` writable doubles.
enum PareigStatus pareig_ground_state_copy_u(const struct PareigGroundState *state,
                                             double *buf,
                                             size_t len);

// Ground eigenvalue of the second linearization and the gap diagnostics at
// a converged state: `lambda_t`, `gap = lambda_t - lambda`, and the
// positivity witness.
//
// # Safety
// Handles must be live; output pointers may be null to skip a field.
enum PareigStatus pareig_gap(const struct PareigProblem *problem,
                             const struct PareigGroundState *state,
                             double *lambda_t,
                             double *gap,
                             double *witness);

// Smallest eigenvalue of the second linearization `T` alone.
//
// # Safety
// Handles must be live; `out` must be a valid slot.
enum PareigStatus pareig_lambda_t(const struct PareigProblem *problem,
                                  const struct PareigGroundState *state,
                                  double *out);

// Component-by-component generating vector for a prime modulus `n` and
// weight parameters `beta[0..s]`, `theta in (1/2, 1]`; writes `s`
// components into `z_out`.
//
// # Safety
// `beta` must point to `s` doubles and `z_out` to `s` writable u64 slots.
enum PareigStatus pareig_cbc_generating_vector(uint64_t n,
                                               const double *beta,
                                               size_t s,
                                               double theta,
                                               uint64_t *z_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAREIG_H */
