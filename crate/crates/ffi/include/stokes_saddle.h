#ifndef STOKES_SADDLE_H
#define STOKES_SADDLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SspOuter {
  SSP_OUTER_RGMRES = 0,
  SSP_OUTER_FGMRES = 1,
} SspOuter;

typedef enum SspPrecond {
  SSP_PRECOND_PR = 0,
  SSP_PRECOND_PGR = 1,
} SspPrecond;

/*
 Result codes.
 */
typedef enum SspStatus {
  SSP_STATUS_OK = 0,
  SSP_STATUS_NULL_POINTER = 1,
  SSP_STATUS_INVALID_ARGUMENT = 2,
  SSP_STATUS_DIMENSION_MISMATCH = 3,
  SSP_STATUS_NOT_CONVERGED = 4,
  SSP_STATUS_BREAKDOWN = 5,
  SSP_STATUS_NUMERICAL = 6,
  SSP_STATUS_IO = 7,
  SSP_STATUS_PANIC = 8,
} SspStatus;

/*
 Opaque assembled saddle-point system.
 */
typedef struct SspSystem SspSystem;

typedef struct SspSolveOptions {
  enum SspOuter outer;
  enum SspPrecond precond;
  /*
   Regularization parameter; zero or negative selects the automatic value.
   */
  double beta;
  double tol;
  size_t restart;
  size_t max_iters;
} SspSolveOptions;

typedef struct SspSolveStats {
  size_t iterations;
  /*
   1 when the outer method met its tolerance.
   */
  int32_t converged;
  double beta;
  double res;
  double rres;
  size_t inner_a_solves;
  double wall_time;
} SspSolveStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Assembles the channel problem on an `nx × ny × nz` box mesh of
 `(0, 2.2) × (0, 0.41)²`. `unscaled_c` nonzero selects the unscaled bubble
 block. Writes a new handle to `*out`.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SspStatus ssp_system_assemble_channel(size_t nx,
                                           size_t ny,
                                           size_t nz,
                                           double alpha,
                                           double nu,
                                           int32_t unscaled_c,
                                           struct SspSystem **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `sys` must be null or a handle from [`ssp_system_assemble_channel`]
 that has not been freed.
 */
void ssp_system_free(struct SspSystem *sys);

/*
 Velocity unknowns per component and pressure unknowns.

 # Safety
 `sys` must be a live handle; `n_u` and `n_p` must be writable.
 */
enum SspStatus ssp_system_dims(const struct SspSystem *sys, size_t *n_u, size_t *n_p);

/*
 `y = 𝒜 x` with `x`, `y` of length `3 n_u + n_p`, ordered
 `(u₁, u₂, u₃, p)`.

 # Safety
 `x` and `y` must hold `len` doubles and must not overlap.
 */
enum SspStatus ssp_system_apply(const struct SspSystem *sys,
                                const double *x,
                                double *y,
                                size_t len);

/*
 Copies the right-hand side `d` into `out`.

 # Safety
 `out` must hold `len` writable doubles.
 */
enum SspStatus ssp_system_rhs(const struct SspSystem *sys, double *out, size_t len);

/*
 Writes the blocks as Matrix Market files plus metadata into `dir`.

 # Safety
 `dir` must be a NUL-terminated UTF-8 path.
 */
enum SspStatus ssp_system_export(const struct SspSystem *sys, const char *dir);

/*
 Heuristic β raised, if necessary, to satisfy the estimated
 positive-definiteness certificate.

 # Safety
 `beta` must be writable.
 */
enum SspStatus ssp_beta_auto(const struct SspSystem *sys, double *beta);

/*
 Restarted GMRES with P_Gr, `tol = 1e-6`, restart 20, 200 iterations,
 automatic β.
 */
struct SspSolveOptions ssp_solve_options_default(void);

/*
 Solves `𝒜 x = d` from `x = 0`. The solution is written to `x` even when
 the outer method stops unconverged; `SSP_STATUS_NOT_CONVERGED` is
 returned in that case. `stats` may be null.

 # Safety
 `opts` must be readable, `x` must hold `len` writable doubles and
 `stats` must be null or writable.
 */
enum SspStatus ssp_solve(const struct SspSystem *sys,
                         const struct SspSolveOptions *opts,
                         double *x,
                         size_t len,
                         struct SspSolveStats *stats);

/*
 Copies the last error message of the calling thread into `buf`
 (NUL-terminated, truncated to `len − 1` bytes) and returns the full
 message length in bytes, excluding the terminator.

 # Safety
 `buf` must be null or hold `len` writable bytes.
 */
size_t ssp_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOKES_SADDLE_H */
