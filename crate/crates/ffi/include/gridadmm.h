#ifndef GRIDADMM_H
#define GRIDADMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Per-element result arrays.
 */
typedef enum GaField {
  /**
   * Real generation, one per generator (p.u.).
   */
  GA_FIELD_PG = 0,
  /**
   * Reactive generation, one per generator (p.u.).
   */
  GA_FIELD_QG = 1,
  /**
   * Voltage magnitude, one per bus (p.u.).
   */
  GA_FIELD_VM = 2,
  /**
   * Voltage angle, one per bus (rad).
   */
  GA_FIELD_VA = 3,
} GaField;

/**
 * Result codes of every fallible call.
 */
typedef enum GaStatus {
  GA_STATUS_OK = 0,
  GA_STATUS_NULL_POINTER = 1,
  GA_STATUS_INVALID_UTF8 = 2,
  GA_STATUS_IO = 3,
  GA_STATUS_PARSE = 4,
  GA_STATUS_INVALID_NETWORK = 5,
  GA_STATUS_INVALID_CONFIG = 6,
  GA_STATUS_NUMERICAL = 7,
  GA_STATUS_BUFFER_SIZE = 8,
  GA_STATUS_PANIC = 9,
} GaStatus;

/**
 * Opaque parsed network.
 */
typedef struct GaNetwork GaNetwork;

/**
 * Opaque solve result, also usable as a warm start.
 */
typedef struct GaSolution GaSolution;

/**
 * Solver settings exposed over the C ABI. Fields not listed keep their defaults.
 */
typedef struct GaConfig {
  double rho_pq;
  double rho_va;
  double beta0;
  double eps;
  double inner_tol;
  size_t max_outer;
  size_t max_inner;
  size_t workers;
} GaConfig;

/**
 * Scalar summary of a solve.
 */
typedef struct GaSummary {
  /**
   * 1 when `‖z‖` met the tolerance, 0 when the outer limit was hit.
   */
  int32_t converged;
  size_t outer_iterations;
  size_t inner_iterations;
  double objective;
  double max_violation;
  double elapsed_s;
} GaSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when there is no message.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ga_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ga_version(void);

/**
 * Parses a MATPOWER case file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum GaStatus ga_network_from_file(const char *path, struct GaNetwork **out);

/**
 * Parses MATPOWER case text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum GaStatus ga_network_from_string(const char *text, struct GaNetwork **out);

/**
 * Element counts of a network.
 *
 * # Safety
 * `net` must come from `ga_network_from_*`; output pointers may be null.
 */
enum GaStatus ga_network_counts(const struct GaNetwork *net,
                                size_t *buses,
                                size_t *generators,
                                size_t *branches);

/**
 * Releases a network; null is ignored.
 *
 * # Safety
 * `net` must be null or come from `ga_network_from_*`, and not be used afterwards.
 */
void ga_network_free(struct GaNetwork *net);

/**
 * Fills `out` with the default settings.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GaStatus ga_config_default(struct GaConfig *out);

/**
 * Fills `out` with the defaults plus the named case's penalty preset.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum GaStatus ga_config_preset(const char *name, struct GaConfig *out);

/**
 * Solves from a cold start, or from `warm` when it is not null.
 *
 * # Safety
 * `net` and `config` must be valid; `warm` null or a solution of the same
 * network layout; `out` a valid pointer.
 */
enum GaStatus ga_solve(const struct GaNetwork *net,
                       const struct GaConfig *config,
                       const struct GaSolution *warm,
                       struct GaSolution **out);

/**
 * Scalar summary of a solution.
 *
 * # Safety
 * `sol` must come from `ga_solve`; `out` must be a valid pointer.
 */
enum GaStatus ga_solution_summary(const struct GaSolution *sol, struct GaSummary *out);

/**
 * Copies one result array into `buf`, which must hold exactly the element
 * count (generators for `Pg`/`Qg`, buses for `Vm`/`Va`).
 *
 * # Safety
 * `sol` must come from `ga_solve`; `buf` must point to `len` writable doubles.
 */
enum GaStatus ga_solution_values(const struct GaSolution *sol,
                                 enum GaField field,
                                 double *buf,
                                 size_t len);

/**
 * Releases a solution; null is ignored.
 *
 * # Safety
 * `sol` must be null or come from `ga_solve`, and not be used afterwards.
 */
void ga_solution_free(struct GaSolution *sol);

/**
 * Relative objective gap `|f - f*| / f*`; `reference` must be positive.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GaStatus ga_report_gap(double objective, double reference, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDADMM_H */
