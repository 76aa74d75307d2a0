#ifndef NLSLAB_H
#define NLSLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum NlsStatus {
  NLS_STATUS_OK = 0,
  NLS_STATUS_NULL_POINTER = 1,
  NLS_STATUS_INVALID_ARGUMENT = 2,
  NLS_STATUS_CONFIG = 3,
  NLS_STATUS_NUMERICAL = 4,
  NLS_STATUS_IO = 5,
  NLS_STATUS_BUFFER_TOO_SMALL = 6,
  NLS_STATUS_PANIC = 7,
} NlsStatus;

typedef enum NlsVerdict {
  NLS_VERDICT_SCATTERING_CONSISTENT = 0,
  NLS_VERDICT_BLOWUP = 1,
  NLS_VERDICT_INCONCLUSIVE = 2,
} NlsVerdict;

/**
 * Opaque run configuration.
 */
typedef struct NlsConfig NlsConfig;

/**
 * Opaque cutoff family.
 */
typedef struct NlsCutoffs NlsCutoffs;

/**
 * Opaque ground state.
 */
typedef struct NlsGroundState NlsGroundState;

/**
 * Opaque finished run: series, summary and final checkpoint.
 */
typedef struct NlsRun NlsRun;

typedef struct NlsNorms {
  double mass;
  double kinetic;
  double l4_fourth;
  double energy;
  double sup_abs;
} NlsNorms;

typedef struct NlsThresholds {
  double em_threshold;
  double k_threshold;
  double gn_constant;
  double delta_prime;
  double rho;
} NlsThresholds;

typedef struct NlsCutoffValues {
  double chi;
  double phi;
  double phi1;
  double psi;
} NlsCutoffValues;

/**
 * One sampled row of a run.
 */
typedef struct NlsRow {
  double t;
  struct NlsNorms norms;
  double action;
  double flux;
  double interaction;
  double virial;
} NlsRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *nlslab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nlslab_version(void);

/**
 * Ground state on the free-space grid `[0, r_max]` with `n` nodes.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum NlsStatus nlslab_ground_state_new(double tol,
                                       double r_max,
                                       size_t n,
                                       struct NlsGroundState **out);

/**
 * `Q(0)`, or NaN for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle from [`nlslab_ground_state_new`].
 */
double nlslab_ground_state_a0(const struct NlsGroundState *gs);

/**
 * `Q(r)` with the exponential tail beyond the grid, or NaN for a null handle.
 *
 * # Safety
 * `gs` must be null or a live handle from [`nlslab_ground_state_new`].
 */
double nlslab_ground_state_value(const struct NlsGroundState *gs, double r);

/**
 * # Safety
 * `gs` must be a live handle and `out` valid for one write.
 */
enum NlsStatus nlslab_ground_state_norms(const struct NlsGroundState *gs, struct NlsNorms *out);

/**
 * # Safety
 * `gs` must be a live handle and `out` valid for one write.
 */
enum NlsStatus nlslab_ground_state_thresholds(const struct NlsGroundState *gs,
                                              double delta_prime,
                                              double rho,
                                              struct NlsThresholds *out);

/**
 * # Safety
 * `gs` must be null or a handle not yet freed.
 */
void nlslab_ground_state_free(struct NlsGroundState *gs);

/**
 * Parses `key = value` configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for one write.
 */
enum NlsStatus nlslab_config_parse(const char *text, struct NlsConfig **out);

/**
 * Sets one key; the configuration is left unchanged on failure.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum NlsStatus nlslab_config_set(struct NlsConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void nlslab_config_free(struct NlsConfig *cfg);

/**
 * # Safety
 * `out` must be valid for one write.
 */
enum NlsStatus nlslab_cutoffs_new(double radius, double eta, size_t n_tab, struct NlsCutoffs **out);

/**
 * `χ, φ, φ₁, ψ` at radius `r`.
 *
 * # Safety
 * `cf` must be a live handle and `out` valid for one write.
 */
enum NlsStatus nlslab_cutoffs_eval(const struct NlsCutoffs *cf,
                                   double r,
                                   struct NlsCutoffValues *out);

/**
 * # Safety
 * `cf` must be null or a handle not yet freed.
 */
void nlslab_cutoffs_free(struct NlsCutoffs *cf);

/**
 * Runs the configuration from its initial data.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for one write.
 */
enum NlsStatus nlslab_run(const struct NlsConfig *cfg, struct NlsRun **out);

/**
 * Number of sampled rows, 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t nlslab_run_rows(const struct NlsRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` valid for one write.
 */
enum NlsStatus nlslab_run_row(const struct NlsRun *run, size_t index, struct NlsRow *out);

/**
 * # Safety
 * `run` must be a live handle and `out` valid for one write.
 */
enum NlsStatus nlslab_run_verdict(const struct NlsRun *run, enum NlsVerdict *out);

/**
 * Copies the series CSV into `buf`, NUL-terminated. `needed` (if not null)
 * receives the required size including the terminator; call with a null
 * `buf` to query it.
 *
 * # Safety
 * `run` must be a live handle; `buf` null or valid for `cap` bytes.
 */
enum NlsStatus nlslab_run_series_csv(const struct NlsRun *run,
                                     char *buf,
                                     size_t cap,
                                     size_t *needed);

/**
 * Copies the summary JSON, with the same buffer protocol as
 * [`nlslab_run_series_csv`].
 *
 * # Safety
 * `run` must be a live handle; `buf` null or valid for `cap` bytes.
 */
enum NlsStatus nlslab_run_summary_json(const struct NlsRun *run,
                                       char *buf,
                                       size_t cap,
                                       size_t *needed);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void nlslab_run_free(struct NlsRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLSLAB_H */
