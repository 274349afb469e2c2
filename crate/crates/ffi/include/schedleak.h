#ifndef SCHEDLEAK_H
#define SCHEDLEAK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_NOT_REPRESENTABLE = 3,
  SL_STATUS_UNSTABLE = 4,
  SL_STATUS_ALIGNMENT = 5,
  SL_STATUS_INCONSISTENT_OBSERVATION = 6,
  SL_STATUS_IO = 7,
  SL_STATUS_BUFFER_TOO_SMALL = 8,
  SL_STATUS_PANIC = 9,
} SlStatus;

typedef enum SlPolicy {
  SL_POLICY_FCFS = 0,
  SL_POLICY_TDMA = 1,
  SL_POLICY_ACCUMULATE_SERVE = 2,
  SL_POLICY_PROPORTIONAL_TDMA = 3,
} SlPolicy;

/**
 * A completed simulation.
 */
typedef struct SlRun SlRun;

/**
 * An arrival trace.
 */
typedef struct SlTrace SlTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *sl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

double sl_privacy_max(double target_rate, double clock_period);

double sl_privacy_bound_acc_serve(double target_rate,
                                  double clock_period,
                                  double accumulate_period);

double sl_privacy_bound_ptdma(double target_rate, double clock_period, double adaptation_period);

double sl_lambda_star(double accumulate_period);

/**
 * # Safety
 * `out` must be null or point to writable storage for one double.
 */
enum SlStatus sl_delay_fcfs(double lambda, double *out);

/**
 * # Safety
 * `rates` must point to `num_users` doubles; `out` to one writable double.
 */
enum SlStatus sl_delay_tdma(const double *rates, size_t num_users, double *out);

/**
 * # Safety
 * `out` must be null or point to writable storage for one double.
 */
enum SlStatus sl_delay_ptdma(double lambda, size_t num_users, double *out);

/**
 * # Safety
 * `out` must be null or point to writable storage for one double.
 */
enum SlStatus sl_delay_bound_acc_serve(double lambda, double accumulate_period, double *out);

/**
 * # Safety
 * `out` must be null or point to writable storage for one double.
 */
enum SlStatus sl_queue_bound_acc_serve(double lambda, double accumulate_period, double *out);

/**
 * Poisson arrivals of `rate` jobs per unit on `(0, horizon_ticks]`.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum SlStatus sl_trace_poisson(size_t owner,
                               double rate,
                               uint64_t job_size_ticks,
                               uint64_t seed,
                               uint64_t horizon_ticks,
                               uint64_t ticks_per_unit,
                               struct SlTrace **out);

/**
 * A trace from explicit, non-decreasing arrival ticks.
 *
 * # Safety
 * `times` must point to `len` values (or be null when `len` is 0); `out`
 * must point to writable storage for one handle.
 */
enum SlStatus sl_trace_from_ticks(size_t owner,
                                  uint64_t job_size_ticks,
                                  const uint64_t *times,
                                  size_t len,
                                  uint64_t horizon_ticks,
                                  struct SlTrace **out);

/**
 * Periodic probes of rate `probe_rate`, one every `c/⌈c⌉` units.
 *
 * # Safety
 * `out` must point to writable storage for one handle.
 */
enum SlStatus sl_trace_probes(size_t owner,
                              uint64_t clock_period_ticks,
                              double probe_rate,
                              double target_rate,
                              uint64_t horizon_ticks,
                              uint64_t ticks_per_unit,
                              struct SlTrace **out);

/**
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t sl_trace_len(const struct SlTrace *trace);

/**
 * # Safety
 * `trace` must be null or a handle not yet freed.
 */
void sl_trace_free(struct SlTrace *trace);

/**
 * Simulates `num_traces` traces under a policy. `period_ticks` is the
 * accumulate period or adaptation period and is ignored by FCFS and TDMA.
 *
 * # Safety
 * `traces` must point to `num_traces` live trace handles; `out` must point
 * to writable storage for one handle.
 */
enum SlStatus sl_run(enum SlPolicy policy,
                     uint64_t period_ticks,
                     uint64_t ticks_per_unit,
                     size_t num_users,
                     const struct SlTrace *const *traces,
                     size_t num_traces,
                     uint64_t horizon_ticks,
                     uint64_t seed,
                     struct SlRun **out);

/**
 * Drops jobs arriving before `warmup_ticks` from delay statistics.
 *
 * # Safety
 * `run` must be a live handle.
 */
enum SlStatus sl_run_set_warmup(struct SlRun *run, uint64_t warmup_ticks);

/**
 * Mean delay in units over measured jobs of every user.
 *
 * # Safety
 * `run` must be a live handle; `out` must point to one writable double.
 */
enum SlStatus sl_run_mean_delay(const struct SlRun *run, double *out);

/**
 * Departure ticks of one user's jobs. Writes the count to `len` even when
 * `capacity` is too small, so a first call with capacity 0 sizes the buffer.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `capacity` values; `len`
 * must point to one writable size_t.
 */
enum SlStatus sl_run_departures(const struct SlRun *run,
                                size_t user,
                                uint64_t *buf,
                                size_t capacity,
                                size_t *len);

/**
 * Reconstructs the target's per-clock-period counts from the attacker's
 * probes in an FCFS run.
 *
 * # Safety
 * `run` must be a live handle; `counts` must hold `periods` values.
 */
enum SlStatus sl_fcfs_reconstruct(const struct SlRun *run,
                                  size_t attacker,
                                  uint64_t clock_period_ticks,
                                  size_t periods,
                                  uint64_t *counts);

/**
 * True per-clock-period counts of a trace.
 *
 * # Safety
 * `trace` must be a live handle; `counts` must hold `periods` values.
 */
enum SlStatus sl_trace_bin_counts(const struct SlTrace *trace,
                                  uint64_t clock_period_ticks,
                                  size_t periods,
                                  uint64_t *counts);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void sl_run_free(struct SlRun *run);

/**
 * Runs an experiment described by a JSON config and returns a JSON report
 * `{"passed": bool, "summary": string, "rows": [...]}` in `report`, to be
 * released with [`sl_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `report` must point to
 * writable storage for one pointer.
 */
enum SlStatus sl_run_experiment_json(const char *config_json, char **report);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void sl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCHEDLEAK_H */
