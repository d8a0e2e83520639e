#ifndef SATLINK_H
#define SATLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SatlinkStatus {
  SATLINK_STATUS_OK = 0,
  SATLINK_STATUS_NULL_POINTER = 1,
  SATLINK_STATUS_INVALID_ARGUMENT = 2,
  // The scenario or PLR table failed validation.
  SATLINK_STATUS_INVALID_CONFIG = 3,
  SATLINK_STATUS_IO = 4,
  // The requested value does not exist, e.g. a flow that never received
  // `n` datagrams.
  SATLINK_STATUS_NOT_FOUND = 5,
  SATLINK_STATUS_INTERNAL = 6,
} SatlinkStatus;

// A packet loss ratio curve.
typedef struct SatlinkCurve SatlinkCurve;

// The outcome of one run.
typedef struct SatlinkResult SatlinkResult;

// A simulation scenario.
typedef struct SatlinkScenario SatlinkScenario;

typedef struct SatlinkSessionStats {
  uint64_t min;
  uint64_t median;
  uint64_t max;
} SatlinkSessionStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message of the last failure on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *satlink_last_error(void);

// Library version as a static NUL-terminated string.
const char *satlink_version(void);

// Default scenario with `sessions` flows on `access` (`dedicated`,
// `crdsa3` or `musca3`).
//
// # Safety
// `access` must be a NUL-terminated string; `out` must be writable.
enum SatlinkStatus satlink_scenario_new(const char *access,
                                        uint32_t sessions,
                                        struct SatlinkScenario **out);

// Parses scenario text in `key = value` form. A relative `plr_table` is
// resolved against the current directory.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum SatlinkStatus satlink_scenario_parse(const char *text, struct SatlinkScenario **out);

// Reads a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SatlinkStatus satlink_scenario_from_file(const char *path, struct SatlinkScenario **out);

// # Safety
// `scenario` must come from this library and not have been freed.
enum SatlinkStatus satlink_scenario_set_seed(struct SatlinkScenario *scenario, uint64_t seed);

// # Safety
// `scenario` must come from this library and not have been freed.
enum SatlinkStatus satlink_scenario_set_duration_ms(struct SatlinkScenario *scenario, uint64_t ms);

// Checks the scenario; on failure the last error lists every violation.
//
// # Safety
// `scenario` must come from this library and not have been freed.
enum SatlinkStatus satlink_scenario_validate(const struct SatlinkScenario *scenario);

// The scenario in file syntax; release with [`satlink_string_free`].
//
// # Safety
// `scenario` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_scenario_to_text(const struct SatlinkScenario *scenario, char **out);

// # Safety
// `scenario` must come from this library or be NULL, and is invalid after
// the call.
void satlink_scenario_free(struct SatlinkScenario *scenario);

// # Safety
// `s` must come from this library or be NULL.
void satlink_string_free(char *s);

// Runs the scenario to completion.
//
// # Safety
// `scenario` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_run(const struct SatlinkScenario *scenario, struct SatlinkResult **out);

// # Safety
// `result` must come from this library or be NULL, and is invalid after
// the call.
void satlink_result_free(struct SatlinkResult *result);

// # Safety
// `result` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_result_num_flows(const struct SatlinkResult *result, uint32_t *out);

// Distinct datagrams received for `flow`.
//
// # Safety
// `result` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_result_delivered(const struct SatlinkResult *result,
                                            uint32_t flow,
                                            uint64_t *out);

// Aggregate goodput in bit/s.
//
// # Safety
// `result` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_result_throughput_bps(const struct SatlinkResult *result, double *out);

// Datagrams dropped at the gateway over all datagrams that reached it.
//
// # Safety
// `result` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_result_loss_ratio(const struct SatlinkResult *result, double *out);

// Min, median and max delivered datagrams per session.
//
// # Safety
// `result` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_result_session_stats(const struct SatlinkResult *result,
                                                struct SatlinkSessionStats *out);

// Seconds until `flow` had received `n` datagrams in order;
// `SATLINK_STATUS_NOT_FOUND` if it never did.
//
// # Safety
// `result` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_result_time_to_n(const struct SatlinkResult *result,
                                            uint32_t flow,
                                            uint64_t n,
                                            double *out);

// Writes the reception trace as CSV (`time_s,flow_id,seq_no`).
//
// # Safety
// `result` must come from this library; `path` must be a NUL-terminated
// string.
enum SatlinkStatus satlink_result_write_trace(const struct SatlinkResult *result, const char *path);

// Monte Carlo PLR curve of `method` over `len` loads (packets per block).
//
// # Safety
// `method` must be a NUL-terminated string, `loads` must point to `len`
// values, and `out` must be writable.
enum SatlinkStatus satlink_curve_estimate(const char *method,
                                          const uint32_t *loads,
                                          size_t len,
                                          uint64_t trials,
                                          uint64_t seed,
                                          struct SatlinkCurve **out);

// Reads a `load,plr` CSV file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SatlinkStatus satlink_curve_from_file(const char *path, struct SatlinkCurve **out);

// # Safety
// `curve` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_curve_len(const struct SatlinkCurve *curve, size_t *out);

// The `index`-th tabulated point.
//
// # Safety
// `curve` must come from this library; `load` and `plr` must be writable.
enum SatlinkStatus satlink_curve_point(const struct SatlinkCurve *curve,
                                       size_t index,
                                       double *load,
                                       double *plr);

// Interpolated PLR at `load`.
//
// # Safety
// `curve` must come from this library; `out` must be writable.
enum SatlinkStatus satlink_curve_lookup(const struct SatlinkCurve *curve, double load, double *out);

// # Safety
// `curve` must come from this library or be NULL, and is invalid after the
// call.
void satlink_curve_free(struct SatlinkCurve *curve);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SATLINK_H */
