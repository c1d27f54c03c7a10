#ifndef GHZ_LAB_H
#define GHZ_LAB_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GhzStatus {
  GHZ_STATUS_OK = 0,
  GHZ_STATUS_NULL_ARGUMENT = 1,
  GHZ_STATUS_INVALID_UTF8 = 2,
  GHZ_STATUS_INVALID_ARGUMENT = 3,
  GHZ_STATUS_UNSUPPORTED_SHAPE = 4,
  GHZ_STATUS_NUMERIC = 5,
  GHZ_STATUS_PANIC = 6,
} GhzStatus;

/**
 * Verdict of a causal-channel audit.
 */
typedef struct GhzAuditReport GhzAuditReport;

/**
 * A validated nonlocal game.
 */
typedef struct GhzGame GhzGame;

/**
 * Outcome of a Monte Carlo run.
 */
typedef struct GhzRunReport GhzRunReport;

/**
 * An experiment timeline (sites and events).
 */
typedef struct GhzTimeline GhzTimeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or NULL.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *ghz_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ghz_string_free(char *s);

/**
 * The canonical three-player game.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum GhzStatus ghz_game_canonical(struct GhzGame **out);

/**
 * Parses and validates a game from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum GhzStatus ghz_game_from_json(const char *json, struct GhzGame **out);

/**
 * # Safety
 * `game` must be NULL or a handle from this library not yet freed.
 */
void ghz_game_free(struct GhzGame *game);

/**
 * The game as JSON.
 *
 * # Safety
 * `game` must be a live handle; `out` must be writable.
 */
enum GhzStatus ghz_game_to_json(const struct GhzGame *game, char **out);

/**
 * Exact classical value as a reduced fraction `num/den`.
 *
 * # Safety
 * `game` must be a live handle; `num` and `den` must be writable.
 */
enum GhzStatus ghz_classical_value(const struct GhzGame *game, int64_t *num, int64_t *den);

/**
 * Winning probability of the GHZ state with the given relative sign
 * (`-1` or `+1`) under the default X/Y measurement assignment.
 *
 * # Safety
 * `game` must be a live handle; `out` must be writable.
 */
enum GhzStatus ghz_quantum_value(const struct GhzGame *game, int32_t sign, double *out);

/**
 * Runs `trials` Monte Carlo rounds. `strategy_json` is a strategy
 * description in the CLI config format, or NULL for the ideal quantum
 * strategy. `workers == 0` picks the thread count automatically; results do
 * not depend on it. Non-detections are scored as losses unless
 * `postselect` is nonzero.
 *
 * # Safety
 * `game` must be a live handle, `strategy_json` NULL or NUL-terminated, and
 * `out` writable.
 */
enum GhzStatus ghz_simulate(const struct GhzGame *game,
                            const char *strategy_json,
                            uint64_t trials,
                            uint64_t master_seed,
                            size_t workers,
                            int32_t postselect,
                            struct GhzRunReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle from this library not yet freed.
 */
void ghz_run_report_free(struct GhzRunReport *report);

/**
 * Trial counts of a run. Any of the output pointers may be NULL.
 *
 * # Safety
 * `report` must be a live handle; non-NULL outputs must be writable.
 */
enum GhzStatus ghz_run_report_counts(const struct GhzRunReport *report,
                                     uint64_t *trials,
                                     uint64_t *wins,
                                     uint64_t *discarded);

/**
 * Observed win rate and the one-sided p-value against the configured bound.
 *
 * # Safety
 * `report` must be a live handle; non-NULL outputs must be writable.
 */
enum GhzStatus ghz_run_report_stats(const struct GhzRunReport *report,
                                    double *win_rate,
                                    double *p_value,
                                    double *log10_p_value);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum GhzStatus ghz_run_report_to_json(const struct GhzRunReport *report, char **out);

/**
 * Detection-efficiency threshold to tolerance `tol`. The full report
 * (witness and certificate) is written to `report_json` unless it is NULL.
 *
 * # Safety
 * `game` must be a live handle; `eta_star` writable; `report_json` NULL or writable.
 */
enum GhzStatus ghz_threshold(const struct GhzGame *game,
                             double tol,
                             double *eta_star,
                             char **report_json);

/**
 * One of the built-in timelines by name.
 *
 * # Safety
 * `name` must be NUL-terminated; `out` must be writable.
 */
enum GhzStatus ghz_timeline_preset(const char *name, struct GhzTimeline **out);

/**
 * Parses a timeline from JSON. Validation happens at audit time.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum GhzStatus ghz_timeline_from_json(const char *json, struct GhzTimeline **out);

/**
 * # Safety
 * `timeline` must be NULL or a handle from this library not yet freed.
 */
void ghz_timeline_free(struct GhzTimeline *timeline);

/**
 * # Safety
 * `timeline` must be a live handle; `out` must be writable.
 */
enum GhzStatus ghz_audit(const struct GhzTimeline *timeline, struct GhzAuditReport **out);

/**
 * # Safety
 * `report` must be NULL or a handle from this library not yet freed.
 */
void ghz_audit_free(struct GhzAuditReport *report);

/**
 * Writes 1 if every channel is closed, else 0.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum GhzStatus ghz_audit_all_closed(const struct GhzAuditReport *report, int32_t *out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum GhzStatus ghz_audit_to_json(const struct GhzAuditReport *report, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GHZ_LAB_H */
