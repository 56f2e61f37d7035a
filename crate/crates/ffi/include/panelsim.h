#ifndef PANELSIM_H
#define PANELSIM_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of UE panels.
 */
#define PANELSIM_NUM_PANELS 3

typedef enum PanelsimStatus {
  PANELSIM_STATUS_OK = 0,
  PANELSIM_STATUS_NULL_POINTER = 1,
  PANELSIM_STATUS_INVALID_UTF8 = 2,
  PANELSIM_STATUS_INVALID_CONFIG = 3,
  PANELSIM_STATUS_PARSE = 4,
  PANELSIM_STATUS_IO = 5,
  PANELSIM_STATUS_DOMAIN = 6,
  PANELSIM_STATUS_BUFFER_TOO_SMALL = 7,
  PANELSIM_STATUS_PANIC = 8,
} PanelsimStatus;

/**
 * Opaque scenario configuration.
 */
typedef struct PanelsimConfig PanelsimConfig;

/**
 * Opaque result of one run.
 */
typedef struct PanelsimRun PanelsimRun;

/**
 * Per-UE-per-minute KPIs of a run plus the raw totals behind them.
 */
typedef struct PanelsimSummary {
  uint64_t n_ue;
  uint64_t sim_time_ms;
  uint64_t successful_hos;
  uint64_t hofs;
  uint64_t rlfs;
  uint64_t fast_hos;
  uint64_t panel_switches;
  uint64_t rxbeam_switches;
  double ho_per_ue_min;
  double failures_per_ue_min;
  double fastho_per_ue_min;
  double panelsw_per_ue_min;
  double rxbeamsw_per_ue_min;
  double outage_pct;
  double panel_stay_pct[PANELSIM_NUM_PANELS];
} PanelsimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *panelsim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *panelsim_version(void);

/**
 * Default scenario (420 UEs, 30 s).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum PanelsimStatus panelsim_config_default(struct PanelsimConfig **out);

/**
 * Desk-scale scenario (105 UEs, 10 s).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum PanelsimStatus panelsim_config_desk(struct PanelsimConfig **out);

/**
 * Parses and validates a TOML scenario document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum PanelsimStatus panelsim_config_from_toml(const char *text, struct PanelsimConfig **out);

/**
 * Loads a TOML scenario file; relative mask paths resolve against it.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PanelsimStatus panelsim_config_from_file(const char *path, struct PanelsimConfig **out);

/**
 * # Safety
 * `cfg` must come from a `panelsim_config_*` constructor and not be freed.
 */
enum PanelsimStatus panelsim_config_set_seed(struct PanelsimConfig *cfg, uint64_t seed);

/**
 * Sets the grip by name: FREE, RHB, DHS or DHG.
 *
 * # Safety
 * `cfg` must be a live handle; `grip` a NUL-terminated string.
 */
enum PanelsimStatus panelsim_config_set_grip(struct PanelsimConfig *cfg, const char *grip);

/**
 * Sets the panel and Rx-beam switching offsets in dB; both must be ≥ 0.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum PanelsimStatus panelsim_config_set_offsets(struct PanelsimConfig *cfg,
                                                double o_p_db,
                                                double o_b_db);

/**
 * Sets the number of UEs and the simulated time. Validated at run time.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum PanelsimStatus panelsim_config_set_population(struct PanelsimConfig *cfg,
                                                   size_t n_ue,
                                                   uint64_t duration_ms);

/**
 * Resolved configuration as TOML into `buf`; see [`panelsim_run_summary_csv`]
 * for the buffer protocol.
 *
 * # Safety
 * `cfg` must be a live handle; `buf` must hold `len` bytes or be NULL with
 * `len` 0; `needed` may be NULL.
 */
enum PanelsimStatus panelsim_config_to_toml(const struct PanelsimConfig *cfg,
                                            char *buf,
                                            size_t len,
                                            size_t *needed);

/**
 * # Safety
 * `cfg` must be NULL or a handle that has not been freed yet.
 */
void panelsim_config_free(struct PanelsimConfig *cfg);

/**
 * Runs one scenario to completion.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum PanelsimStatus panelsim_run(const struct PanelsimConfig *cfg, struct PanelsimRun **out);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum PanelsimStatus panelsim_run_summary(const struct PanelsimRun *run,
                                         struct PanelsimSummary *out);

/**
 * Summary CSV (header plus one row). Call with a NULL buffer to learn the
 * size through `needed`.
 *
 * # Safety
 * `run` must be a live handle; `buf` must hold `len` bytes or be NULL;
 * `needed` may be NULL.
 */
enum PanelsimStatus panelsim_run_summary_csv(const struct PanelsimRun *run,
                                             char *buf,
                                             size_t len,
                                             size_t *needed);

/**
 * Event log CSV; same buffer protocol as [`panelsim_run_summary_csv`].
 *
 * # Safety
 * As for [`panelsim_run_summary_csv`].
 */
enum PanelsimStatus panelsim_run_events_csv(const struct PanelsimRun *run,
                                            char *buf,
                                            size_t len,
                                            size_t *needed);

/**
 * Selection trace CSV; same buffer protocol as [`panelsim_run_summary_csv`].
 *
 * # Safety
 * As for [`panelsim_run_summary_csv`].
 */
enum PanelsimStatus panelsim_run_selection_csv(const struct PanelsimRun *run,
                                               char *buf,
                                               size_t len,
                                               size_t *needed);

/**
 * Writes every artifact of the run into directory `dir`.
 *
 * # Safety
 * `run` must be a live handle; `dir` a NUL-terminated string.
 */
enum PanelsimStatus panelsim_run_write(const struct PanelsimRun *run, const char *dir);

/**
 * # Safety
 * `run` must be NULL or a handle that has not been freed yet.
 */
void panelsim_run_free(struct PanelsimRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PANELSIM_H */
