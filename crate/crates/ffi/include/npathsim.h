#ifndef NPATHSIM_H
#define NPATHSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum NpsStatus {
  /**
   * Success.
   */
  NpsOk = 0,
  /**
   * Configuration problem (bad key, bad value, unparseable text).
   */
  NpsErrConfig = 2,
  /**
   * Simulation failure (singular topology, synthesis failure, ...).
   */
  NpsErrSim = 3,
  /**
   * Invalid argument (null pointer, unknown probe, bad range).
   */
  NpsErrArg = 4,
  /**
   * Panic caught at the boundary; state is still consistent.
   */
  NpsErrInternal = 5,
} NpsStatus;

/**
 * Opaque configuration accumulator.
 */
typedef struct NpsConfig NpsConfig;

/**
 * Opaque built receiver (netlist + lifted model), immutable and thread-safe
 * to share for read-only analysis calls.
 */
typedef struct NpsReceiver NpsReceiver;

/**
 * Opaque sweep result.
 */
typedef struct NpsSweep NpsSweep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Borrowed; valid until
 * the next failing call from the same thread.
 */
const char *nps_last_error(void);

/**
 * Library version as a static string.
 */
const char *nps_version(void);

/**
 * Creates an empty configuration (all defaults).
 */
struct NpsConfig *nps_config_new(void);

/**
 * Parses configuration text (the key = value file format) into `cfg`,
 * replacing any keys already present.
 *
 * # Safety
 * `cfg` must be a live handle from `nps_config_new`; `text` a NUL-terminated
 * UTF-8 string.
 */
enum NpsStatus nps_config_load(struct NpsConfig *cfg, const char *text);

/**
 * Sets one configuration key.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum NpsStatus nps_config_set(struct NpsConfig *cfg, const char *key, const char *value);

/**
 * Releases a configuration handle.
 *
 * # Safety
 * `cfg` must be a handle from `nps_config_new` (or null) and must not be
 * used afterwards.
 */
void nps_config_free(struct NpsConfig *cfg);

/**
 * Builds the receiver described by `cfg` and lifts it for analysis.
 * Returns null on failure with the status in `status_out` (may be null).
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
struct NpsReceiver *nps_receiver_build(const struct NpsConfig *cfg, int *status_out);

/**
 * Releases a receiver handle.
 *
 * # Safety
 * `rx` must come from `nps_receiver_build` (or be null) and must not be
 * used afterwards.
 */
void nps_receiver_free(struct NpsReceiver *rx);

/**
 * Number of LTI segments in one LO period of the lifted model.
 *
 * # Safety
 * `rx` must be a live receiver handle.
 */
int nps_receiver_segments(const struct NpsReceiver *rx);

/**
 * Effective configuration hash (reproducibility fingerprint).
 *
 * # Safety
 * `rx` must be a live receiver handle.
 */
uint64_t nps_receiver_config_hash(const struct NpsReceiver *rx);

/**
 * Steady-state tone response at one probe: fills out_re/out_im\[i\] with the
 * complex amplitude at f_in + (i - kmax) * f_lo, for i in 0..=2*kmax.
 *
 * # Safety
 * `rx` must be a live receiver handle, `probe` NUL-terminated, and the out
 * arrays must hold at least 2*kmax+1 elements each.
 */
enum NpsStatus nps_tone_response(const struct NpsReceiver *rx,
                                 double f_in,
                                 const char *probe,
                                 int kmax,
                                 double *out_re,
                                 double *out_im);

/**
 * Runs a linear frequency sweep. Returns null on failure with the status in
 * `status_out` (may be null).
 *
 * # Safety
 * `rx` must be a live receiver handle.
 */
struct NpsSweep *nps_sweep_run(const struct NpsReceiver *rx,
                               double f_start,
                               double f_stop,
                               int points,
                               int kmax,
                               int *status_out);

/**
 * Number of sweep points.
 *
 * # Safety
 * `sweep` must be a live sweep handle.
 */
int nps_sweep_len(const struct NpsSweep *sweep);

/**
 * Input frequency of sweep point `idx` (NaN when out of range).
 *
 * # Safety
 * `sweep` must be a live sweep handle.
 */
double nps_sweep_frequency(const struct NpsSweep *sweep, int idx);

/**
 * Complex component k at a probe for sweep point `idx`.
 *
 * # Safety
 * `sweep` must be a live sweep handle, `probe` NUL-terminated, `re`/`im`
 * valid single-value out pointers.
 */
enum NpsStatus nps_sweep_component(const struct NpsSweep *sweep,
                                   int idx,
                                   const char *probe,
                                   int k,
                                   double *re,
                                   double *im);

/**
 * Releases a sweep handle.
 *
 * # Safety
 * `sweep` must come from `nps_sweep_run` (or be null) and must not be used
 * afterwards.
 */
void nps_sweep_free(struct NpsSweep *sweep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NPATHSIM_H */
