#ifndef FRACOPS_H
#define FRACOPS_H

/* Generated by cbindgen from fracops-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an ABI call.
 */
typedef enum FracopsStatus {
  FRACOPS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  FRACOPS_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  FRACOPS_STATUS_INVALID_UTF8 = 2,
  /**
   * The configuration failed to parse or validate.
   */
  FRACOPS_STATUS_CONFIG = 3,
  /**
   * Scenario parameters violate a mathematical precondition.
   */
  FRACOPS_STATUS_DOMAIN = 4,
  /**
   * A scenario index was out of range.
   */
  FRACOPS_STATUS_INDEX = 5,
  /**
   * At least one matrix family has a non-invertible pairwise difference.
   */
  FRACOPS_STATUS_HYPOTHESIS_VIOLATED = 6,
  /**
   * Unexpected internal failure; see the last-error message.
   */
  FRACOPS_STATUS_INTERNAL = 7,
} FracopsStatus;

/**
 * Parsed scenario suite plus the exact source text it echoes into reports.
 */
typedef struct FracopsConfig FracopsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread.
 *
 * The pointer stays valid until the next failing call on the same thread;
 * an empty string means no failure has been recorded yet.
 */
const char *fracops_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *fracops_version(void);

/**
 * Parse a JSON scenario suite.
 *
 * # Safety
 * `text` must point to a nul-terminated string and `out` to writable
 * storage for one pointer. On success `*out` owns the suite and must be
 * released with [`fracops_config_free`].
 */
enum FracopsStatus fracops_config_parse(const char *text, struct FracopsConfig **out);

/**
 * Load the scenario suite compiled into the library.
 *
 * # Safety
 * `out` must point to writable storage for one pointer; on success `*out`
 * must be released with [`fracops_config_free`].
 */
enum FracopsStatus fracops_config_default(struct FracopsConfig **out);

/**
 * Release a suite handle; null is ignored.
 *
 * # Safety
 * `cfg` must be null or a pointer obtained from a config constructor that
 * has not been freed already.
 */
void fracops_config_free(struct FracopsConfig *cfg);

/**
 * Number of scenarios in the suite.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` writable.
 */
enum FracopsStatus fracops_config_scenario_count(const struct FracopsConfig *cfg, size_t *out);

/**
 * Name of one scenario, returned as a caller-owned string.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` writable; release `*out`
 * with [`fracops_string_free`].
 */
enum FracopsStatus fracops_config_scenario_name(const struct FracopsConfig *cfg,
                                                size_t index,
                                                char **out);

/**
 * Run one scenario at its grid size and at double resolution; `*out_json`
 * receives the report serialized as JSON.
 *
 * # Safety
 * `cfg` must be a live config handle and `out_json` writable; release
 * `*out_json` with [`fracops_string_free`].
 */
enum FracopsStatus fracops_run_scenario(const struct FracopsConfig *cfg,
                                        size_t index,
                                        char **out_json);

/**
 * Run every scenario in order; `*out_json` receives a JSON array of
 * reports identical to the report.json emitted by the command line.
 *
 * # Safety
 * `cfg` must be a live config handle and `out_json` writable; release
 * `*out_json` with [`fracops_string_free`].
 */
enum FracopsStatus fracops_run_all(const struct FracopsConfig *cfg, char **out_json);

/**
 * Check the invertibility hypothesis for every scenario kernel and write a
 * JSON summary; returns `HypothesisViolated` when any family fails.
 *
 * # Safety
 * `cfg` must be a live config handle and `out_json` writable; release
 * `*out_json` with [`fracops_string_free`].
 */
enum FracopsStatus fracops_check_kernels(const struct FracopsConfig *cfg, char **out_json);

/**
 * Release a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library that has not
 * been freed already.
 */
void fracops_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FRACOPS_H */
