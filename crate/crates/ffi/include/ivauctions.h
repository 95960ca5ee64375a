#ifndef IVAUCTIONS_H
#define IVAUCTIONS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every function.
 */
typedef enum IvaStatus {
  IVA_STATUS_OK = 0,
  /**
   * A null pointer, bad UTF-8 or an out-of-range index.
   */
  IVA_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The scenario or parameters failed validation.
   */
  IVA_STATUS_CONFIG = 2,
  /**
   * Signals outside their spaces, shape mismatches, uncovered strategies.
   */
  IVA_STATUS_DOMAIN = 3,
  /**
   * The profile is not an equilibrium.
   */
  IVA_STATUS_NOT_EQUILIBRIUM = 4,
  IVA_STATUS_IO = 5,
  IVA_STATUS_UNKNOWN_EXPERIMENT = 6,
  /**
   * A panic inside the library.
   */
  IVA_STATUS_INTERNAL = 7,
} IvaStatus;

/**
 * Opaque validated scenario.
 */
typedef struct IvaScenario IvaScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *iva_version(void);

/**
 * Message of the last failed call on this thread, empty after success.
 * Valid until the next call on this thread.
 */
const char *iva_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void iva_string_free(char *s);

/**
 * Parses and validates a scenario from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum IvaStatus iva_scenario_from_json(const char *json, struct IvaScenario **out);

/**
 * Loads and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum IvaStatus iva_scenario_load(const char *path, struct IvaScenario **out);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `h` must come from this library and not be freed twice.
 */
void iva_scenario_free(struct IvaScenario *h);

/**
 * Agents and items of the scenario's model.
 *
 * # Safety
 * `h` must be a live handle; `n` and `m` writable or null.
 */
enum IvaStatus iva_scenario_shape(const struct IvaScenario *h, size_t *n, size_t *m);

/**
 * Canonical JSON of the scenario.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum IvaStatus iva_scenario_canonical_json(const struct IvaScenario *h, char **out);

/**
 * Hex SHA-256 of the canonical JSON.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum IvaStatus iva_scenario_hash(const struct IvaScenario *h, char **out);

/**
 * Value of agent `agent` for item `item` at `signals`, an agent-major
 * `n * m` array. Signals must lie in their spaces.
 *
 * # Safety
 * `h` must be a live handle, `signals` readable for `len` values and
 * `out` writable.
 */
enum IvaStatus iva_eval(const struct IvaScenario *h,
                        size_t agent,
                        size_t item,
                        const double *signals,
                        size_t len,
                        double *out);

/**
 * Runs `command` (`check`, `run`, `equilibrium` or `welfare`) on the
 * scenario in `mode` (`pne`, `epe`, `bne`; null means `pne`). Writes the
 * JSON report to `out_json` and the verdict (1 pass, 0 fail) to
 * `out_pass` when it is not null.
 *
 * # Safety
 * `h` must be a live handle, strings NUL-terminated, `out_json` writable.
 */
enum IvaStatus iva_run(const struct IvaScenario *h,
                       const char *command,
                       const char *mode,
                       char **out_json,
                       int32_t *out_pass);

/**
 * Runs a named experiment. `params_json` is a JSON object of parameters,
 * or null for the defaults.
 *
 * # Safety
 * Strings must be NUL-terminated and `out_json` writable.
 */
enum IvaStatus iva_reproduce(const char *name,
                             const char *params_json,
                             char **out_json,
                             int32_t *out_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IVAUCTIONS_H */
