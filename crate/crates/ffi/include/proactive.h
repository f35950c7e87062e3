#ifndef PROACTIVE_H
#define PROACTIVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ProactiveStatus {
  PROACTIVE_STATUS_OK = 0,
  PROACTIVE_STATUS_NULL_POINTER = 1,
  PROACTIVE_STATUS_INVALID_ARGUMENT = 2,
  PROACTIVE_STATUS_INVALID_SCENARIO = 3,
  PROACTIVE_STATUS_CONFIG = 4,
  PROACTIVE_STATUS_NOT_CONVERGED = 5,
  PROACTIVE_STATUS_INTERNAL = 6,
} ProactiveStatus;

typedef enum ProactiveFormat {
  PROACTIVE_FORMAT_TOML = 0,
  PROACTIVE_FORMAT_JSON = 1,
} ProactiveFormat;

typedef enum ProactiveModel {
  /**
   * Time-invariant bound; `window` is ignored.
   */
  PROACTIVE_MODEL_TIME_INVARIANT = 0,
  /**
   * Window a whole number of periods; `window` is ignored.
   */
  PROACTIVE_MODEL_TIME_VARYING = 1,
  /**
   * Arbitrary window length.
   */
  PROACTIVE_MODEL_GENERAL = 2,
  /**
   * Picks the model matching `window` and the scenario period.
   */
  PROACTIVE_MODEL_AUTO = 3,
} ProactiveModel;

typedef struct ProactivePolicy ProactivePolicy;

typedef struct ProactiveScenario ProactiveScenario;

typedef struct ProactiveSolution ProactiveSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *proactive_last_error(void);

/**
 * Parses and validates a scenario document.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ProactiveStatus proactive_scenario_from_str(const char *text,
                                                 enum ProactiveFormat format,
                                                 struct ProactiveScenario **out);

/**
 * # Safety
 * `scenario` must come from [`proactive_scenario_from_str`] or be null.
 */
void proactive_scenario_free(struct ProactiveScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle or null.
 */
size_t proactive_scenario_users(const struct ProactiveScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle or null.
 */
size_t proactive_scenario_period(const struct ProactiveScenario *scenario);

/**
 * Expected per-slot cost of serving every request in its own slot.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ProactiveStatus proactive_reactive_cost(const struct ProactiveScenario *scenario, double *out);

/**
 * Solves a lower bound with default solver options. A solution that fails
 * to converge is still returned through `out`, with status
 * `PROACTIVE_STATUS_NOT_CONVERGED`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ProactiveStatus proactive_solve(const struct ProactiveScenario *scenario,
                                     enum ProactiveModel model,
                                     size_t window,
                                     struct ProactiveSolution **out);

/**
 * # Safety
 * `solution` must come from [`proactive_solve`] or be null.
 */
void proactive_solution_free(struct ProactiveSolution *solution);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ProactiveStatus proactive_solution_bound(const struct ProactiveSolution *solution,
                                              double *out);

/**
 * Number of table entries and, when `buf` is non-null, a copy of up to
 * `len` of them in storage order.
 *
 * # Safety
 * `buf` must be null or point to `len` writable doubles.
 */
enum ProactiveStatus proactive_solution_values(const struct ProactiveSolution *solution,
                                               double *buf,
                                               size_t len,
                                               size_t *out_count);

/**
 * Compiles the proactive policy for a window of `window` slots.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ProactiveStatus proactive_compile(const struct ProactiveScenario *scenario,
                                       const struct ProactiveSolution *solution,
                                       size_t window,
                                       struct ProactivePolicy **out);

/**
 * The reactive baseline as a policy handle.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ProactiveStatus proactive_reactive_policy(const struct ProactiveScenario *scenario,
                                               struct ProactivePolicy **out);

/**
 * # Safety
 * `policy` must come from this library or be null.
 */
void proactive_policy_free(struct ProactivePolicy *policy);

/**
 * Monte-Carlo estimate of the per-slot cost of `policy`, with the default
 * burn-in.
 *
 * # Safety
 * Pointers must be valid; `out_stderr` may be null.
 */
enum ProactiveStatus proactive_simulate(const struct ProactiveScenario *scenario,
                                        const struct ProactivePolicy *policy,
                                        size_t horizon,
                                        size_t replications,
                                        uint64_t seed,
                                        double *out_mean,
                                        double *out_stderr);

/**
 * Channel state index (1 = worst) of an RSRP reading under the default
 * thresholds.
 */
uint32_t proactive_quantize_rsrp(double rsrp_dbm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROACTIVE_H */
