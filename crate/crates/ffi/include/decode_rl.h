#ifndef DECODE_RL_H
#define DECODE_RL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
enum DrlStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  DrlStatus_Ok = 0,
  DrlStatus_NullArgument = 1,
  DrlStatus_InvalidUtf8 = 2,
  DrlStatus_BadConfig = 3,
  DrlStatus_ContractViolation = 4,
  DrlStatus_IoFailure = 5,
  DrlStatus_Internal = 6,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum DrlStatus DrlStatus;
#else
typedef int32_t DrlStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque environment handle.
 */
typedef struct DrlEnv DrlEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *drl_last_error_message(void);

/**
 * Creates a lock environment with binary observations.
 *
 * # Safety
 * `out` must point to writable memory for one pointer.
 */
DrlStatus drl_env_new_bernoulli(uint32_t horizon, double alpha, uint64_t seed, DrlEnv **out);

/**
 * Creates a lock environment with Gaussian-noised observations.
 *
 * # Safety
 * `out` must point to writable memory for one pointer.
 */
DrlStatus drl_env_new_gaussian(uint32_t horizon,
                               double alpha,
                               double sigma,
                               uint64_t seed,
                               DrlEnv **out);

/**
 * Releases an environment handle. Null is ignored.
 *
 * # Safety
 * `env` must be a pointer returned by a `drl_env_new_*` call, not yet
 * freed.
 */
void drl_env_free(DrlEnv *env);

/**
 * # Safety
 * `env` must be a live handle or null (returns 0).
 */
uint32_t drl_env_horizon(const DrlEnv *env);

/**
 * # Safety
 * `env` must be a live handle or null (returns 0).
 */
uint32_t drl_env_obs_dim(const DrlEnv *env);

/**
 * Exact optimal value of the environment's latent dynamics; NaN on a
 * null handle.
 *
 * # Safety
 * `env` must be a live handle or null.
 */
double drl_env_optimal_value(const DrlEnv *env);

/**
 * Plays `episodes` episodes, each under a fresh uniformly random
 * policy seeded from `seed`, and writes the mean episodic reward to
 * `out_mean`.
 *
 * # Safety
 * `env` must be a live handle and `out_mean` writable.
 */
DrlStatus drl_env_random_policy_mean(const DrlEnv *env,
                                     uint64_t episodes,
                                     uint64_t seed,
                                     double *out_mean);

/**
 * Runs a full experiment described by a key=value config string and
 * writes the learning-curve CSV to `csv_path`.
 *
 * # Safety
 * Both pointers must be valid NUL-terminated strings.
 */
DrlStatus drl_run_experiment_to_file(const char *config_text, const char *csv_path);

/**
 * Runs a full experiment and returns the CSV as a newly allocated
 * string in `out_csv`; free it with [`drl_string_free`].
 *
 * # Safety
 * `config_text` must be a valid NUL-terminated string and `out_csv`
 * writable.
 */
DrlStatus drl_run_experiment(const char *config_text, char **out_csv);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void drl_string_free(char *s);

/**
 * Runs the built-in invariant suites. Returns the number of failed
 * suites (0 means everything passed), or `u32::MAX` on panic.
 */
uint32_t drl_selfcheck(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DECODE_RL_H */
