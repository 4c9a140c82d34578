/* C ABI for the irmkit training and audit pipeline. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum IrmStatus {
  IRM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  IRM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  IRM_STATUS_INVALID_UTF8 = 2,
  IRM_STATUS_IO = 3,
  IRM_STATUS_PARSE = 4,
  IRM_STATUS_INVALID_ARGUMENT = 5,
  IRM_STATUS_SHAPE = 6,
  IRM_STATUS_CAPACITY = 7,
  IRM_STATUS_DIVERGENCE = 8,
  IRM_STATUS_UNDEFINED_METRIC = 9,
  IRM_STATUS_CONFIG = 10,
  IRM_STATUS_INTERNAL = 11,
} IrmStatus;

/**
 * Opaque set of environments.
 */
typedef struct IrmEnvs IrmEnvs;

/**
 * Opaque trained model.
 */
typedef struct IrmModel IrmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *irm_version(void);

/**
 * Message for the most recent failure on this thread, or null if none.
 * Valid until the next failing call on the same thread.
 */
const char *irm_last_error(void);

/**
 * Free a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer previously returned by a function of this
 * library that documents `irm_string_free` ownership, not yet freed.
 */
void irm_string_free(char *s);

/**
 * Build the synthetic benchmark. `config_json` holds
 * `{"n_per_env":…,"d_noise":…,"q":…}` with an optional `"specs"` list; the
 * default schedule is p = 0.2, 0.1 (train) and 0.9 (test).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrmStatus irm_envs_synth(const char *config_json, uint64_t seed, struct IrmEnvs **out);

/**
 * Load an environment directory written by `irm_envs_save` or the CLI.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrmStatus irm_envs_load(const char *dir, struct IrmEnvs **out);

/**
 * Write the environment set (manifest plus IRMB sidecars) to a directory.
 *
 * # Safety
 * `envs` must be a live handle from this library; `dir` a NUL-terminated
 * string.
 */
enum IrmStatus irm_envs_save(const struct IrmEnvs *envs, const char *dir);

/**
 * Number of environments in the set; 0 for null.
 *
 * # Safety
 * `envs` must be null or a live handle from this library.
 */
uintptr_t irm_envs_count(const struct IrmEnvs *envs);

/**
 * Feature dimension of the set; -1 for null or empty.
 *
 * # Safety
 * `envs` must be null or a live handle from this library.
 */
int64_t irm_envs_dim(const struct IrmEnvs *envs);

/**
 * # Safety
 * `envs` must be null or a handle from this library, not yet freed.
 */
void irm_envs_free(struct IrmEnvs *envs);

/**
 * Train on the train-role environments of the set. `hp_json` holds the
 * hyperparameters, e.g. `{"learning_rate":0.01,"iterations":2000,"l2":0.0,
 * "penalty_lambda":10000.0,"anneal_iters":100,"mode":"irm"}`.
 *
 * # Safety
 * `envs` must be a live handle, `hp_json` a NUL-terminated string, `out` a
 * valid pointer.
 */
enum IrmStatus irm_train(const struct IrmEnvs *envs,
                         const char *hp_json,
                         uint64_t seed,
                         struct IrmModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum IrmStatus irm_model_save(const struct IrmModel *model, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IrmStatus irm_model_load(const char *path, struct IrmModel **out);

/**
 * Weight dimension of the model; -1 for null.
 *
 * # Safety
 * `model` must be null or a live handle from this library.
 */
int64_t irm_model_dim(const struct IrmModel *model);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void irm_model_free(struct IrmModel *model);

/**
 * Classify `rows` samples of `cols` features (row-major) into
 * `out_labels[0..rows]` as 0/1.
 *
 * # Safety
 * `features` must point to `rows*cols` readable floats and `out_labels` to
 * `rows` writable bytes.
 */
enum IrmStatus irm_model_predict(const struct IrmModel *model,
                                 const float *features,
                                 uintptr_t rows,
                                 uintptr_t cols,
                                 uint8_t *out_labels);

/**
 * Evaluate the model on environment `env_index` of the set and return the
 * report (accuracy, Δ_DP, Δ_EO, cell counts) as a JSON string owned by the
 * caller; free it with `irm_string_free`.
 *
 * # Safety
 * `model` and `envs` must be live handles and `out_json` a valid pointer.
 */
enum IrmStatus irm_evaluate(const struct IrmModel *model,
                            const struct IrmEnvs *envs,
                            uintptr_t env_index,
                            char **out_json);

/**
 * Fraction of agreements between `yhat` and `y`.
 *
 * # Safety
 * Both arrays must hold `n` readable bytes; `out` must be writable.
 */
enum IrmStatus irm_metric_accuracy(const uint8_t *yhat, const uint8_t *y, uintptr_t n, double *out);

/**
 * Demographic parity distance |P(ŷ=1|a=0) − P(ŷ=1|a=1)|.
 *
 * # Safety
 * Both arrays must hold `n` readable bytes; `out` must be writable.
 */
enum IrmStatus irm_metric_delta_dp(const uint8_t *yhat, const uint8_t *a, uintptr_t n, double *out);

/**
 * Equalized odds distance: half FPR gap plus half FNR gap.
 *
 * # Safety
 * All three arrays must hold `n` readable bytes; `out` must be writable.
 */
enum IrmStatus irm_metric_delta_eo(const uint8_t *yhat,
                                   const uint8_t *y,
                                   const uint8_t *a,
                                   uintptr_t n,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
