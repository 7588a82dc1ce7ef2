#ifndef PPGOF_H
#define PPGOF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum PpgofStatus {
  PPGOF_STATUS_OK = 0,
  PPGOF_STATUS_NULL_POINTER = 1,
  PPGOF_STATUS_INVALID_INPUT = 2,
  PPGOF_STATUS_PARSE = 3,
  PPGOF_STATUS_INSUFFICIENT_DATA = 4,
  PPGOF_STATUS_NUMERICAL = 5,
  PPGOF_STATUS_IO = 6,
  /*
   Output buffer too small; the required length was still written.
   */
  PPGOF_STATUS_BUFFER_TOO_SMALL = 7,
  PPGOF_STATUS_PANIC = 8,
} PpgofStatus;

/*
 Reference distribution for [`ppgof_sample_test`].
 */
typedef enum PpgofNull {
  PPGOF_NULL_STD_NORMAL = 0,
  PPGOF_NULL_STD_EXPONENTIAL = 1,
  PPGOF_NULL_UNIFORM01 = 2,
} PpgofNull;

/*
 Maximum-likelihood estimate.
 */
typedef struct PpgofFit PpgofFit;

/*
 Model family and parameters.
 */
typedef struct PpgofModel PpgofModel;

/*
 Event times on `[0, horizon]`.
 */
typedef struct PpgofRealization PpgofRealization;

/*
 Outcome of a goodness-of-fit test.
 */
typedef struct PpgofTestResult {
  double statistic;
  double p_value;
  /*
   Size of the sample the test was run on.
   */
  size_t n_effective;
} PpgofTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or NULL if none.
 The pointer stays valid until the next failing call on this thread.
 */
const char *ppgof_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ppgof_version(void);

/*
 Creates a model of family `kind` (for example `"exp-hawkes"`) with the
 family's default parameter box.

 # Safety
 `kind` must be a NUL-terminated string, `params` must point to
 `n_params` doubles, and `out` must be writable.
 */
enum PpgofStatus ppgof_model_new(const char *kind,
                                 const double *params,
                                 size_t n_params,
                                 struct PpgofModel **out);

/*
 # Safety
 `model` must come from `ppgof_model_new` and not be used afterwards.
 */
void ppgof_model_free(struct PpgofModel *model);

/*
 Writes whether the model satisfies its family's stability condition.

 # Safety
 `model` must be a live handle and `out` writable.
 */
enum PpgofStatus ppgof_model_is_stable(const struct PpgofModel *model, bool *out);

/*
 Simulates the model on `[0, horizon]`; replication `replication` of
 experiment `seed` is reproducible.

 # Safety
 `model` must be a live handle and `out` writable.
 */
enum PpgofStatus ppgof_simulate(const struct PpgofModel *model,
                                double horizon,
                                uint64_t seed,
                                uint64_t replication,
                                struct PpgofRealization **out);

/*
 Wraps strictly increasing event times in `[0, horizon]`.

 # Safety
 `times` must point to `n` doubles and `out` must be writable.
 */
enum PpgofStatus ppgof_realization_new(const double *times,
                                       size_t n,
                                       double horizon,
                                       struct PpgofRealization **out);

/*
 Reads an event CSV. Pass a NaN `horizon` to use the file's header line.

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum PpgofStatus ppgof_realization_read_csv(const char *path,
                                            double horizon,
                                            struct PpgofRealization **out);

/*
 Number of events; 0 for a NULL handle.

 # Safety
 `r` must be NULL or a live handle.
 */
size_t ppgof_realization_len(const struct PpgofRealization *r);

/*
 Observation horizon; NaN for a NULL handle.

 # Safety
 `r` must be NULL or a live handle.
 */
double ppgof_realization_horizon(const struct PpgofRealization *r);

/*
 Copies the event times into `buf` (capacity `cap`); the count goes to
 `out_len` even when the buffer is too small.

 # Safety
 `r` must be a live handle, `buf` must hold `cap` doubles, `out_len`
 must be writable.
 */
enum PpgofStatus ppgof_realization_times(const struct PpgofRealization *r,
                                         double *buf,
                                         size_t cap,
                                         size_t *out_len);

/*
 # Safety
 `r` must come from this library and not be used afterwards.
 */
void ppgof_realization_free(struct PpgofRealization *r);

/*
 Maximum-likelihood fit of family `kind` over its default box, from
 `n_starts` Latin-hypercube starts drawn with `seed`.

 # Safety
 `kind` must be a NUL-terminated string, `r` a live handle, `out` writable.
 */
enum PpgofStatus ppgof_fit(const char *kind,
                           const struct PpgofRealization *r,
                           size_t n_starts,
                           uint64_t seed,
                           struct PpgofFit **out);

/*
 Copies the estimate into `buf`; see [`ppgof_realization_times`].

 # Safety
 As for `ppgof_realization_times`.
 */
enum PpgofStatus ppgof_fit_params(const struct PpgofFit *fit,
                                  double *buf,
                                  size_t cap,
                                  size_t *out_len);

/*
 Log-likelihood at the estimate; NaN for a NULL handle.

 # Safety
 `fit` must be NULL or a live handle.
 */
double ppgof_fit_loglik(const struct PpgofFit *fit);

/*
 Whether the optimizer met its tolerances; false for a NULL handle.

 # Safety
 `fit` must be NULL or a live handle.
 */
bool ppgof_fit_converged(const struct PpgofFit *fit);

/*
 # Safety
 `fit` must come from `ppgof_fit` and not be used afterwards.
 */
void ppgof_fit_free(struct PpgofFit *fit);

/*
 Goodness-of-fit test of `fit` on `r`.

 `procedure` is `"transform"`, `"naive"` or `"rtc"`; `test` is `"ks"`,
 `"cvm"` or `"ad"`. For the path procedures `n = 0` selects
 `ceil(sqrt(T)/4)` and a non-positive `tau` selects the default 0.9.

 # Safety
 Strings must be NUL-terminated, handles live, `out` writable.
 */
enum PpgofStatus ppgof_test(const struct PpgofRealization *r,
                            const struct PpgofFit *fit,
                            const char *procedure,
                            const char *test,
                            size_t n,
                            double tau,
                            struct PpgofTestResult *out);

/*
 One-sample KS, CvM or AD test of `sample` against a fixed distribution.

 # Safety
 `test` must be NUL-terminated, `sample` must hold `n` doubles, `out`
 must be writable. `null` is a [`PpgofNull`] value.
 */
enum PpgofStatus ppgof_sample_test(const double *sample,
                                   size_t n,
                                   const char *test,
                                   uint32_t null,
                                   struct PpgofTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PPGOF_H */
