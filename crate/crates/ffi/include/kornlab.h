#ifndef KORNLAB_H
#define KORNLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KlStatus {
  KL_STATUS_OK = 0,
  KL_STATUS_NULL_POINTER = 1,
  KL_STATUS_INVALID_UTF8 = 2,
  KL_STATUS_CONFIG = 3,
  KL_STATUS_INVALID_INPUT = 4,
  KL_STATUS_NUMERICAL = 5,
  KL_STATUS_IO = 6,
  KL_STATUS_OUT_OF_RANGE = 7,
  KL_STATUS_PANIC = 8,
} KlStatus;

typedef enum KlVerdict {
  KL_VERDICT_PASS = 0,
  KL_VERDICT_FAIL = 1,
  KL_VERDICT_INCONCLUSIVE = 2,
} KlVerdict;

/*
 Opaque experiment configuration.
 */
typedef struct KlConfig KlConfig;

/*
 Opaque result of a run.
 */
typedef struct KlSummary KlSummary;

/*
 A power-law fit `value ~ exp(intercept) h^slope`.
 */
typedef struct KlFit {
  double slope;
  double intercept;
  double r2;
  size_t n_points;
  enum KlVerdict verdict;
} KlFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Last error message on this thread, or null. Owned by the library.
 */
const char *kl_last_error(void);

/*
 Parses a JSON configuration.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum KlStatus kl_config_from_json(const char *json, struct KlConfig **out);

/*
 Built-in settings of an experiment kind, by name.

 # Safety
 `kind` must be a NUL-terminated string; `out` must be writable.
 */
enum KlStatus kl_config_preset(const char *kind, struct KlConfig **out);

/*
 # Safety
 `cfg` must come from this library and not be freed.
 */
enum KlStatus kl_config_set_seed(struct KlConfig *cfg, uint64_t seed);

/*
 Replaces the h-sweep by `count` values `h_max, h_max ratio, ...`.

 # Safety
 `cfg` must come from this library and not be freed.
 */
enum KlStatus kl_config_set_h_sweep(struct KlConfig *cfg, double h_max, double ratio, size_t count);

/*
 Serializes the configuration; free the string with [`kl_string_free`].

 # Safety
 `cfg` must come from this library; `out` must be writable.
 */
enum KlStatus kl_config_to_json(const struct KlConfig *cfg, char **out);

/*
 # Safety
 `cfg` must come from this library or be null; it is invalid afterwards.
 */
void kl_config_free(struct KlConfig *cfg);

/*
 Runs the configured experiment, writing artifacts to `out_dir`.
 `workers == 0` uses all cores. A finished run returns `KL_STATUS_OK`
 whatever its verdict; see [`kl_summary_exit_code`].

 # Safety
 `cfg` must come from this library, `out_dir` must be a NUL-terminated
 string and `out` writable.
 */
enum KlStatus kl_run(const struct KlConfig *cfg,
                     const char *out_dir,
                     size_t workers,
                     struct KlSummary **out);

/*
 0 all pass, 1 any fail, 2 inconclusive only; -1 for a null handle.

 # Safety
 `s` must come from this library or be null.
 */
int32_t kl_summary_exit_code(const struct KlSummary *s);

/*
 # Safety
 `s` must come from this library or be null.
 */
size_t kl_summary_fit_count(const struct KlSummary *s);

/*
 Copies fit `index` into `out`.

 # Safety
 `s` must come from this library; `out` must be writable.
 */
enum KlStatus kl_summary_fit(const struct KlSummary *s, size_t index, struct KlFit *out);

/*
 Summary as JSON; free the string with [`kl_string_free`].

 # Safety
 `s` must come from this library; `out` must be writable.
 */
enum KlStatus kl_summary_to_json(const struct KlSummary *s, char **out);

/*
 # Safety
 `s` must come from this library or be null; it is invalid afterwards.
 */
void kl_summary_free(struct KlSummary *s);

/*
 # Safety
 `s` must be a string returned by this library, or null.
 */
void kl_string_free(char *s);

/*
 Least-squares fit of `ln value = intercept + slope ln h` over `n` pairs.

 # Safety
 `h` and `value` must point to `n` doubles; `out` must be writable.
 */
enum KlStatus kl_fit_exponent(const double *h, const double *value, size_t n, struct KlFit *out);

/*
 Korn second-inequality constant of one built-in shell: surface `kind`
 with parameter `param` on `[0, theta_max] x [z_min, z_max]`, sinusoidal
 thickness of the given amplitude at scale `h`, on an
 `n_t x n_theta x n_z` grid.

 # Safety
 `kind` must be a NUL-terminated string; `out` must be writable.
 */
enum KlStatus kl_korn2_constant(const char *kind,
                                double param,
                                double theta_max,
                                double z_min,
                                double z_max,
                                double h,
                                double amplitude,
                                size_t n_t,
                                size_t n_theta,
                                size_t n_z,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KORNLAB_H */
