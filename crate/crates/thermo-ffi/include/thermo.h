#ifndef THERMO_H
#define THERMO_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum ThermoStatus {
  THERMO_STATUS_OK = 0,
  THERMO_STATUS_INVALID_INPUT = 1,
  THERMO_STATUS_DIVERGENCE = 2,
  THERMO_STATUS_NOT_SUPPORTED = 3,
  THERMO_STATUS_NOT_DEFINED = 4,
  THERMO_STATUS_NUMERIC = 5,
  THERMO_STATUS_PARSE = 6,
  THERMO_STATUS_IO = 7,
  THERMO_STATUS_NULL_POINTER = 8,
  THERMO_STATUS_PANIC = 9,
} ThermoStatus;

/**
 * Prior attached to a model for evidence and thermodynamic calls.
 */
typedef enum ThermoPrior {
  THERMO_PRIOR_NATURAL = 0,
  THERMO_PRIOR_FLAT = 1,
  THERMO_PRIOR_GPI = 2,
} ThermoPrior;

/**
 * Opaque model handle.
 */
typedef struct ThermoModel ThermoModel;

/**
 * Disorder-averaged quantities at one sample size.
 */
typedef struct ThermoQuantities {
  double n;
  double fbar;
  double fse;
  double ubar;
  double use_;
  double cbar;
  double cse;
  double sbar;
  double sse;
} ThermoQuantities;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *thermo_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *thermo_version(void);

/**
 * Build a model from a registry string such as `exponential:lambda0=2`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a writable pointer.
 */
enum ThermoStatus thermo_model_new(const char *spec, struct ThermoModel **out);

/**
 * Release a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from `thermo_model_new` and not be freed twice.
 */
void thermo_model_free(struct ThermoModel *model);

/**
 * Canonical registry string of a model, copied into `buf` (NUL-terminated,
 * truncated to `len`). `*needed` receives the full length including the NUL.
 *
 * # Safety
 * `buf` must hold `len` bytes (or be NULL with `len == 0`).
 */
enum ThermoStatus thermo_model_spec(const struct ThermoModel *model,
                                    char *buf,
                                    uintptr_t len,
                                    uintptr_t *needed);

/**
 * Number of values per observation.
 *
 * # Safety
 * `out` must be writable.
 */
enum ThermoStatus thermo_model_obs_dim(const struct ThermoModel *model, uintptr_t *out);

/**
 * Log evidence of `len` values (row-major, `len` a multiple of the
 * observation dimension). For the GPI prior `N` is the sample count.
 *
 * # Safety
 * `data` must hold `len` doubles; `out` must be writable.
 */
enum ThermoStatus thermo_log_evidence(const struct ThermoModel *model,
                                      enum ThermoPrior prior,
                                      const double *data,
                                      uintptr_t len,
                                      double *out);

/**
 * Disorder-averaged F, U, C and S at sample size `n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum ThermoStatus thermo_disorder_average(const struct ThermoModel *model,
                                          enum ThermoPrior prior,
                                          double n,
                                          uintptr_t replicates,
                                          uint64_t seed,
                                          struct ThermoQuantities *out);

/**
 * Closed-form GPI normalization `log c` and effective complexity at `n`.
 * A divergent prior gives `log c = -inf`, `keff = +inf` and status Ok.
 *
 * # Safety
 * `log_c` and `keff` must be writable.
 */
enum ThermoStatus thermo_gpi_closed_form(const struct ThermoModel *model,
                                         double n,
                                         double *log_c,
                                         double *keff);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMO_H */
