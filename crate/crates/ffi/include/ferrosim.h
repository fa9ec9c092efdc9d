#ifndef FERROSIM_H
#define FERROSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define FS_PORT_WG 0

#define FS_PORT_RG 1

#define FS_STATE_LOW_VTH 0

#define FS_STATE_HIGH_VTH 1

/**
 * Device parameter set.
 */
typedef struct FsDevice FsDevice;

/**
 * Domain ensemble bound to the device it was created from.
 */
typedef struct FsEnsemble FsEnsemble;

/**
 * Call status. Values match the command-line exit codes where they overlap.
 */
typedef int32_t FsStatus;

/**
 * Switching-time law fitted by `fs_fit_nls`.
 */
typedef struct FsNlsFit {
  double tau0;
  double alpha;
  double v_offset;
  double rms_log_residual;
} FsNlsFit;

#define FS_OK 0

/**
 * Null pointer or out-of-range enum argument.
 */
#define FS_ERR_ARGUMENT 1

/**
 * Invalid configuration or parameter.
 */
#define FS_ERR_CONFIG 2

/**
 * Solver, extraction, fit or transient failure.
 */
#define FS_ERR_NUMERICAL 3

#define FS_ERR_IO 4

/**
 * A Rust panic was caught at the boundary.
 */
#define FS_ERR_PANIC 5

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *fs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fs_version(void);

/**
 * New device with the calibrated default parameters.
 */
struct FsDevice *fs_device_new_default(void);

/**
 * Loads a TOML parameter file into a new device stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
FsStatus fs_device_from_config(const char *path, struct FsDevice **out);

/**
 * # Safety
 * `dev` must come from this library and not be used afterwards. Null is ignored.
 */
void fs_device_free(struct FsDevice *dev);

/**
 * Sets one named parameter (SI units) and revalidates the device. On
 * failure the device is left unchanged.
 *
 * # Safety
 * `dev` must be a live handle and `key` a NUL-terminated string.
 */
FsStatus fs_device_set(struct FsDevice *dev, const char *key, double value);

/**
 * Reads one named parameter (SI units).
 *
 * # Safety
 * `dev` must be a live handle, `key` a NUL-terminated string, `out` valid.
 */
FsStatus fs_device_get(const struct FsDevice *dev, const char *key, double *out);

/**
 * Solves the stack at frozen polarization `p` (C/m^2) and gate biases (V).
 * Writes the ferroelectric field (V/m) and body potential (V); either
 * output may be null.
 *
 * # Safety
 * `dev` must be a live handle; outputs must be valid or null.
 */
FsStatus fs_solve(const struct FsDevice *dev,
                  double p,
                  double v_wg,
                  double v_rg,
                  double *e_fe,
                  double *psi_s);

/**
 * Drain current (A) at frozen polarization and terminal biases (V).
 *
 * # Safety
 * `dev` must be a live handle and `out` valid.
 */
FsStatus fs_drain_current(const struct FsDevice *dev,
                          double p,
                          double v_wg,
                          double v_rg,
                          double v_ds,
                          double *out);

/**
 * Threshold voltage (V) read from `port` at frozen polarization `p`.
 *
 * # Safety
 * `dev` must be a live handle and `out` valid.
 */
FsStatus fs_threshold_voltage(const struct FsDevice *dev, double p, int32_t port_id, double *out);

/**
 * Programs both states with the standard write pulse and reads the
 * thresholds (V) from `port`.
 *
 * # Safety
 * `dev` must be a live handle and both outputs valid.
 */
FsStatus fs_memory_window(const struct FsDevice *dev,
                          int32_t port_id,
                          uint64_t seed,
                          double *vth_low,
                          double *vth_high);

/**
 * Stress time (s) on `port` until `fraction` of the window is lost, capped at `cap`.
 *
 * # Safety
 * `dev` must be a live handle and `out` valid.
 */
FsStatus fs_retention_time(const struct FsDevice *dev,
                           int32_t port_id,
                           int32_t state_id,
                           double stress_v,
                           double fraction,
                           double cap,
                           uint64_t seed,
                           double *out);

/**
 * Oscillation frequency (Hz) of an `n_stages` ring whose FeFET stage was
 * erased and then programmed with `write_amp` (V).
 *
 * # Safety
 * `dev` must be a live handle and `out` valid.
 */
FsStatus fs_ring_frequency(const struct FsDevice *dev,
                           size_t n_stages,
                           double write_amp,
                           uint64_t seed,
                           double *out);

/**
 * Fits `pw = tau0 * exp((alpha / (v - v_offset))^2)` to `n` points.
 *
 * # Safety
 * `v_app` and `pw` must point to `n` values each; `out` must be valid.
 */
FsStatus fs_fit_nls(const double *v_app, const double *pw, size_t n, struct FsNlsFit *out);

/**
 * New ensemble with every domain up (`initial` = 1), down (-1) or a seeded
 * half/half mix (0).
 *
 * # Safety
 * `dev` must be a live handle and `out` valid.
 */
FsStatus fs_ensemble_new(const struct FsDevice *dev,
                         int32_t initial,
                         uint64_t seed,
                         struct FsEnsemble **out);

/**
 * # Safety
 * `ens` must come from this library and not be used afterwards. Null is ignored.
 */
void fs_ensemble_free(struct FsEnsemble *ens);

/**
 * Applies a trapezoidal pulse of `amp` (V) and flat-top `width` (s) on
 * `port` with the other gate grounded.
 *
 * # Safety
 * `ens` must be a live handle.
 */
FsStatus fs_ensemble_apply_pulse(struct FsEnsemble *ens, int32_t port_id, double amp, double width);

/**
 * Net polarization (C/m^2).
 *
 * # Safety
 * `ens` must be a live handle and `out` valid.
 */
FsStatus fs_ensemble_polarization(const struct FsEnsemble *ens, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FERROSIM_H */
