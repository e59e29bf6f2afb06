#ifndef UBSS_H
#define UBSS_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UbssStatus {
  UBSS_STATUS_OK = 0,
  UBSS_STATUS_NULL_POINTER = 1,
  UBSS_STATUS_INVALID_ARGUMENT = 2,
  UBSS_STATUS_DIMENSION_MISMATCH = 3,
  UBSS_STATUS_NO_ACTIVE_SAMPLES = 4,
  UBSS_STATUS_INSUFFICIENT_COLUMNS = 5,
  UBSS_STATUS_DEGENERATE_PAIR = 6,
  UBSS_STATUS_DEGENERATE_SIGNAL = 7,
  UBSS_STATUS_BUFFER_TOO_SMALL = 8,
  UBSS_STATUS_IO = 9,
  UBSS_STATUS_PARSE = 10,
  UBSS_STATUS_INTERNAL = 11,
} UbssStatus;

// Opaque estimated mixing matrix.
typedef struct UbssEstimate UbssEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Estimates the mixing matrix from two mixture channels of `len` samples.
//
// # Safety
// `x1` and `x2` must point to `len` readable doubles; `out` must be a
// valid pointer to receive the handle.
enum UbssStatus ubss_estimate_mixing(const double *x1,
                                     const double *x2,
                                     size_t len,
                                     double quantum,
                                     double activity_eps,
                                     double peak_fraction,
                                     struct UbssEstimate **out);

// Builds an estimate handle from known column ratios.
//
// # Safety
// `ratios` must point to `n` readable doubles; `out` must be valid.
enum UbssStatus ubss_estimate_from_ratios(const double *ratios,
                                          size_t n,
                                          struct UbssEstimate **out);

// Number of estimated sources, or 0 for a null handle.
//
// # Safety
// `handle` must be null or a live handle.
size_t ubss_estimate_count(const struct UbssEstimate *handle);

// Copies the estimated ratios (heaviest mode first) into `buf`.
//
// # Safety
// `handle` must be live; `buf` must hold `cap` doubles; `written` may be null.
enum UbssStatus ubss_estimate_ratios(const struct UbssEstimate *handle,
                                     double *buf,
                                     size_t cap,
                                     size_t *written);

// # Safety
// `handle` must be null or a handle not yet freed.
void ubss_estimate_free(struct UbssEstimate *handle);

// Separates `len` samples into `out`, row-major `len × count` where
// `count = ubss_estimate_count(handle)`.
//
// # Safety
// Input pointers must hold `len` doubles; `out` must hold `out_len` doubles.
enum UbssStatus ubss_separate(const struct UbssEstimate *handle,
                              const double *x1,
                              const double *x2,
                              size_t len,
                              double activity_eps,
                              double *out,
                              size_t out_len);

// Correlation coefficient of two equal-length sequences.
//
// # Safety
// `x` and `y` must hold `len` doubles; `out` must be valid.
enum UbssStatus ubss_correlation(const double *x, const double *y, size_t len, double *out);

// Runs a config file end to end. `out_dir` may be null to use the
// directory named in the config.
//
// # Safety
// Paths must be null-terminated strings (or null for `out_dir`).
enum UbssStatus ubss_run_experiment(const char *config_path, const char *out_dir);

// Copies the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `cap > 0`). Returns the full message length
// excluding the terminator, or 0 when there is none.
//
// # Safety
// `buf` must hold `cap` bytes or be null with `cap == 0`.
size_t ubss_last_error_message(char *buf, size_t cap);

// Static name of a status code.
const char *ubss_status_name(enum UbssStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UBSS_H */
