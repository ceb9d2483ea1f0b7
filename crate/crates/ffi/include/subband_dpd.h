#ifndef SUBBAND_DPD_H
#define SUBBAND_DPD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a call.
typedef enum SbdpdStatus {
  SBDPD_STATUS_OK = 0,
  SBDPD_STATUS_NULL_POINTER = 1,
  SBDPD_STATUS_INVALID_ARGUMENT = 2,
  SBDPD_STATUS_CONFIG = 3,
  SBDPD_STATUS_ORDER = 4,
  SBDPD_STATUS_BAND = 5,
  SBDPD_STATUS_SHAPE = 6,
  SBDPD_STATUS_NUMERIC = 7,
  SBDPD_STATUS_DIVERGENCE = 8,
  SBDPD_STATUS_UNSUPPORTED_ORDER = 9,
  SBDPD_STATUS_IO = 10,
  SBDPD_STATUS_BUFFER_TOO_SMALL = 11,
  SBDPD_STATUS_PANIC = 12,
} SbdpdStatus;

// Basis columns of one sub-band.
typedef struct SbdpdBasis SbdpdBasis;

// Behavioral PA model.
typedef struct SbdpdPa SbdpdPa;

// Outcome of a scenario run.
typedef struct SbdpdReport SbdpdReport;

// A loaded scenario that can be configured and run.
typedef struct SbdpdScenario SbdpdScenario;

// Lower-triangular orthonormalizing transform.
typedef struct SbdpdTransform SbdpdTransform;

// One complex sample.
typedef struct SbdpdComplex {
  double re;
  double im;
} SbdpdComplex;

// Running complexity figures.
typedef struct SbdpdComplexity {
  uint64_t basis_flops;
  uint64_t filtering_flops;
  uint64_t total_flops;
  double rate_hz;
  double gflops;
} SbdpdComplexity;

// IMR and spur power of one learned sub-band.
typedef struct SbdpdSubBandResult {
  // IM order, 3 to 9.
  uint32_t order;
  // +1 or -1.
  int32_t sign;
  double imr_before_dbc;
  double imr_after_dbc;
  double spur_before_dbm;
  double spur_after_dbm;
} SbdpdSubBandResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next failing call on the same thread.
const char *sbdpd_last_error(void);

// Library version as a static NUL-terminated string.
const char *sbdpd_version(void);

// Loads a PA fixture file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SbdpdStatus sbdpd_pa_load(const char *path, struct SbdpdPa **out);

// Returns a shipped fixture: `memoryless3`, `memoryless5` or `ph9`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum SbdpdStatus sbdpd_pa_builtin(const char *name, struct SbdpdPa **out);

// Highest nonlinearity order of the model, 0 for a null handle.
//
// # Safety
// `pa` must be null or a live handle.
uint32_t sbdpd_pa_order(const struct SbdpdPa *pa);

// Drives the PA with `n` input samples and writes `n` outputs. The model
// starts from zero history on every call.
//
// # Safety
// `input` and `output` must each hold `n` elements.
enum SbdpdStatus sbdpd_pa_apply(const struct SbdpdPa *pa,
                                const struct SbdpdComplex *input,
                                size_t n,
                                struct SbdpdComplex *output);

// # Safety
// `pa` must be null or a handle not yet freed.
void sbdpd_pa_free(struct SbdpdPa *pa);

// Generates the basis of sub-band `order`/`sign` up to DPD order `q` from
// the two carrier baseband sequences of length `n`.
//
// # Safety
// `x1` and `x2` must each hold `n` elements; `out` must be valid.
enum SbdpdStatus sbdpd_basis_new(const struct SbdpdComplex *x1,
                                 const struct SbdpdComplex *x2,
                                 size_t n,
                                 uint32_t order,
                                 int32_t sign,
                                 uint32_t q,
                                 double rate_hz,
                                 struct SbdpdBasis **out);

// Number of basis columns, 0 for a null handle.
//
// # Safety
// `basis` must be null or a live handle.
size_t sbdpd_basis_columns(const struct SbdpdBasis *basis);

// Samples per column, 0 for a null handle.
//
// # Safety
// `basis` must be null or a live handle.
size_t sbdpd_basis_len(const struct SbdpdBasis *basis);

// Copies column `col` into `out`, which must hold `n` = column length elements.
//
// # Safety
// `out` must hold `n` elements.
enum SbdpdStatus sbdpd_basis_column(const struct SbdpdBasis *basis,
                                    size_t col,
                                    struct SbdpdComplex *out,
                                    size_t n);

// # Safety
// `basis` must be null or a handle not yet freed.
void sbdpd_basis_free(struct SbdpdBasis *basis);

// Computes the orthonormalizing transform of `basis`.
//
// # Safety
// `basis` must be a live handle and `out` valid.
enum SbdpdStatus sbdpd_transform_new(const struct SbdpdBasis *basis, struct SbdpdTransform **out);

// Transform dimension, 0 for a null handle.
//
// # Safety
// `w` must be null or a live handle.
size_t sbdpd_transform_dim(const struct SbdpdTransform *w);

// Copies the row-major dim x dim matrix into `out`.
//
// # Safety
// `out` must hold `n` elements.
enum SbdpdStatus sbdpd_transform_entries(const struct SbdpdTransform *w,
                                         struct SbdpdComplex *out,
                                         size_t n);

// # Safety
// `w` must be null or a handle not yet freed.
void sbdpd_transform_free(struct SbdpdTransform *w);

// One NLMS update over a block of `m` regressor rows of width `k`
// (row-major in `rows`) and their errors. `alpha` is updated in place.
// With `m == 1` this is the per-sample update.
//
// # Safety
// `alpha` must hold `k`, `rows` `m * k` and `error` `m` elements.
enum SbdpdStatus sbdpd_nlms_update(struct SbdpdComplex *alpha,
                                   size_t k,
                                   const struct SbdpdComplex *rows,
                                   const struct SbdpdComplex *error,
                                   size_t m,
                                   double mu,
                                   double regularizer);

// Complexity of ninth-order processing with memory depth `memory` at
// `rate_hz`. `sub_band_order` is 3, 5, 7 or 9, or 0 for full-band DPD.
//
// # Safety
// `out` must be valid.
enum SbdpdStatus sbdpd_flops(uint32_t sub_band_order,
                             uint32_t q,
                             uint64_t memory,
                             double rate_hz,
                             struct SbdpdComplexity *out);

// Loads a scenario file, or a shipped one named `preset:<name>`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid.
enum SbdpdStatus sbdpd_scenario_load(const char *path, struct SbdpdScenario **out);

// # Safety
// `sc` must be a live handle.
enum SbdpdStatus sbdpd_scenario_set_seed(struct SbdpdScenario *sc, uint64_t seed);

// Runs the scenario: learns every target and evaluates the result.
//
// # Safety
// `sc` must be a live handle and `out` valid.
enum SbdpdStatus sbdpd_scenario_run(const struct SbdpdScenario *sc, struct SbdpdReport **out);

// # Safety
// `sc` must be null or a handle not yet freed.
void sbdpd_scenario_free(struct SbdpdScenario *sc);

// Number of learned sub-bands, 0 for a null handle.
//
// # Safety
// `r` must be null or a live handle.
size_t sbdpd_report_sub_bands(const struct SbdpdReport *r);

// Results for learned sub-band `index`, in learning order.
//
// # Safety
// `r` must be a live handle and `out` valid.
enum SbdpdStatus sbdpd_report_sub_band(const struct SbdpdReport *r,
                                       size_t index,
                                       struct SbdpdSubBandResult *out);

// Per-carrier EVM in percent, without and with DPD. Each array holds two values.
//
// # Safety
// `before` and `after` must each hold two doubles.
enum SbdpdStatus sbdpd_report_evm(const struct SbdpdReport *r, double *before, double *after);

// Writes the summary as TOML into `buf`. See [`SbdpdStatus::BufferTooSmall`];
// `needed` (may be null) receives the size including the NUL.
//
// # Safety
// `buf` must hold `len` bytes.
enum SbdpdStatus sbdpd_report_summary_toml(const struct SbdpdReport *r,
                                           char *buf,
                                           size_t len,
                                           size_t *needed);

// Writes summary, spectra and learning histories into directory `dir`.
//
// # Safety
// `dir` must be a NUL-terminated string.
enum SbdpdStatus sbdpd_report_write(const struct SbdpdReport *r, const char *dir);

// # Safety
// `r` must be null or a handle not yet freed.
void sbdpd_report_free(struct SbdpdReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBBAND_DPD_H */
