/* C interface to the linkabs BLER prediction pipeline. */

#ifndef LINKABS_H
#define LINKABS_H

/* Generated by cbindgen from the linkabs-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum LinkabsStatus {
  LINKABS_STATUS_OK = 0,
  LINKABS_STATUS_NULL_ARGUMENT = 1,
  LINKABS_STATUS_INVALID_ARGUMENT = 2,
  LINKABS_STATUS_IO = 3,
  LINKABS_STATUS_FORMAT = 4,
  LINKABS_STATUS_NUMERICAL = 5,
  LINKABS_STATUS_PANIC = 6,
} LinkabsStatus;

// Opaque AWGN BLER reference curve handle.
typedef struct LinkabsAwgnLut LinkabsAwgnLut;

// Opaque SNR-to-MIB table handle.
typedef struct LinkabsMibTable LinkabsMibTable;

// Combining-weight model parameters for one (serving MCS, interferer
// modulation) pair.
typedef struct LinkabsBetaModel {
  double y0;
  double y1;
  double beta_min;
  uint32_t mcs1;
  uint32_t mod2;
} LinkabsBetaModel;

// Output of one BLER prediction.
typedef struct LinkabsPrediction {
  double mean_isr;
  double mmib;
  double sinr_eff_db;
  double bler_est;
} LinkabsPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *linkabs_version(void);

// Copies the most recent error message of this thread into `buf`
// (truncated, always nul-terminated when `len > 0`) and returns the full
// message length in bytes, excluding the terminator.
size_t linkabs_last_error_message(char *buf, size_t len);

// Builds the SNR-to-MIB table for a modulation order (4, 16 or 64) on
// the default -20..+30 dB grid with `nodes`-point Gauss-Hermite
// quadrature per axis (16 is the standard choice).
enum LinkabsStatus linkabs_mib_table_build(uint32_t order,
                                           size_t nodes,
                                           struct LinkabsMibTable **out);

// Loads a MIB table from its CSV file.
enum LinkabsStatus linkabs_mib_table_load(const char *path, struct LinkabsMibTable **out);

// Releases a MIB table handle.
void linkabs_mib_table_free(struct LinkabsMibTable *table);

// Modulation order a MIB table was built for.
enum LinkabsStatus linkabs_mib_table_modulation(const struct LinkabsMibTable *table, uint32_t *out);

// MIB at a linear SNR.
enum LinkabsStatus linkabs_mib_lookup(const struct LinkabsMibTable *table,
                                      double gamma_linear,
                                      double *out);

// Linear SNR at a MIB value (the effective-SINR inverse).
enum LinkabsStatus linkabs_mib_inverse(const struct LinkabsMibTable *table,
                                       double mib,
                                       double *out);

// Loads an AWGN BLER reference curve from its CSV file.
enum LinkabsStatus linkabs_awgn_lut_load(const char *path, struct LinkabsAwgnLut **out);

// Releases an AWGN curve handle.
void linkabs_awgn_lut_free(struct LinkabsAwgnLut *lut);

// BLER at an SNR (dB) from the AWGN reference curve.
enum LinkabsStatus linkabs_bler_lookup(const struct LinkabsAwgnLut *lut,
                                       double sinr_db,
                                       double *out);

// SNR (dB) at which the AWGN curve crosses a BLER value.
enum LinkabsStatus linkabs_bler_inverse(const struct LinkabsAwgnLut *lut, double bler, double *out);

// Loads the model row for (mcs1, mod2) from a beta-model CSV file.
enum LinkabsStatus linkabs_beta_model_load(const char *path,
                                           uint32_t mcs1,
                                           uint32_t mod2,
                                           struct LinkabsBetaModel *out);

// ISR-dependent combining weight of a model.
enum LinkabsStatus linkabs_beta_of_isr(const struct LinkabsBetaModel *model,
                                       double isr,
                                       double *out);

// Predicts instantaneous BLER for one channel realization.
//
// `h1` holds `n_subcarriers` serving matrices of shape `n_rx x v1` and
// `h2` the interfering matrices of shape `n_rx x v2`, subcarrier-major,
// row-major within a matrix, each complex entry as (re, im) — so `h1`
// carries `n_subcarriers * n_rx * v1 * 2` doubles. The table must match
// the serving modulation of the LUT's MCS, and the model must be
// trained for (lut MCS, mod2).
enum LinkabsStatus linkabs_predict(const struct LinkabsMibTable *table,
                                   const struct LinkabsAwgnLut *lut,
                                   const struct LinkabsBetaModel *model,
                                   size_t n_rx,
                                   size_t v1,
                                   size_t v2,
                                   size_t n_subcarriers,
                                   const double *h1,
                                   const double *h2,
                                   double noise_var,
                                   struct LinkabsPrediction *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINKABS_H */
