#ifndef MEANSCORE_H
#define MEANSCORE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsEngine {
  /*
   Joint sandwich over both estimating equations.
   */
  MS_ENGINE_FULL = 0,
  /*
   Two ordinary regressions; identity link without auxiliaries only.
   */
  MS_ENGINE_TWO_REG = 1,
} MsEngine;

typedef enum MsFamily {
  /*
   Continuous outcome, identity link.
   */
  MS_FAMILY_IDENTITY = 0,
  /*
   Binary outcome, logit link.
   */
  MS_FAMILY_LOGIT = 1,
} MsFamily;

/*
 Result code of every call.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_DATA = 3,
  MS_STATUS_INVALID_DELTA = 4,
  MS_STATUS_FIT_FAILED = 5,
  MS_STATUS_VARIANCE = 6,
  MS_STATUS_UNSUPPORTED = 7,
  MS_STATUS_INSUFFICIENT_CLUSTERS = 8,
  MS_STATUS_PANIC = 9,
} MsStatus;

/*
 Opaque data set handle.
 */
typedef struct MsDataset MsDataset;

/*
 Opaque fit handle.
 */
typedef struct MsFit MsFit;

/*
 Confidence interval for one coefficient. `df` is infinite when the
 reference distribution is the standard normal.
 */
typedef struct MsInterval {
  double estimate;
  double se;
  double ci_low;
  double ci_high;
  double df;
  double correction_factor;
} MsInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the message of the last failed call on this thread into `buf`
 (NUL-terminated, truncated to `len`). Returns the full message length
 in bytes, or 0 when there is no error.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t ms_last_error(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *ms_version(void);

/*
 Creates a data set.

 `y` holds `n` outcomes; `observed[i]` is nonzero when `y[i]` is observed
 (the value is ignored otherwise). `xs` is the row-major `n × p_s`
 substantive design including the intercept, with the 0/1 arm indicator in
 column `arm_column`. `xa` is the row-major `n × p_a` auxiliary block and
 may be null when `p_a == 0`.

 # Safety
 Pointers must reference arrays of the stated sizes; `out` must be valid.
 */
enum MsStatus ms_dataset_new(size_t n,
                             const double *y,
                             const uint8_t *observed,
                             const double *xs,
                             size_t p_s,
                             size_t arm_column,
                             const double *xa,
                             size_t p_a,
                             struct MsDataset **out);

/*
 Assigns cluster identifiers (arbitrary labels, one per row).

 # Safety
 `ds` must be a live handle and `ids` must point to `n` values.
 */
enum MsStatus ms_dataset_set_clusters(struct MsDataset *ds, const uint64_t *ids, size_t n);

/*
 Number of rows and observed outcomes.

 # Safety
 `ds` must be a live handle; output pointers must be valid or null.
 */
enum MsStatus ms_dataset_counts(const struct MsDataset *ds, size_t *n, size_t *n_obs);

/*
 Releases a data set; null is ignored.

 # Safety
 `ds` must be null or a handle not yet freed.
 */
void ms_dataset_free(struct MsDataset *ds);

/*
 Fits with arm-specific departures; pass `-INFINITY` for "missing = failure"
 with the logit family.

 # Safety
 `ds` must be a live handle and `out` valid.
 */
enum MsStatus ms_fit_arm(const struct MsDataset *ds,
                         enum MsFamily family,
                         enum MsEngine engine,
                         double delta_control,
                         double delta_treated,
                         struct MsFit **out);

/*
 Fits with one departure per row (entries of observed rows are ignored).

 # Safety
 `ds` must be a live handle, `deltas` must point to `n` values and `out` be valid.
 */
enum MsStatus ms_fit_individual(const struct MsDataset *ds,
                                enum MsFamily family,
                                enum MsEngine engine,
                                const double *deltas,
                                size_t n,
                                struct MsFit **out);

/*
 Corrected interval for coefficient `coef` of the substantive model.

 # Safety
 `fit` must be a live handle and `out` valid.
 */
enum MsStatus ms_fit_interval(const struct MsFit *fit,
                              size_t coef,
                              double level,
                              struct MsInterval *out);

/*
 Substantive coefficients. Writes up to `len` values and stores the
 number of coefficients in `p` (either output may be null).

 # Safety
 `fit` must be a live handle; `beta` must be null or hold `len` values.
 */
enum MsStatus ms_fit_coefficients(const struct MsFit *fit, double *beta, size_t len, size_t *p);

/*
 Effective sample size, and the effective number of clusters (NaN when
 the data set is not clustered).

 # Safety
 `fit` must be a live handle; output pointers must be valid or null.
 */
enum MsStatus ms_fit_effective_size(const struct MsFit *fit, double *n_eff, double *m_eff);

/*
 Releases a fit; null is ignored.

 # Safety
 `fit` must be null or a handle not yet freed.
 */
void ms_fit_free(struct MsFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEANSCORE_H */
