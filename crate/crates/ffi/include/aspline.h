/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ASPLINE_H
#define ASPLINE_H

#include <stddef.h>
#include <stdint.h>

#define ASPLINE_FAMILY_GAUSSIAN 0

#define ASPLINE_FAMILY_POISSON 1

#define ASPLINE_FAMILY_BINOMIAL 2

#define ASPLINE_CRITERION_AIC 0

#define ASPLINE_CRITERION_BIC 1

#define ASPLINE_CRITERION_EBIC0 2

#define ASPLINE_BOUNDARY_UNIFORM 0

#define ASPLINE_BOUNDARY_CLAMPED 1

typedef enum AsplineStatus {
  ASPLINE_STATUS_OK = 0,
  ASPLINE_STATUS_NULL_POINTER = 1,
  ASPLINE_STATUS_INVALID_ARGUMENT = 2,
  ASPLINE_STATUS_DATA_ERROR = 3,
  ASPLINE_STATUS_NUMERICAL_ERROR = 4,
  ASPLINE_STATUS_BUFFER_TOO_SMALL = 5,
  ASPLINE_STATUS_PANIC = 6,
} AsplineStatus;

/*
 Opaque fitted model.
 */
typedef struct AsplineFit AsplineFit;

/*
 Fit settings. Obtain defaults from `aspline_options_default`.
 */
typedef struct AsplineOptions {
  uintptr_t degree;
  uintptr_t num_knots;
  /*
   One of the `ASPLINE_FAMILY_*` constants.
   */
  uint32_t family;
  /*
   One of the `ASPLINE_CRITERION_*` constants.
   */
  uint32_t criterion;
  double lambda_min;
  double lambda_max;
  uintptr_t lambda_count;
} AsplineOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last error raised on this thread, or NULL.

 The pointer stays valid until the next failing call on the same thread.
 */
const char *aspline_last_error_message(void);

struct AsplineOptions aspline_options_default(void);

/*
 Fits an adaptive spline to `n` points.

 `options` may be NULL for the defaults. On success `*out` receives a new
 handle.

 # Safety
 `x` and `y` must point to `n` readable doubles and `out` to a writable
 handle pointer.
 */
enum AsplineStatus aspline_fit(const double *x,
                               const double *y,
                               uintptr_t n,
                               const struct AsplineOptions *options,
                               struct AsplineFit **out);

/*
 Releases a handle. NULL is ignored.

 # Safety
 `fit` must come from `aspline_fit` and not have been freed.
 */
void aspline_fit_free(struct AsplineFit *fit);

/*
 Copies the selected interior knots into `buf`; `*len` receives their count.

 # Safety
 `fit` must be a live handle, `buf` must hold `capacity` doubles and `len`
 may be NULL.
 */
enum AsplineStatus aspline_fit_knots(const struct AsplineFit *fit,
                                     double *buf,
                                     uintptr_t capacity,
                                     uintptr_t *len);

/*
 Copies the refitted B-spline coefficients (clamped basis on the selected
 knots) into `buf`.

 # Safety
 As for `aspline_fit_knots`.
 */
enum AsplineStatus aspline_fit_coefficients(const struct AsplineFit *fit,
                                            double *buf,
                                            uintptr_t capacity,
                                            uintptr_t *len);

/*
 Number of basis functions of the selected model; 0 for NULL.

 # Safety
 `fit` must be NULL or a live handle.
 */
uintptr_t aspline_fit_model_dim(const struct AsplineFit *fit);

/*
 Penalty of the selected model; NaN for NULL.

 # Safety
 `fit` must be NULL or a live handle.
 */
double aspline_fit_lambda(const struct AsplineFit *fit);

/*
 Writes the AIC, BIC and EBIC0 of the selected model. Any output pointer may
 be NULL.

 # Safety
 `fit` must be a live handle; non-NULL outputs must be writable.
 */
enum AsplineStatus aspline_fit_criteria(const struct AsplineFit *fit,
                                        double *aic,
                                        double *bic,
                                        double *ebic0);

/*
 Evaluates the fitted mean at `n` points of the fit's domain.

 # Safety
 `fit` must be a live handle, `x` must hold `n` doubles and `out` room for
 `n` doubles.
 */
enum AsplineStatus aspline_fit_predict(const struct AsplineFit *fit,
                                       const double *x,
                                       uintptr_t n,
                                       double *out);

/*
 Values at `x` of all `degree + num_knots + 1` B-splines on `num_knots`
 equally spaced interior knots of `[lo, hi]`.

 # Safety
 `out` must hold `capacity` doubles; `len` may be NULL.
 */
enum AsplineStatus aspline_basis_eval(double lo,
                                      double hi,
                                      uintptr_t num_knots,
                                      uintptr_t degree,
                                      uint32_t boundary,
                                      double x,
                                      double *out,
                                      uintptr_t capacity,
                                      uintptr_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASPLINE_H */
