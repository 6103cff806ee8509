#ifndef DKF_H
#define DKF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DkfStatus {
  DKF_STATUS_OK = 0,
  DKF_STATUS_NULL_POINTER = 1,
  DKF_STATUS_INVALID_ARGUMENT = 2,
  DKF_STATUS_DIMENSION_MISMATCH = 3,
  // A matrix that must be positive definite was not, or a solve failed.
  DKF_STATUS_NUMERICAL = 4,
  DKF_STATUS_IO = 5,
  DKF_STATUS_FORMAT = 6,
  DKF_STATUS_PANIC = 7,
} DkfStatus;

// Linear-Gaussian state dynamics `z_t = A z_{t-1} + N(0, Γ)`.
typedef struct DkfDynamics DkfDynamics;

// Running posterior of one filter over a stream of observations.
typedef struct DkfFilter DkfFilter;

// A fitted filter loaded from a model file.
typedef struct DkfModel DkfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buffer` (NUL
// terminated, truncated to `capacity`). Returns the full message length.
//
// # Safety
// `buffer` must be NULL or point to `capacity` writable bytes.
size_t dkf_last_error_message(char *buffer, size_t capacity);

// Builds dynamics from `d×d` matrices `a` and `gamma`. Fails unless `A` is
// stable and `Γ` is SPD.
//
// # Safety
// `a` and `gamma` must point to `d*d` doubles; `out` must be writable.
enum DkfStatus dkf_dynamics_new(const double *a,
                                const double *gamma,
                                size_t d,
                                struct DkfDynamics **out);

// # Safety
// `dynamics` must be NULL or a handle from `dkf_dynamics_new` not yet freed.
void dkf_dynamics_free(struct DkfDynamics *dynamics);

// # Safety
// `dynamics` must be a live handle.
size_t dkf_dynamics_dim(const struct DkfDynamics *dynamics);

// Writes the stationary covariance `S` (`d*d` doubles).
//
// # Safety
// `dynamics` must be a live handle; `out` must hold `d*d` doubles.
enum DkfStatus dkf_dynamics_stationary_covariance(const struct DkfDynamics *dynamics, double *out);

// One exact DKF step from the belief `(mean, cov)` given `f(x)` and `Q(x)`.
// With `strict` nonzero an invalid posterior is an error; otherwise the
// prior correction is dropped for that step. Outputs may alias inputs.
//
// # Safety
// Vector arguments point to `d` doubles and matrix arguments to `d*d`
// doubles, where `d` is the dynamics dimension.
enum DkfStatus dkf_step_discriminative(const struct DkfDynamics *dynamics,
                                       const double *mean,
                                       const double *cov,
                                       const double *f,
                                       const double *q,
                                       int32_t strict,
                                       double *mean_out,
                                       double *cov_out);

// Loads a model file written by `dkf fit`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DkfStatus dkf_model_load(const char *path, struct DkfModel **out);

// # Safety
// `model` must be NULL or a live handle.
void dkf_model_free(struct DkfModel *model);

// # Safety
// `model` must be a live handle.
size_t dkf_model_state_dim(const struct DkfModel *model);

// # Safety
// `model` must be a live handle.
size_t dkf_model_observation_dim(const struct DkfModel *model);

// Starts a filter at the model's stationary prior `N(0, S)`. The filter
// keeps its own copy of the model.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum DkfStatus dkf_filter_new(const struct DkfModel *model, struct DkfFilter **out);

// # Safety
// `filter` must be NULL or a live handle.
void dkf_filter_free(struct DkfFilter *filter);

// Consumes one observation (`m` doubles) and writes the posterior mean
// (`d`) and covariance (`d*d`). Either output may be NULL. On error the
// filter keeps its previous belief.
//
// # Safety
// `filter` must be a live handle and pointers must cover the stated sizes.
enum DkfStatus dkf_filter_step(struct DkfFilter *filter,
                               const double *x,
                               size_t m,
                               double *mean_out,
                               double *cov_out);

// Normalized MSE of `n` predictions against `n` truth rows of width `d`
// (both row-major `n×d`).
//
// # Safety
// `predicted` and `truth` must hold `n*d` doubles; `out` must be writable.
enum DkfStatus dkf_normalized_mse(const double *predicted,
                                  const double *truth,
                                  size_t n,
                                  size_t d,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DKF_H */
