#ifndef ENNS_H
#define ENNS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EnnsActivation {
  ENNS_ACTIVATION_RELU = 0,
  ENNS_ACTIVATION_SIGMOID = 1,
} EnnsActivation;

typedef enum EnnsEstimator {
  ENNS_ESTIMATOR_PLAIN = 0,
  // Soft-thresholding at the given percentile of each weight matrix.
  ENNS_ESTIMATOR_L1_PERCENTILE = 1,
  // Soft-thresholding at `lambda * learning_rate`.
  ENNS_ESTIMATOR_L1_LAMBDA = 2,
} EnnsEstimator;

// Result code of every fallible call.
typedef enum EnnsStatus {
  ENNS_STATUS_OK = 0,
  // Invalid argument, shape mismatch or null pointer.
  ENNS_STATUS_INVALID_ARGUMENT = 1,
  // Malformed data or unreadable file.
  ENNS_STATUS_DATA_ERROR = 2,
  // Divergence, non-finite values or quadrature failure.
  ENNS_STATUS_NUMERICAL_ERROR = 3,
  // Output buffer too small; the required length is still written.
  ENNS_STATUS_BUFFER_TOO_SMALL = 4,
  // Internal panic caught at the boundary.
  ENNS_STATUS_PANIC = 5,
} EnnsStatus;

typedef enum EnnsTask {
  ENNS_TASK_REGRESSION = 0,
  ENNS_TASK_CLASSIFICATION = 1,
} EnnsTask;

// Opaque dataset handle.
typedef struct EnnsDataset EnnsDataset;

// Opaque fitted-model handle.
typedef struct EnnsModel EnnsModel;

// Network and selection settings shared by `enns_select` and `enns_dnp_select`.
typedef struct EnnsSelectOptions {
  // Number of features to select.
  size_t target;
  size_t num_bags;
  double appearance_proportion;
  // Features requested per round; 0 requests all that are missing.
  size_t per_round;
  // Observations per bag; 0 uses `n`.
  size_t bootstrap_size;
  // Non-zero draws bags without replacement.
  int32_t subsample;
  size_t num_dropouts;
  double dropout_rate;
  double norm_q;
  double learning_rate;
  size_t epochs;
  // Hidden layer widths (`hidden_len` entries).
  const size_t *hidden;
  size_t hidden_len;
  enum EnnsActivation activation;
  uint64_t seed;
} EnnsSelectOptions;

typedef struct EnnsFitOptions {
  enum EnnsEstimator estimator;
  // Percentile or lambda, applied to every weight matrix.
  double sparsity;
  double learning_rate;
  size_t epochs;
  size_t patience;
  double validation_fraction;
  const size_t *hidden;
  size_t hidden_len;
  enum EnnsActivation activation;
  uint64_t seed;
} EnnsFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static version string.
const char *enns_version(void);

// Message of the last failed call on this thread ("" after a success).
// The pointer is valid until the next call on the same thread.
const char *enns_last_error_message(void);

// Copies an `n × p` row-major design and a length-`n` response into a new dataset.
//
// # Safety
// `x` must hold `n·p` values, `y` `n` values, `out` must be writable.
enum EnnsStatus enns_dataset_new(const double *x,
                                 const double *y,
                                 size_t n,
                                 size_t p,
                                 enum EnnsTask task,
                                 struct EnnsDataset **out);

// # Safety
// `ds` must be null or a handle from `enns_dataset_new` not yet freed.
void enns_dataset_free(struct EnnsDataset *ds);

// # Safety
// `ds` must be a live dataset handle.
size_t enns_dataset_n(const struct EnnsDataset *ds);

// # Safety
// `ds` must be a live dataset handle.
size_t enns_dataset_p(const struct EnnsDataset *ds);

// Defaults: 10 bags, proportion 0.3, 5 dropout draws at rate 0.5, `q = 2`,
// learning rate 0.05, 50 epochs, one hidden layer of 16 ReLU units.
struct EnnsSelectOptions enns_select_options_default(void);

// Plain estimator, learning rate 0.05, 200 epochs, one hidden layer of 16 ReLU units.
struct EnnsFitOptions enns_fit_options_default(void);

// Ensemble selection. Writes up to `capacity` 0-based indices in selection
// order to `out` and their count to `out_len`.
//
// # Safety
// `ds` must be live, `opts` readable, `out` writable for `capacity` values.
enum EnnsStatus enns_select(const struct EnnsDataset *ds,
                            const struct EnnsSelectOptions *opts,
                            size_t *out,
                            size_t capacity,
                            size_t *out_len);

// Single stage-wise run of `target` steps (bag-related options are ignored).
//
// # Safety
// As for [`enns_select`].
enum EnnsStatus enns_dnp_select(const struct EnnsDataset *ds,
                                const struct EnnsSelectOptions *opts,
                                size_t *out,
                                size_t capacity,
                                size_t *out_len);

// Fits a network on the 0-based columns `selected` of `ds`.
//
// # Safety
// `ds` must be live, `selected` readable for `len` values, `opts` readable, `out` writable.
enum EnnsStatus enns_fit(const struct EnnsDataset *ds,
                         const size_t *selected,
                         size_t len,
                         const struct EnnsFitOptions *opts,
                         struct EnnsModel **out);

// Predicts from a full `n × p` row-major design (the model reads its own
// selected columns). Classification models return probabilities.
//
// # Safety
// `model` must be live, `x` readable for `n·p` values, `out` writable for `n` values.
enum EnnsStatus enns_model_predict(const struct EnnsModel *model,
                                   const double *x,
                                   size_t n,
                                   size_t p,
                                   double *out);

// Number of input columns the model reads.
//
// # Safety
// `model` must be null or live.
size_t enns_model_input_dim(const struct EnnsModel *model);

// # Safety
// `model` must be live and `path` a NUL-terminated UTF-8 string.
enum EnnsStatus enns_model_save(const struct EnnsModel *model, const char *path);

// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` writable.
enum EnnsStatus enns_model_load(const char *path, struct EnnsModel **out);

// # Safety
// `model` must be null or a handle not yet freed.
void enns_model_free(struct EnnsModel *model);

// CDF of `|N(mu, sigma²)|` at `x ≥ 0`.
//
// # Safety
// `out` must be writable.
enum EnnsStatus enns_folded_normal_cdf(double x, double mu, double sigma, double *out);

// `P(X₁ > a, X₂ > b)` for a standard bivariate normal with correlation `rho`.
//
// # Safety
// `out` must be writable.
enum EnnsStatus enns_orthant_prob(double a, double b, double rho, double *out);

// Probability that column `j` has the smaller null-model criterion than column `k`.
//
// # Safety
// `out` must be writable.
enum EnnsStatus enns_prob_select_over(double beta_j, double beta_k, double sigma, double *out);

// Probability that the first admitted column lies in the support
// (the first `s` of the `p` coefficients in `betas`).
//
// # Safety
// `betas` must be readable for `p` values and `out` writable.
enum EnnsStatus enns_prob_first_correct(const double *betas,
                                        size_t p,
                                        size_t s,
                                        double sigma,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENNS_H */
