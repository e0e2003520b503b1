#ifndef DEGEN_H
#define DEGEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  DEGEN_STATUS_OK = 0,
  DEGEN_STATUS_NULL_POINTER = 1,
  DEGEN_STATUS_CONFIG = 2,
  DEGEN_STATUS_NUMERIC = 3,
  DEGEN_STATUS_FORMAT = 4,
  DEGEN_STATUS_IO = 5,
  /**
   * Caller-provided buffer has the wrong length.
   */
  DEGEN_STATUS_BUFFER_SIZE = 6,
  DEGEN_STATUS_PANIC = 7,
} DegenStatus;

typedef enum {
  DEGEN_ACTIVATION_RELU = 0,
  DEGEN_ACTIVATION_TANH = 1,
} DegenActivation;

/**
 * Opaque dataset handle.
 */
typedef struct DegenDataset DegenDataset;

/**
 * Opaque model handle.
 */
typedef struct DegenModel DegenModel;

/**
 * SGLD sampler settings; zero fields take the library defaults.
 */
typedef struct {
  double step_size;
  /**
   * Inverse temperature; 0 means `1 / ln n`.
   */
  double beta;
  double gamma;
  size_t num_chains;
  size_t draws_per_chain;
  size_t burn_in;
  size_t batch_size;
  uint64_t seed;
} DegenSgldParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *degen_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *degen_version(void);

/**
 * Loads an IDX image/label pair with pixels scaled to [0, 1].
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
DegenStatus degen_dataset_load_idx(const char *images_path,
                                   const char *labels_path,
                                   DegenDataset **out);

/**
 * Seeded synthetic classification data in `[0, 1]^input_dim`.
 *
 * # Safety
 * `out` must be writable.
 */
DegenStatus degen_dataset_synthetic(size_t n,
                                    size_t input_dim,
                                    size_t classes,
                                    uint64_t seed,
                                    DegenDataset **out);

/**
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t degen_dataset_len(const DegenDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t degen_dataset_input_dim(const DegenDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void degen_dataset_free(DegenDataset *dataset);

/**
 * Glorot-initialised MLP with `num_hidden` hidden layers.
 *
 * # Safety
 * `hidden` must point to `num_hidden` values (may be null when zero);
 * `out` must be writable.
 */
DegenStatus degen_model_new(size_t input_dim,
                            const size_t *hidden,
                            size_t num_hidden,
                            size_t classes,
                            DegenActivation activation,
                            uint64_t seed,
                            DegenModel **out);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
size_t degen_model_param_count(const DegenModel *model);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void degen_model_free(DegenModel *model);

/**
 * Copies the flat parameter vector into `out[0..len]`; `len` must equal
 * the parameter count.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
DegenStatus degen_model_get_params(const DegenModel *model, double *out, size_t len);

/**
 * # Safety
 * `params` must point to `len` readable doubles.
 */
DegenStatus degen_model_set_params(DegenModel *model, const double *params, size_t len);

/**
 * Mean negative log-likelihood over the whole dataset.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
DegenStatus degen_model_loss(const DegenModel *model, const DegenDataset *dataset, double *out);

/**
 * Loss gradient over the whole dataset.
 *
 * # Safety
 * Handles must be live; `out` must hold `len` doubles.
 */
DegenStatus degen_model_grad(const DegenModel *model,
                             const DegenDataset *dataset,
                             double *out,
                             size_t len);

/**
 * Loss Hessian times `v` over the whole dataset.
 *
 * # Safety
 * Handles must be live; `v` and `out` must hold `len` doubles each.
 */
DegenStatus degen_model_hvp(const DegenModel *model,
                            const DegenDataset *dataset,
                            const double *v,
                            double *out,
                            size_t len);

/**
 * One full-batch SGD step in place. Writes the step norm to
 * `update_norm` when non-null.
 *
 * # Safety
 * Handles must be live.
 */
DegenStatus degen_sgd_step(DegenModel *model,
                           const DegenDataset *dataset,
                           double learning_rate,
                           double *update_norm);

/**
 * One full-batch smoothed natural-gradient step in place (conjugate
 * gradient solve). Writes the smoothing used to `kappa` when non-null.
 *
 * # Safety
 * Handles must be live.
 */
DegenStatus degen_ngd_step(DegenModel *model,
                           const DegenDataset *dataset,
                           double learning_rate,
                           double alpha,
                           double epsilon_smooth,
                           double *kappa);

/**
 * Hutchinson estimate of the loss-Hessian trace over the dataset with
 * Gaussian probes.
 *
 * # Safety
 * Handles must be live; outputs writable.
 */
DegenStatus degen_hessian_trace(const DegenModel *model,
                                const DegenDataset *dataset,
                                size_t num_samples,
                                uint64_t seed,
                                double *mean,
                                double *std_error);

/**
 * Local learning-coefficient estimate at the model's current parameters.
 *
 * # Safety
 * Handles must be live; `params` may be null for all defaults; outputs
 * writable.
 */
DegenStatus degen_llc_estimate(const DegenModel *model,
                               const DegenDataset *dataset,
                               const DegenSgldParams *params,
                               double *lambda_hat,
                               double *std_error);

/**
 * `n L + (d / 2) ln n`.
 *
 * # Safety
 * `out` must be writable.
 */
DegenStatus degen_compute_bic(size_t n, double loss, size_t d, double *out);

/**
 * Runs the `[run]` table of a TOML configuration and writes the run
 * directory (metrics CSV, manifest, checkpoints) to `out_dir`.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
DegenStatus degen_train_from_config(const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEGEN_H */
