/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef ASLSL_H
#define ASLSL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AslslStatus {
  ASLSL_STATUS_OK = 0,
  ASLSL_STATUS_NULL_POINTER = 1,
  ASLSL_STATUS_INVALID_UTF8 = 2,
  ASLSL_STATUS_IO = 3,
  ASLSL_STATUS_MANIFEST = 4,
  ASLSL_STATUS_CELL = 5,
  ASLSL_STATUS_DIMENSION = 6,
  ASLSL_STATUS_NON_BINARY_LABEL = 7,
  ASLSL_STATUS_INSTANCE_ABSENT = 8,
  ASLSL_STATUS_INVALID_PARAMETER = 9,
  ASLSL_STATUS_NON_FINITE_OBJECTIVE = 10,
  ASLSL_STATUS_INFEASIBLE = 11,
  ASLSL_STATUS_JSON = 12,
  ASLSL_STATUS_CSV = 13,
  ASLSL_STATUS_BUFFER_TOO_SMALL = 14,
  ASLSL_STATUS_PANIC = 15,
} AslslStatus;

/**
 * Opaque dataset handle.
 */
typedef struct AslslDataset AslslDataset;

/**
 * Opaque fitted-model handle.
 */
typedef struct AslslModel AslslModel;

typedef struct AslslHyperparams {
  double lambda;
  double eta;
  double delta;
  double gamma;
  size_t max_iters;
  double rel_tol;
  double epsilon_div;
  double epsilon_norm;
} AslslHyperparams;

typedef struct AslslMetrics {
  double hamming_loss;
  double ranking_loss;
  double coverage;
  double average_precision;
  double macro_f1;
  double micro_f1;
} AslslMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated, into
 * `buf` when `len` is large enough. Returns the length the message needs
 * including the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t aslsl_last_error_message(char *buf, size_t len);

/**
 * Fills `out` with the default hyperparameters.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum AslslStatus aslsl_hyperparams_default(struct AslslHyperparams *out);

/**
 * Loads a dataset from a manifest file.
 *
 * # Safety
 * `manifest_path` must be a NUL-terminated string; `out` valid for writes.
 */
enum AslslStatus aslsl_dataset_load(const char *manifest_path,
                                    bool shift_nonneg,
                                    bool standardize,
                                    struct AslslDataset **out);

/**
 * Generates a synthetic dataset of `views` views with `dim` features each,
 * `informative` of them driven by the latent structure.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum AslslStatus aslsl_dataset_generate(size_t n,
                                        size_t views,
                                        size_t dim,
                                        size_t n_labels,
                                        size_t informative,
                                        double noise_level,
                                        uint64_t seed,
                                        struct AslslDataset **out);

/**
 * New dataset with `⌊ratio · n⌋` instances removed from every view.
 *
 * # Safety
 * `dataset` must be a live handle; `out` valid for writes.
 */
enum AslslStatus aslsl_dataset_inject_missing(const struct AslslDataset *dataset,
                                              double ratio,
                                              uint64_t seed,
                                              struct AslslDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; each out pointer null or writable.
 */
enum AslslStatus aslsl_dataset_shape(const struct AslslDataset *dataset,
                                     size_t *n_instances,
                                     size_t *n_views,
                                     size_t *n_labels);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void aslsl_dataset_free(struct AslslDataset *dataset);

/**
 * Builds the label graph (`graph_q` neighbors, width `graph_sigma`) and
 * fits the model.
 *
 * # Safety
 * `dataset` must be a live handle, `hyper` readable, `out` writable.
 */
enum AslslStatus aslsl_fit(const struct AslslDataset *dataset,
                           const struct AslslHyperparams *hyper,
                           size_t graph_q,
                           double graph_sigma,
                           uint64_t seed,
                           struct AslslModel **out);

/**
 * # Safety
 * `model` must be a live handle; out pointers null or writable.
 */
enum AslslStatus aslsl_model_info(const struct AslslModel *model,
                                  size_t *n_views,
                                  size_t *total_features,
                                  size_t *iterations,
                                  bool *converged);

/**
 * Copies the view weights into `alpha` (length `len ≥ n_views`).
 *
 * # Safety
 * `model` must be a live handle; `alpha` must point to `len` writable doubles.
 */
enum AslslStatus aslsl_model_alpha(const struct AslslModel *model, double *alpha, size_t len);

/**
 * Writes the feature ranking best first: entry `i` is feature
 * `features[i]` of view `views[i]` with score `scores[i]`. All three
 * buffers must hold at least the model's total feature count.
 *
 * # Safety
 * `model` must be a live handle; each buffer must point to `len` writable
 * elements.
 */
enum AslslStatus aslsl_model_ranking(const struct AslslModel *model,
                                     size_t *views,
                                     size_t *features,
                                     double *scores,
                                     size_t len);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void aslsl_model_free(struct AslslModel *model);

/**
 * Six multi-label metrics. `predictions`, `confidences` and `truth` are
 * row-major `n_labels × n_instances`.
 *
 * # Safety
 * Each matrix must point to `n_labels * n_instances` readable doubles;
 * `out` must be writable.
 */
enum AslslStatus aslsl_metrics(const double *predictions,
                               const double *confidences,
                               const double *truth,
                               size_t n_labels,
                               size_t n_instances,
                               struct AslslMetrics *out);

/**
 * Runs an experiment described by a JSON config (any subset of the
 * settings; the rest take their defaults). When `out_dir` is non-null the
 * report files are written there. `*out_json` receives the report as JSON,
 * to be released with [`aslsl_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string, `out_dir` null or one,
 * `out_json` writable.
 */
enum AslslStatus aslsl_run_experiment_json(const char *config_json,
                                           const char *out_dir,
                                           char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void aslsl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASLSL_H */
