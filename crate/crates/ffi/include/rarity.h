#ifndef RARITY_H
#define RARITY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RarityStatus {
  RARITY_STATUS_OK = 0,
  RARITY_STATUS_INVALID_ARGUMENT = 1,
  RARITY_STATUS_FORMAT = 2,
  RARITY_STATUS_IO = 3,
  RARITY_STATUS_UNDEFINED_SCORE = 4,
  RARITY_STATUS_NULL_POINTER = 5,
  RARITY_STATUS_FINGERPRINT_MISMATCH = 6,
  RARITY_STATUS_INTERNAL = 7,
} RarityStatus;

typedef enum RarityVerdict {
  RARITY_VERDICT_ACCEPT = 0,
  RARITY_VERDICT_REFER = 1,
} RarityVerdict;

typedef struct RarityMatrix RarityMatrix;

typedef struct RarityModel RarityModel;

typedef struct RarityMonitor RarityMonitor;

/**
 * Outcome of a monitor assessment. `score` is meaningful only when
 * `score_defined` is true; an undefined score is always a referral.
 */
typedef struct RarityDecision {
  enum RarityVerdict verdict;
  bool score_defined;
  double score;
  double tau_used;
} RarityDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *rarity_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rarity_version(void);

enum RarityStatus rarity_model_load(const char *path, struct RarityModel **out);

enum RarityStatus rarity_model_from_bytes(const uint8_t *data,
                                          size_t len,
                                          struct RarityModel **out);

void rarity_model_free(struct RarityModel *model);

/**
 * Input width, penultimate width and class count.
 */
enum RarityStatus rarity_model_dims(const struct RarityModel *model,
                                    size_t *input_dim,
                                    size_t *penultimate_width,
                                    size_t *classes);

/**
 * Forward pass. Either output buffer may be NULL to skip it; otherwise its
 * length must equal the penultimate width or class count.
 */
enum RarityStatus rarity_model_forward(const struct RarityModel *model,
                                       const double *input,
                                       size_t input_len,
                                       double *penultimate_out,
                                       size_t penultimate_len,
                                       double *probabilities_out,
                                       size_t probabilities_len);

enum RarityStatus rarity_model_predict(const struct RarityModel *model,
                                       const double *input,
                                       size_t input_len,
                                       size_t *class_out);

enum RarityStatus rarity_matrix_load(const char *path, struct RarityMatrix **out);

void rarity_matrix_free(struct RarityMatrix *matrix);

enum RarityStatus rarity_matrix_dims(const struct RarityMatrix *matrix,
                                     size_t *neurons,
                                     size_t *classes);

/**
 * Commonality score of a 0/1 byte pattern under `predicted_class`.
 */
enum RarityStatus rarity_matrix_score(const struct RarityMatrix *matrix,
                                      const uint8_t *pattern,
                                      size_t pattern_len,
                                      size_t predicted_class,
                                      double *score_out);

enum RarityStatus rarity_monitor_load(const char *path, struct RarityMonitor **out);

void rarity_monitor_free(struct RarityMonitor *monitor);

enum RarityStatus rarity_monitor_tau(const struct RarityMonitor *monitor, double *tau_out);

/**
 * Checks that the model file at `model_path` is the one the monitor was built for.
 */
enum RarityStatus rarity_monitor_verify_model_file(const struct RarityMonitor *monitor,
                                                   const char *model_path);

enum RarityStatus rarity_monitor_assess(const struct RarityMonitor *monitor,
                                        const uint8_t *pattern,
                                        size_t pattern_len,
                                        size_t predicted_class,
                                        struct RarityDecision *out);

/**
 * As [`rarity_monitor_assess`], binarizing raw penultimate activations first.
 */
enum RarityStatus rarity_monitor_assess_activations(const struct RarityMonitor *monitor,
                                                    const double *activations,
                                                    size_t activations_len,
                                                    size_t predicted_class,
                                                    struct RarityDecision *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RARITY_H */
