#ifndef MNLEARN_H
#define MNLEARN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Learner selection for [`mnl_learn`].
 */
typedef enum MnlAlgo {
  MNL_ALGO_ADAPTIVE = 0,
  MNL_ALGO_BALANCED = 1,
  MNL_ALGO_NONADAPTIVE = 2,
} MnlAlgo;

/**
 * Result codes. Zero is success.
 */
typedef enum MnlStatus {
  MNL_STATUS_OK = 0,
  MNL_STATUS_NULL_POINTER = 1,
  MNL_STATUS_INVALID_ARGUMENT = 2,
  MNL_STATUS_BUDGET_EXHAUSTED = 3,
  MNL_STATUS_BALANCED_FAILURE = 4,
  MNL_STATUS_GEOMETRIC_CAP = 5,
  MNL_STATUS_TOO_LARGE = 6,
  MNL_STATUS_BUFFER_TOO_SMALL = 7,
  MNL_STATUS_INTERNAL = 8,
  MNL_STATUS_PANIC = 9,
} MnlStatus;

/**
 * Opaque choice model.
 */
typedef struct MnlModel MnlModel;

/**
 * Opaque simulated oracle with its query ledger.
 */
typedef struct MnlOracle MnlOracle;

/**
 * An unsigned 128-bit count split into two 64-bit halves.
 */
typedef struct MnlCount {
  uint64_t lo;
  uint64_t hi;
} MnlCount;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *mnl_last_error_message(void);

/**
 * Creates an MNL from `n` natural-log weights.
 *
 * # Safety
 * `log_weights` must point to `n` doubles; `out` must be writable.
 */
enum MnlStatus mnl_model_from_log_weights(const double *log_weights,
                                          size_t n,
                                          struct MnlModel **out);

/**
 * Parses a model from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum MnlStatus mnl_model_from_json(const char *json, struct MnlModel **out);

/**
 * Generates an instance from a spec string such as `"power-law:1"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum MnlStatus mnl_model_generate(const char *spec, size_t n, uint64_t seed, struct MnlModel **out);

/**
 * Serialises a model to JSON. Release the string with [`mnl_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MnlStatus mnl_model_to_json(const struct MnlModel *model, char **out);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void mnl_string_free(char *s);

/**
 * Releases a model.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void mnl_model_free(struct MnlModel *model);

/**
 * Number of items, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mnl_model_len(const struct MnlModel *model);

/**
 * Copies the log weights into `out` (capacity `cap`). Fails for
 * pseudo-MNL models.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `cap` doubles.
 */
enum MnlStatus mnl_model_log_weights(const struct MnlModel *model, double *out, size_t cap);

/**
 * Writes the choice probabilities on `slate` (length `k`) into `out`.
 *
 * # Safety
 * `slate` must hold `k` indices and `out` room for `k` doubles.
 */
enum MnlStatus mnl_model_slate_distribution(const struct MnlModel *model,
                                            const size_t *slate,
                                            size_t k,
                                            double *out);

/**
 * Creates a simulated oracle for a copy of `model`; `(seed, trial)` fixes
 * every random stream.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MnlStatus mnl_oracle_new(const struct MnlModel *model,
                              uint64_t seed,
                              uint64_t trial,
                              struct MnlOracle **out);

/**
 * Releases an oracle.
 *
 * # Safety
 * `oracle` must be null or a handle not yet freed.
 */
void mnl_oracle_free(struct MnlOracle *oracle);

/**
 * Draws one winner from `slate` (length `k`).
 *
 * # Safety
 * `oracle` must be a live handle, `slate` hold `k` indices, `out` be writable.
 */
enum MnlStatus mnl_oracle_sample(struct MnlOracle *oracle,
                                 const size_t *slate,
                                 size_t k,
                                 size_t *out);

/**
 * Total queries answered so far; zero for a null handle.
 *
 * # Safety
 * `oracle` must be null or a live handle.
 */
struct MnlCount mnl_oracle_total_queries(const struct MnlOracle *oracle);

/**
 * Largest number of queries made to one pair.
 *
 * # Safety
 * `oracle` must be null or a live handle.
 */
struct MnlCount mnl_oracle_max_pair_queries(const struct MnlOracle *oracle);

/**
 * Learns a model from `oracle`. `m` is the per-pair batch size and is only
 * read by the non-adaptive learner.
 *
 * # Safety
 * `oracle` must be a live handle; `out` must be writable.
 */
enum MnlStatus mnl_learn(struct MnlOracle *oracle,
                         enum MnlAlgo algo,
                         double eps,
                         double delta,
                         struct MnlCount m,
                         struct MnlModel **out);

/**
 * Exact total-variation distances between two models over all slates.
 *
 * # Safety
 * Both handles must be live; `d1` and `dinf` must be writable.
 */
enum MnlStatus mnl_distance_exact(const struct MnlModel *a,
                                  const struct MnlModel *b,
                                  double *d1,
                                  double *dinf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MNLEARN_H */
