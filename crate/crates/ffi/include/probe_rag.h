#ifndef PROBE_RAG_H
#define PROBE_RAG_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PragStatus {
  PRAG_STATUS_OK = 0,
  PRAG_STATUS_NULL_POINTER = 1,
  PRAG_STATUS_INVALID_UTF8 = 2,
  PRAG_STATUS_IO = 3,
  PRAG_STATUS_DATA = 4,
  PRAG_STATUS_DIMENSION = 5,
  PRAG_STATUS_OUT_OF_RANGE = 6,
  PRAG_STATUS_PANIC = 7,
} PragStatus;

// Per-layer prober ensemble with its decision threshold.
typedef struct PragEnsemble PragEnsemble;

// BM25 index over a document corpus.
typedef struct PragIndex PragIndex;

// Ranked search hits; ids stay valid until the results are freed.
typedef struct PragResults PragResults;

// Soft-vote outcome of [`prag_ensemble_decide`].
typedef struct PragDecision {
  double sum_call;
  double sum_pass;
  double theta;
  bool retrieve;
} PragDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. Valid
// until the next failing call on the same thread.
const char *prag_last_error(void);

// Library version as a static NUL-terminated string.
const char *prag_version(void);

// Builds an index from a corpus JSONL file (`id`, `title`, `text` per line).
enum PragStatus prag_index_build(const char *corpus_path,
                                 double k1,
                                 double b,
                                 struct PragIndex **out);

// Loads an index file written by [`prag_index_save`] or `probe-rag index`.
enum PragStatus prag_index_load(const char *path, struct PragIndex **out);

enum PragStatus prag_index_save(const struct PragIndex *index, const char *path);

// Number of indexed documents; 0 for a null handle.
size_t prag_index_doc_count(const struct PragIndex *index);

void prag_index_free(struct PragIndex *index);

// Top-`j` documents for `query`, best first.
enum PragStatus prag_index_search(const struct PragIndex *index,
                                  const char *query,
                                  size_t j,
                                  struct PragResults **out);

size_t prag_results_len(const struct PragResults *results);

// Document id of hit `i`, or null when out of range.
const char *prag_results_id(const struct PragResults *results, size_t i);

// BM25 score of hit `i`, or NaN when out of range.
double prag_results_score(const struct PragResults *results, size_t i);

void prag_results_free(struct PragResults *results);

// Loads an ensemble manifest and its per-layer checkpoints.
enum PragStatus prag_ensemble_load(const char *path, struct PragEnsemble **out);

void prag_ensemble_free(struct PragEnsemble *ensemble);

size_t prag_ensemble_layer_count(const struct PragEnsemble *ensemble);

// Copies the ascending layer indices into `layers` (capacity `cap`).
enum PragStatus prag_ensemble_layers(const struct PragEnsemble *ensemble,
                                     uint32_t *layers,
                                     size_t cap);

size_t prag_ensemble_d_model(const struct PragEnsemble *ensemble);

double prag_ensemble_theta(const struct PragEnsemble *ensemble);

enum PragStatus prag_ensemble_set_theta(struct PragEnsemble *ensemble, double theta);

// Decides on pooled features laid out as `layer_count x d_model` row-major,
// rows in ascending layer order. `len` must equal that product.
enum PragStatus prag_ensemble_decide(const struct PragEnsemble *ensemble,
                                     const double *pooled,
                                     size_t len,
                                     struct PragDecision *out);

// Mean-pools a `tokens x d_model` row-major matrix and standardizes the
// result into `out` (length `d_model`).
enum PragStatus prag_pool_hidden_states(const double *states,
                                        size_t tokens,
                                        size_t d_model,
                                        double *out);

// Whether the normalized prediction equals any normalized gold answer.
enum PragStatus prag_exact_match(const char *prediction,
                                 const char *const *golds,
                                 size_t n_golds,
                                 bool *out);

// Whether any normalized gold answer occurs as a token span of the
// normalized prediction.
enum PragStatus prag_accuracy(const char *prediction,
                              const char *const *golds,
                              size_t n_golds,
                              bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROBE_RAG_H */
