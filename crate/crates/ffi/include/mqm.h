#ifndef MQM_H
#define MQM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MqmStatus {
  MQM_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  MQM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MQM_STATUS_INVALID_UTF8 = 2,
  /**
   * Text input (taxonomy, counts file) failed to parse.
   */
  MQM_STATUS_PARSE_ERROR = 3,
  /**
   * Input parsed but violates a data invariant.
   */
  MQM_STATUS_INVALID_DATA = 4,
  /**
   * Reading files failed.
   */
  MQM_STATUS_IO_ERROR = 5,
  /**
   * A named system, annotator, category, or built-in does not exist.
   */
  MQM_STATUS_NOT_FOUND = 6,
  /**
   * The statistic is undefined for this input (e.g. a zero marginal).
   */
  MQM_STATUS_NOT_COMPUTABLE = 7,
  MQM_STATUS_PANIC = 99,
} MqmStatus;

typedef enum MqmPairMode {
  MQM_PAIR_MODE_ADJACENT = 0,
  MQM_PAIR_MODE_ALL = 1,
} MqmPairMode;

typedef enum MqmFormat {
  MQM_FORMAT_MARKDOWN = 0,
  MQM_FORMAT_CSV = 1,
  MQM_FORMAT_JSON = 2,
} MqmFormat;

/**
 * Opaque dataset handle.
 */
typedef struct MqmDataset MqmDataset;

/**
 * Opaque taxonomy handle.
 */
typedef struct MqmTaxonomy MqmTaxonomy;

/**
 * Pearson chi-squared result for a 2x2 table.
 */
typedef struct MqmChiSquare {
  double chi2;
  double p;
  double min_expected;
  /**
   * 0, 1, or 2 significance stars (no expected-count rule applied).
   */
  uint8_t stars;
  /**
   * -1 when system A has the lower error ratio, 1 when B does, 0 if equal.
   */
  int8_t lower;
} MqmChiSquare;

/**
 * Cohen's kappa. `kappa` is NaN and `computable` false when expected
 * agreement is 1.
 */
typedef struct MqmKappa {
  double kappa;
  double observed;
  double expected;
  size_t items;
  bool computable;
} MqmKappa;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or "" if none. The pointer
 * stays valid until the next failing call on this thread.
 */
const char *mqm_last_error(void);

/**
 * Library version as a static string.
 */
const char *mqm_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library that has not
 * been freed.
 */
void mqm_string_free(char *s);

/**
 * Built-in taxonomy by name: `core` or `slavic`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` a valid pointer.
 */
enum MqmStatus mqm_taxonomy_builtin(const char *name, struct MqmTaxonomy **out);

/**
 * Parses taxonomy definition text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` a valid pointer.
 */
enum MqmStatus mqm_taxonomy_parse(const char *text, struct MqmTaxonomy **out);

/**
 * # Safety
 * `t` must be NULL or a live handle from this library.
 */
void mqm_taxonomy_free(struct MqmTaxonomy *t);

/**
 * Number of categories, or 0 for NULL.
 *
 * # Safety
 * `t` must be NULL or a live handle.
 */
size_t mqm_taxonomy_len(const struct MqmTaxonomy *t);

/**
 * Category tree as JSON.
 *
 * # Safety
 * `t` must be a live handle; `out` a valid pointer.
 */
enum MqmStatus mqm_taxonomy_to_json(const struct MqmTaxonomy *t, char **out);

/**
 * Canonical definition text.
 *
 * # Safety
 * `t` must be a live handle; `out` a valid pointer.
 */
enum MqmStatus mqm_taxonomy_to_text(const struct MqmTaxonomy *t, char **out);

/**
 * Loads a dataset directory, replaying its annotation log if present.
 *
 * # Safety
 * `dir` must be a NUL-terminated path; `out` a valid pointer.
 */
enum MqmStatus mqm_dataset_load(const char *dir, struct MqmDataset **out);

/**
 * # Safety
 * `d` must be NULL or a live handle from this library.
 */
void mqm_dataset_free(struct MqmDataset *d);

/**
 * Real output tokens of `system` plus one per phantom span by `annotator`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum MqmStatus mqm_dataset_effective_token_count(const struct MqmDataset *d,
                                                 const char *system,
                                                 const char *annotator,
                                                 uint64_t *out);

/**
 * Error tokens of `system` in `category` (descendants included) over all
 * annotators. A NULL `category` counts any error.
 *
 * # Safety
 * Pointers must be valid; `category` may be NULL.
 */
enum MqmStatus mqm_dataset_error_tokens(const struct MqmDataset *d,
                                        const char *system,
                                        const char *category,
                                        uint64_t *out);

/**
 * Agreement, ratio, and significance tables for a dataset.
 *
 * # Safety
 * `d` must be a live handle; `out` a valid pointer.
 */
enum MqmStatus mqm_dataset_report(const struct MqmDataset *d,
                                  enum MqmPairMode mode,
                                  double min_expected,
                                  enum MqmFormat format,
                                  char **out);

/**
 * `err / total`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MqmStatus mqm_error_ratio(uint64_t err, uint64_t total, double *out);

/**
 * Pearson chi-squared (1 dof, no continuity correction) for
 * `[[ok_a, err_a], [ok_b, err_b]]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MqmStatus mqm_chi_squared_2x2(uint64_t ok_a,
                                   uint64_t err_a,
                                   uint64_t ok_b,
                                   uint64_t err_b,
                                   struct MqmChiSquare *out);

/**
 * Cohen's kappa over two label arrays of length `n` (nonzero = present).
 *
 * # Safety
 * `a` and `b` must point to `n` readable bytes; `out` must be valid.
 */
enum MqmStatus mqm_cohens_kappa(const uint8_t *a, const uint8_t *b, size_t n, struct MqmKappa *out);

/**
 * Significance table from counts-file text (`category_id,system_id,ok,err`).
 * `taxonomy` may be NULL; otherwise it supplies row labels and indentation.
 *
 * # Safety
 * `counts_csv` must be NUL-terminated; `taxonomy` NULL or live; `out` valid.
 */
enum MqmStatus mqm_significance_from_counts(const char *counts_csv,
                                            const struct MqmTaxonomy *taxonomy,
                                            enum MqmPairMode mode,
                                            double min_expected,
                                            enum MqmFormat format,
                                            char **out);

/**
 * Scope count and normalized significance tables from scope-count text
 * (`system_id,level,element,count`, with `tokens` rows).
 *
 * # Safety
 * `scope_csv` must be NUL-terminated; `out` valid.
 */
enum MqmStatus mqm_scope_from_counts(const char *scope_csv,
                                     uint64_t tokens_per_error,
                                     enum MqmPairMode mode,
                                     double min_expected,
                                     enum MqmFormat format,
                                     char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MQM_H */
